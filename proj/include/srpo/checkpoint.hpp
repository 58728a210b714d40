// Copyright 2026 The SRPO Lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Versioned checkpoint records. Parameters and optimizer moments are written
// as decimal text with 17 significant digits, which round-trips doubles
// exactly; a checksum over the decoded values guards against corruption.

#ifndef SRPO_CHECKPOINT_HPP_
#define SRPO_CHECKPOINT_HPP_

#include <cstdint>
#include <optional>
#include <string>

#include "json.hpp"
#include "srpo/optimize.hpp"
#include "srpo/policy.hpp"

namespace srpo {

inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
  int format_version = kCheckpointFormatVersion;
  policy::PolicyParams params;
  std::uint64_t vocab_hash = 0;
  std::optional<optimize::OptimizerState> optimizer;
  // Trainer bookkeeping.
  std::uint64_t cfg_hash = 0;
  std::int64_t step = 0;
  std::uint64_t rng_epoch = 0;
  nlohmann::json config;  ///< training configuration, for explicit diffs on resume
};

nlohmann::json dims_to_json(const policy::Dims& d);
policy::Dims dims_from_json(const nlohmann::json& j);

/// Writes to a temporary file and renames it into place.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);

/// Throws IntegrityError on unreadable, truncated, version-mismatched or
/// checksum-failing files.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace srpo

#endif  // SRPO_CHECKPOINT_HPP_
