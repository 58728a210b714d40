// Copyright 2026 The SRPO Lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Group rollout generation against a frozen behavior snapshot.

#ifndef SRPO_ROLLOUT_HPP_
#define SRPO_ROLLOUT_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "srpo/credit.hpp"
#include "srpo/policy.hpp"
#include "srpo/structured.hpp"
#include "srpo/synthgen.hpp"

namespace srpo::rollout {

struct ResponseRecord {
  std::vector<TokenId> tokens;
  std::vector<double> logp_full;  ///< behavior log-probs recorded at sampling time
  SpanLayout layout;
};

struct GroupRollout {
  std::uint64_t task_id = 0;
  policy::Prompt prompt;
  std::vector<ResponseRecord> responses;
  std::vector<synthgen::RewardBreakdown> rewards;
  std::vector<double> advantages;
  std::uint64_t behavior_stamp = 0;
  /// Per-response token credits. Empty means every token takes the plain
  /// group advantage.
  std::vector<std::vector<credit::TokenCredit>> credits;

  int size() const { return static_cast<int>(responses.size()); }
};

struct SamplingConfig {
  double top_p = 0.99;
  int max_len = 24;
  double lambda_fmt = 0.1;
  double lambda_acc = 0.9;
  double eps_norm = 1e-6;
};

/// Member i of a group draws from seed (master, step, task_id, i).
std::vector<Seed> member_seeds(Seed master, std::uint64_t step, std::uint64_t task_id, int G);

GroupRollout generate_group(const policy::PolicyParams& params_old,
                            const synthgen::TaskInstance& task, int G,
                            std::span<const Seed> seeds, const SamplingConfig& cfg);

policy::PolicyParams snapshot_behavior(const policy::PolicyParams& params);

/// Drops groups whose rewards are all identical; survivors keep their order.
std::vector<GroupRollout> online_filter(std::vector<GroupRollout> groups);

bool has_reward_variance(const GroupRollout& group);

/// One line-delimited record per response.
void write_rollout_dump(std::ostream& out, const GroupRollout& group);

}  // namespace srpo::rollout

#endif  // SRPO_ROLLOUT_HPP_
