// Copyright 2026 The SRPO Lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// The structured response grammar:
//   <perc> p* </perc> <reas> r* </reas> <ans> A_k <eos>
// where p* and r* are free of structural tags.

#ifndef SRPO_STRUCTURED_HPP_
#define SRPO_STRUCTURED_HPP_

#include <optional>
#include <span>
#include <vector>

#include "srpo/common.hpp"

namespace srpo {

/// Position sets of one response. Spans are half-open [begin, end) ranges of
/// token indices; the valid set is their union.
struct SpanLayout {
  int perc_begin = 0;
  int perc_end = 0;
  int reas_begin = 0;
  int reas_end = 0;
  std::optional<int> answer_position;
  bool parse_ok = false;

  int perc_size() const { return perc_end - perc_begin; }
  int reas_size() const { return reas_end - reas_begin; }
  int valid_size() const { return perc_size() + reas_size(); }
  bool in_perception(int t) const { return t >= perc_begin && t < perc_end; }
  bool in_reasoning(int t) const { return t >= reas_begin && t < reas_end; }
  bool is_valid(int t) const { return in_perception(t) || in_reasoning(t); }
  /// Valid positions in ascending order (perception first).
  std::vector<int> valid_positions() const;

  bool operator==(const SpanLayout&) const = default;
};

struct StructuredResponse {
  std::vector<TokenId> tokens;
  SpanLayout layout;
  std::optional<int> answer;  ///< extracted integer answer, only when parse_ok
};

namespace rollout {

/// Total parser for the tag grammar; failures yield parse_ok = false with
/// empty spans.
SpanLayout parse_structured(std::span<const TokenId> tokens);

StructuredResponse make_structured(std::vector<TokenId> tokens);

}  // namespace rollout
}  // namespace srpo

#endif  // SRPO_STRUCTURED_HPP_
