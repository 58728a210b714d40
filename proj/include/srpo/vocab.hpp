// Copyright 2026 The SRPO Lab Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SRPO_VOCAB_HPP_
#define SRPO_VOCAB_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "srpo/common.hpp"

namespace srpo {

/// The task token space. Ids are dense: digits, answer tokens, structural
/// tags, then question-surface tokens.
struct Vocabulary {
  static constexpr int kNumDigits = 10;
  static constexpr int kMaxAnswer = 54;
  static constexpr int kNumAnswers = kMaxAnswer + 1;

  static constexpr TokenId kDigit0 = 0;
  static constexpr TokenId kAnswer0 = kDigit0 + kNumDigits;
  static constexpr TokenId kPercOpen = kAnswer0 + kNumAnswers;
  static constexpr TokenId kPercClose = kPercOpen + 1;
  static constexpr TokenId kReasOpen = kPercOpen + 2;
  static constexpr TokenId kReasClose = kPercOpen + 3;
  static constexpr TokenId kAns = kPercOpen + 4;
  static constexpr TokenId kEos = kPercOpen + 5;
  static constexpr TokenId kSep = kPercOpen + 6;
  static constexpr TokenId kMask = kPercOpen + 7;
  static constexpr TokenId kQuestion0 = kPercOpen + 8;
  static constexpr int kNumQuestionTokens = 4;
  static constexpr int kSize = kQuestion0 + kNumQuestionTokens;

  static constexpr TokenId digit(int d) { return kDigit0 + d; }
  static constexpr TokenId answer(int a) { return kAnswer0 + a; }
  static constexpr bool is_digit(TokenId t) { return t >= kDigit0 && t < kAnswer0; }
  static constexpr bool is_answer(TokenId t) { return t >= kAnswer0 && t < kPercOpen; }
  static constexpr bool is_structural(TokenId t) { return t >= kPercOpen && t < kQuestion0; }
  static constexpr int answer_value(TokenId t) { return t - kAnswer0; }

  static std::string name(TokenId t);
  static std::optional<TokenId> from_name(std::string_view name);
  /// Hash of the ordered token names; recorded in checkpoints.
  static std::uint64_t hash();
};

}  // namespace srpo

#endif  // SRPO_VOCAB_HPP_
