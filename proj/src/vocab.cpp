// Copyright 2026 The SRPO Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "srpo/vocab.hpp"

#include <array>

namespace srpo {
namespace {

constexpr std::array<std::string_view, 8> kStructuralNames = {
    "<perc>", "</perc>", "<reas>", "</reas>", "<ans>", "<eos>", "<sep>", "<mask>"};
constexpr std::array<std::string_view, Vocabulary::kNumQuestionTokens> kQuestionNames = {
    "Q_ROW_SUM", "Q_COL_SUM", "Q_COUNT_SYMBOL", "Q_ROW_MAX"};

}  // namespace

std::string Vocabulary::name(TokenId t) {
  require(t >= 0 && t < kSize, "Vocabulary::name: token id out of range");
  if (is_digit(t)) return std::to_string(t - kDigit0);
  if (is_answer(t)) return "A" + std::to_string(answer_value(t));
  if (is_structural(t)) return std::string(kStructuralNames[t - kPercOpen]);
  return std::string(kQuestionNames[t - kQuestion0]);
}

std::optional<TokenId> Vocabulary::from_name(std::string_view name) {
  for (TokenId t = 0; t < kSize; ++t) {
    if (Vocabulary::name(t) == name) return t;
  }
  return std::nullopt;
}

std::uint64_t Vocabulary::hash() {
  Fnv1a h;
  for (TokenId t = 0; t < kSize; ++t) {
    h.update(name(t));
    h.update("\n");
  }
  return h.digest();
}

}  // namespace srpo
