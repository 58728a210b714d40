// Copyright 2026 The SRPO Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "srpo/structured.hpp"
#include "srpo/vocab.hpp"

namespace srpo {

std::vector<int> SpanLayout::valid_positions() const {
  std::vector<int> out;
  out.reserve(valid_size());
  for (int t = perc_begin; t < perc_end; ++t) out.push_back(t);
  for (int t = reas_begin; t < reas_end; ++t) out.push_back(t);
  return out;
}

namespace rollout {
namespace {

bool is_content(TokenId t) {
  return t >= 0 && t < Vocabulary::kSize && !Vocabulary::is_structural(t);
}

}  // namespace

SpanLayout parse_structured(std::span<const TokenId> tokens) {
  const int n = static_cast<int>(tokens.size());
  SpanLayout failed;
  int i = 0;
  auto expect = [&](TokenId tag) {
    if (i < n && tokens[i] == tag) {
      ++i;
      return true;
    }
    return false;
  };

  if (!expect(Vocabulary::kPercOpen)) return failed;
  const int perc_begin = i;
  while (i < n && is_content(tokens[i])) ++i;
  const int perc_end = i;
  if (!expect(Vocabulary::kPercClose)) return failed;
  if (!expect(Vocabulary::kReasOpen)) return failed;
  const int reas_begin = i;
  while (i < n && is_content(tokens[i])) ++i;
  const int reas_end = i;
  if (!expect(Vocabulary::kReasClose)) return failed;
  if (!expect(Vocabulary::kAns)) return failed;
  if (i >= n || !Vocabulary::is_answer(tokens[i])) return failed;
  const int answer_position = i++;
  if (!expect(Vocabulary::kEos)) return failed;
  if (i != n) return failed;

  SpanLayout layout;
  layout.perc_begin = perc_begin;
  layout.perc_end = perc_end;
  layout.reas_begin = reas_begin;
  layout.reas_end = reas_end;
  layout.answer_position = answer_position;
  layout.parse_ok = true;
  return layout;
}

StructuredResponse make_structured(std::vector<TokenId> tokens) {
  StructuredResponse resp;
  resp.layout = parse_structured(tokens);
  if (resp.layout.parse_ok) {
    resp.answer = Vocabulary::answer_value(tokens[*resp.layout.answer_position]);
  }
  resp.tokens = std::move(tokens);
  return resp;
}

}  // namespace rollout
}  // namespace srpo
