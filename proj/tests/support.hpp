// Copyright 2026 The SRPO Lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Small fixtures shared by the test binaries.

#ifndef SRPO_TESTS_SUPPORT_HPP_
#define SRPO_TESTS_SUPPORT_HPP_

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "srpo/common.hpp"
#include "srpo/credit.hpp"
#include "srpo/policy.hpp"
#include "srpo/rollout.hpp"
#include "srpo/structured.hpp"
#include "srpo/synthgen.hpp"
#include "srpo/vocab.hpp"

namespace srpo::testing {

/// A toy architecture over V tokens with a 2x2 image table.
inline policy::Dims tiny_dims(int V, int E, int H, TokenId eos, int context_len = 4) {
  policy::Dims d;
  d.vocab_size = V;
  d.embed_dim = E;
  d.hidden_dim = H;
  d.max_rows = 2;
  d.max_cols = 2;
  d.context_len = context_len;
  d.eos = eos;
  return d;
}

inline policy::PolicyParams random_params(const policy::Dims& d, Seed seed, double scale) {
  return policy::PolicyParams::random_init(d, seed, scale);
}

/// 2x2 digit grid with question tokens drawn from the small vocabulary.
inline policy::Prompt tiny_prompt(std::vector<int> grid, std::vector<TokenId> question) {
  policy::Prompt p;
  p.image = synthgen::SymbolImage(2, 2, std::move(grid));
  p.question = std::move(question);
  return p;
}

/// Position 0 is perception unless it is the terminator; every later
/// non-terminator position is reasoning.
inline SpanLayout head_tail_layout(std::span<const TokenId> tokens, TokenId eos) {
  SpanLayout l;
  l.parse_ok = true;
  const int T = static_cast<int>(tokens.size());
  const int content = (T > 0 && tokens.back() == eos) ? T - 1 : T;
  if (content == 0) return l;
  l.perc_begin = 0;
  l.perc_end = 1;
  l.reas_begin = 1;
  l.reas_end = content;
  return l;
}

struct GroupSpec {
  int G = 2;
  int max_len = 3;
  double top_p = 1.0;
  std::function<SpanLayout(std::span<const TokenId>)> layout;
  std::function<double(std::span<const TokenId>)> reward;
  /// Null leaves the credits empty (plain group advantage).
  const credit::ModulationConfig* modulation = nullptr;
  credit::CreditSwitches switches;
  std::vector<Seed> mask_seeds;  ///< one per member when modulation is set
};

/// One group sampled from `behavior` with caller-defined spans and rewards,
/// credited the way the trainer does it.
inline rollout::GroupRollout build_group(const policy::PolicyParams& behavior,
                                         const policy::Prompt& prompt, const GroupSpec& spec,
                                         Seed seed) {
  rollout::GroupRollout g;
  g.prompt = prompt;
  g.behavior_stamp = behavior.hash();
  std::vector<double> rewards;
  for (int i = 0; i < spec.G; ++i) {
    auto s = policy::sample_response(behavior, prompt,
                                     derive_seed(seed, {static_cast<std::uint64_t>(i)}),
                                     spec.top_p, spec.max_len);
    rewards.push_back(spec.reward(s.tokens));
    const SpanLayout layout = spec.layout(s.tokens);
    g.responses.push_back({std::move(s.tokens), std::move(s.logp), layout});
    g.rewards.push_back({0.0, 0.0, rewards.back()});
  }
  g.advantages = credit::group_advantages(rewards, 1e-6);
  if (spec.modulation != nullptr) {
    for (int i = 0; i < spec.G; ++i) {
      const auto& r = g.responses[i];
      g.credits.push_back(credit::assign_trajectory_credit(
          behavior, prompt, r.tokens, r.logp_full, r.layout, g.advantages[i], *spec.modulation,
          spec.switches, spec.mask_seeds[i]));
    }
  }
  return g;
}

/// A well-formed response in the full vocabulary.
inline std::vector<TokenId> make_response(std::vector<int> perc, std::vector<int> reas, int answer) {
  using V = Vocabulary;
  std::vector<TokenId> t{V::kPercOpen};
  for (int d : perc) t.push_back(V::digit(d));
  t.push_back(V::kPercClose);
  t.push_back(V::kReasOpen);
  for (int a : reas) t.push_back(V::answer(a));
  t.push_back(V::kReasClose);
  t.push_back(V::kAns);
  t.push_back(V::answer(answer));
  t.push_back(V::kEos);
  return t;
}

/// Relative disagreement with a 1e-6 floor on the scale, so exact zeros on
/// both sides compare equal.
inline double fd_rel_err(double a, double b) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-6});
}

/// Fresh scratch directory under the system temp path.
inline std::string scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("srpo_lab_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

}  // namespace srpo::testing

#endif  // SRPO_TESTS_SUPPORT_HPP_
