// Copyright 2026 The SRPO Lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Brute-force references for tests. Apart from the policy gradient routine,
// nothing here calls into the production credit, rollout or optimize code.

#ifndef SRPO_TESTS_ORACLE_HPP_
#define SRPO_TESTS_ORACLE_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "srpo/credit.hpp"
#include "srpo/policy.hpp"

namespace srpo::oracle {

// --- straight-line formulas -------------------------------------------------

std::vector<double> softmax_mlp(const policy::PolicyParams& params, std::span<const double> ctx);

/// Context built directly from the parameter layout; `kept_prefix` is already
/// filtered. A null image gives a zero image slot.
std::vector<double> context(const policy::PolicyParams& params, const synthgen::SymbolImage* image,
                            std::span<const TokenId> question, std::span<const TokenId> kept_prefix,
                            int pos);

/// Per-cell mask flags, recomputed from the seed hashing.
std::vector<bool> mask_cells(int cells, double p_mask, Seed seed);

/// log pi(tokens[t]) under a variant, computed from scratch.
double logprob(const policy::PolicyParams& params, const policy::Prompt& prompt,
               std::span<const TokenId> tokens, int t, policy::Variant variant,
               const SpanLayout& layout, double p_mask, Seed mask_seed);

std::vector<double> group_advantages(std::span<const double> rewards, double eps);
double clip_term(double ratio, double adv, double eps_low, double eps_high);
/// 1 - C(n-c, k) / C(n, k) from exact integer binomials.
double pass_at_k(int n, int c, int k);

// --- enumeration ------------------------------------------------------------

struct Enumerated {
  std::vector<std::vector<TokenId>> sequences;
  std::vector<double> probs;
};

/// Every terminated sequence (EOS or length cap) with its exact probability
/// under FULL conditioning and top_p = 1. Refuses V^L_max > 1e6.
Enumerated enumerate_distribution(const policy::PolicyParams& params, const policy::Prompt& prompt,
                                  int max_len);

struct ObjectiveSpec {
  int G = 2;
  int max_len = 3;
  std::function<SpanLayout(std::span<const TokenId>)> layout;
  std::function<double(std::span<const TokenId>)> reward;
  credit::ModulationConfig modulation;
  credit::CreditSwitches switches;
  std::vector<Seed> mask_seeds;  ///< one per group member
};

/// E over ordered G-tuples of (1/G) sum_i (1/T_i) sum_t A~_{i,t} grad log pi(y_{i,t})
/// at the snapshot, with the whole credit pipeline recomputed per tuple.
std::vector<double> exact_expected_gradient(const policy::PolicyParams& params,
                                            const policy::Prompt& prompt, const ObjectiveSpec& spec);

/// Plain group-advantage expectation for G = 2 via the closed form of the
/// pair advantage; shares no code with exact_expected_gradient.
std::vector<double> exact_grpo_gradient(const policy::PolicyParams& params,
                                        const policy::Prompt& prompt, const ObjectiveSpec& spec);

}  // namespace srpo::oracle

#endif  // SRPO_TESTS_ORACLE_HPP_
