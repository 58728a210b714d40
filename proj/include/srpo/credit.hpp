// Copyright 2026 The SRPO Lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Role-aware token credit: group-normalized advantages, self-distilled
// likelihood contrasts for perception and reasoning spans, exponential role
// scores and one clipped, baseline-centered weight per valid token.

#ifndef SRPO_CREDIT_HPP_
#define SRPO_CREDIT_HPP_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "srpo/policy.hpp"
#include "srpo/structured.hpp"

namespace srpo::credit {

enum class Role { kPerception, kReasoning, kNeutral };
std::string_view role_name(Role r);

struct TokenCredit {
  int position = 0;
  Role role = Role::kNeutral;
  double delta = 0.0;
  double raw_score = 1.0;
  double weight = 1.0;
  double token_advantage = 0.0;
  bool clipped = false;  ///< the weight hit m_min or m_max

  bool operator==(const TokenCredit&) const = default;
};

struct ModulationConfig {
  double lambda_mod = 0.5;
  double m_min = 0.8;
  double m_max = 1.2;
  double eps_norm = 1e-6;
  double p_mask = 0.5;

  void validate() const;
};

/// Ablation switches. Disabled roles score r = 1; without unified modulation
/// the weight is clip(r, m_min, m_max) with no baseline.
struct CreditSwitches {
  bool perception = true;
  bool reasoning = true;
  bool unified_modulation = true;
};

/// Score exponents are clamped to this magnitude before exp().
inline constexpr double kScoreClamp = 30.0;

/// (R_i - mean) / (population std + eps_norm).
std::vector<double> group_advantages(std::span<const double> rewards, double eps_norm);

/// logp_full - logp_masked, element-wise.
std::vector<double> perception_contrast(std::span<const double> logp_full,
                                        std::span<const double> logp_masked);

/// logp_full - logp_ablated, element-wise.
std::vector<double> reasoning_contrast(std::span<const double> logp_full,
                                       std::span<const double> logp_ablated);

int advantage_sign(double advantage);

/// exp(clamp(sign * delta, +-kScoreClamp)).
std::vector<double> role_scores(std::span<const double> delta, int sign);

/// clip(1 + lambda_mod * (r - mean(r)), m_min, m_max) with one shared
/// baseline. Empty input yields an empty result.
std::vector<double> unified_modulation(std::span<const double> scores,
                                       const ModulationConfig& cfg);

/// advantage * w on valid positions, advantage elsewhere. `weights` is
/// ordered as layout.valid_positions().
std::vector<double> token_advantages(double advantage, const SpanLayout& layout,
                                     std::span<const double> weights, int length);

/// Phases 2 and 3 for one trajectory: rescoring under the behavior snapshot,
/// role scores, modulation and token advantages. One masked image per call.
std::vector<TokenCredit> assign_trajectory_credit(const policy::PolicyParams& behavior,
                                                  const policy::Prompt& prompt,
                                                  std::span<const TokenId> tokens,
                                                  std::span<const double> logp_full,
                                                  const SpanLayout& layout, double advantage,
                                                  const ModulationConfig& cfg,
                                                  const CreditSwitches& switches, Seed mask_seed);

/// Uniform credit (every weight exactly 1).
std::vector<TokenCredit> uniform_credit(const SpanLayout& layout, double advantage, int length);

/// Line-delimited credit-dump records.
void write_credit_dump(std::ostream& out, std::uint64_t task_id, int member_index,
                       std::span<const TokenCredit> credits);

}  // namespace srpo::credit

#endif  // SRPO_CREDIT_HPP_
