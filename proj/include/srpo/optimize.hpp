// Copyright 2026 The SRPO Lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Clipped token-level surrogate, the sampled-token uncertainty penalty, their
// combination, and the adaptive-moment parameter update. All objectives are
// maximized.

#ifndef SRPO_OPTIMIZE_HPP_
#define SRPO_OPTIMIZE_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "srpo/policy.hpp"
#include "srpo/rollout.hpp"

namespace srpo::optimize {

struct ClipConfig {
  double eps_low = 0.2;
  double eps_high = 0.28;

  void validate() const;
};

/// min(ratio * adv, clip(ratio, 1 - eps_low, 1 + eps_high) * adv).
double clipped_token_term(double ratio, double adv, double eps_low, double eps_high);

struct SurrogateTerms {
  std::vector<double> ratios;          ///< flattened (group, member, position)
  std::vector<double> clipped_values;  ///< same order
  double objective = 0.0;
  std::vector<double> grad;
};

/// Group- and length-normalized clipped surrogate with its exact gradient.
/// Token advantages come from each group's credits (plain group advantage if
/// none were assigned). Old log-probs are the ones recorded at sampling time
/// by `behavior`.
SurrogateTerms srpo_objective(std::span<const rollout::GroupRollout> groups,
                              const policy::PolicyParams& params,
                              const policy::PolicyParams& behavior, const ClipConfig& clip);

struct UncertaintyTerms {
  double value = 0.0;
  std::vector<double> grad;
};

/// Mean negative log-likelihood of sampled valid tokens; responses with an
/// empty valid set contribute 0.
UncertaintyTerms resp_uncertainty(std::span<const rollout::GroupRollout> groups,
                                  const policy::PolicyParams& params);

struct TotalTerms {
  double j_srpo = 0.0;
  double j_resp = 0.0;
  double j_total = 0.0;
  std::vector<double> grad;  ///< ascent direction of j_total
};

double total_objective(double j_srpo, double j_resp, double eta);
TotalTerms total_objective(const SurrogateTerms& srpo, const UncertaintyTerms& resp, double eta);

/// Single fused pass (one forward/backward per response) computing the same
/// quantities as srpo_objective + resp_uncertainty + total_objective.
TotalTerms evaluate_total(std::span<const rollout::GroupRollout> groups,
                          const policy::PolicyParams& params,
                          const policy::PolicyParams& behavior, const ClipConfig& clip,
                          double eta);

struct OptimizerConfig {
  double lr = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  int epochs_per_batch = 2;

  void validate() const;

  bool operator==(const OptimizerConfig&) const = default;
};

struct OptimizerState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
  OptimizerConfig hyper;

  bool operator==(const OptimizerState&) const = default;
};

OptimizerState make_optimizer_state(std::size_t n, const OptimizerConfig& cfg);

/// Decoupled-weight-decay adaptive-moment ascent step. A non-finite gradient
/// aborts with NumericError before anything is modified.
void apply_update(policy::PolicyParams& params, std::span<const double> ascent_grad,
                  OptimizerState& state);

}  // namespace srpo::optimize

#endif  // SRPO_OPTIMIZE_HPP_
