// Copyright 2026 The SRPO Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "srpo/optimize.hpp"

#include <algorithm>
#include <cmath>

#include "srpo/parallel.hpp"

namespace srpo::optimize {

void ClipConfig::validate() const {
  if (!(eps_low >= 0.0 && eps_low < 1.0)) throw ConfigError("clip.eps_low", "must lie in [0, 1)");
  if (!(eps_high >= 0.0)) throw ConfigError("clip.eps_high", "must be >= 0");
}

void OptimizerConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("optimizer.lr", "must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("optimizer.beta1", "must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("optimizer.beta2", "must lie in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("optimizer.eps", "must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("optimizer.weight_decay", "must be >= 0");
  if (epochs_per_batch < 1) throw ConfigError("optimizer.epochs_per_batch", "must be >= 1");
}

double clipped_token_term(double ratio, double adv, double eps_low, double eps_high) {
  require(ratio > 0.0, "clipped_token_term: ratio must be positive");
  const double clipped = std::clamp(ratio, 1.0 - eps_low, 1.0 + eps_high);
  return std::min(ratio * adv, clipped * adv);
}

namespace {

struct GroupPass {
  double srpo = 0.0;
  double resp = 0.0;
  std::vector<double> grad;
  std::vector<double> ratios;
  std::vector<double> values;
};

// Contributions of one group. The caller divides by the number of groups.
// srpo_scale / resp_scale weight the two gradient parts; a zero scale skips
// that part.
GroupPass run_group(const rollout::GroupRollout& group, const policy::PolicyParams& params,
                    const ClipConfig& clip, double srpo_scale, double resp_scale, double n_groups,
                    bool keep_terms) {
  GroupPass out;
  out.grad.assign(params.size(), 0.0);
  const int G = group.size();
  const bool have_credit = !group.credits.empty();
  for (int i = 0; i < G; ++i) {
    const auto& resp = group.responses[i];
    const int T = static_cast<int>(resp.tokens.size());
    if (T == 0) continue;
    const auto tr = policy::trace_sequence(params, group.prompt, resp.tokens, policy::Variant::kFull,
                                           resp.layout);
    std::vector<double> coeff(T, 0.0);
    double sum_terms = 0.0;
    for (int t = 0; t < T; ++t) {
      const double adv = have_credit ? group.credits[i][t].token_advantage : group.advantages[i];
      const double ratio = std::exp(tr.logp[t] - resp.logp_full[t]);
      if (!std::isfinite(ratio) || !(ratio > 0.0)) {
        throw NumericError("non-finite importance ratio");
      }
      const double value = clipped_token_term(ratio, adv, clip.eps_low, clip.eps_high);
      sum_terms += value;
      if (keep_terms) {
        out.ratios.push_back(ratio);
        out.values.push_back(value);
      }
      // The min picks the unclipped branch whenever it is not larger.
      if (srpo_scale != 0.0 && ratio * adv <= value) {
        coeff[t] = srpo_scale * adv * ratio / (n_groups * G * T);
      }
    }
    out.srpo += sum_terms / T;

    const int nv = resp.layout.parse_ok ? resp.layout.valid_size() : 0;
    if (nv > 0) {
      double nll = 0.0;
      for (int t : resp.layout.valid_positions()) {
        nll -= tr.logp[t];
        if (resp_scale != 0.0) coeff[t] += resp_scale / (n_groups * G * nv);
      }
      out.resp += nll / nv;
    }
    policy::accumulate_logprob_gradient(params, tr, coeff, out.grad);
  }
  out.srpo /= G;
  out.resp /= G;
  return out;
}

struct BatchPass {
  double srpo = 0.0;
  double resp = 0.0;
  std::vector<double> grad;
  std::vector<double> ratios;
  std::vector<double> values;
};

BatchPass run_batch(std::span<const rollout::GroupRollout> groups,
                    const policy::PolicyParams& params, const policy::PolicyParams* behavior,
                    const ClipConfig& clip, double srpo_scale, double resp_scale, bool keep_terms) {
  BatchPass out;
  out.grad.assign(params.size(), 0.0);
  if (groups.empty()) return out;
  if (behavior != nullptr) {
    const std::uint64_t stamp = behavior->hash();
    for (const auto& g : groups) {
      if (g.behavior_stamp != stamp) {
        throw ContractViolation("rollout group was not generated by the given behavior snapshot");
      }
    }
  }
  const double n = static_cast<double>(groups.size());
  std::vector<GroupPass> parts(groups.size());
  parallel_for(groups.size(), [&](std::size_t k) {
    parts[k] = run_group(groups[k], params, clip, srpo_scale, resp_scale, n, keep_terms);
  });
  for (const auto& p : parts) {
    out.srpo += p.srpo;
    out.resp += p.resp;
    for (std::size_t j = 0; j < out.grad.size(); ++j) out.grad[j] += p.grad[j];
    out.ratios.insert(out.ratios.end(), p.ratios.begin(), p.ratios.end());
    out.values.insert(out.values.end(), p.values.begin(), p.values.end());
  }
  out.srpo /= n;
  out.resp /= n;
  return out;
}

}  // namespace

SurrogateTerms srpo_objective(std::span<const rollout::GroupRollout> groups,
                              const policy::PolicyParams& params,
                              const policy::PolicyParams& behavior, const ClipConfig& clip) {
  BatchPass b = run_batch(groups, params, &behavior, clip, 1.0, 0.0, true);
  return SurrogateTerms{std::move(b.ratios), std::move(b.values), b.srpo, std::move(b.grad)};
}

UncertaintyTerms resp_uncertainty(std::span<const rollout::GroupRollout> groups,
                                  const policy::PolicyParams& params) {
  // d(-log pi)/d theta = -(d log pi / d theta).
  BatchPass b = run_batch(groups, params, nullptr, ClipConfig{}, 0.0, -1.0, false);
  return UncertaintyTerms{b.resp, std::move(b.grad)};
}

double total_objective(double j_srpo, double j_resp, double eta) {
  require(eta >= 0.0, "total_objective: eta must be non-negative");
  return j_srpo - eta * j_resp;
}

TotalTerms total_objective(const SurrogateTerms& srpo, const UncertaintyTerms& resp, double eta) {
  require(srpo.grad.size() == resp.grad.size(), "total_objective: gradient length mismatch");
  TotalTerms out;
  out.j_srpo = srpo.objective;
  out.j_resp = resp.value;
  out.j_total = total_objective(srpo.objective, resp.value, eta);
  out.grad.resize(srpo.grad.size());
  for (std::size_t j = 0; j < out.grad.size(); ++j) out.grad[j] = srpo.grad[j] - eta * resp.grad[j];
  return out;
}

TotalTerms evaluate_total(std::span<const rollout::GroupRollout> groups,
                          const policy::PolicyParams& params,
                          const policy::PolicyParams& behavior, const ClipConfig& clip,
                          double eta) {
  require(eta >= 0.0, "evaluate_total: eta must be non-negative");
  BatchPass b = run_batch(groups, params, &behavior, clip, 1.0, eta, false);
  TotalTerms out;
  out.j_srpo = b.srpo;
  out.j_resp = b.resp;
  out.j_total = total_objective(b.srpo, b.resp, eta);
  out.grad = std::move(b.grad);
  return out;
}

OptimizerState make_optimizer_state(std::size_t n, const OptimizerConfig& cfg) {
  cfg.validate();
  return OptimizerState{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0, cfg};
}

void apply_update(policy::PolicyParams& params, std::span<const double> ascent_grad,
                  OptimizerState& state) {
  require(ascent_grad.size() == params.size() && state.m.size() == params.size() &&
              state.v.size() == params.size(),
          "apply_update: length mismatch");
  for (double g : ascent_grad) {
    if (!std::isfinite(g)) throw NumericError("non-finite gradient; update aborted");
  }
  const auto& h = state.hyper;
  state.step += 1;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  auto theta = params.theta();
  for (std::size_t j = 0; j < theta.size(); ++j) {
    const double g = ascent_grad[j];
    state.m[j] = h.beta1 * state.m[j] + (1.0 - h.beta1) * g;
    state.v[j] = h.beta2 * state.v[j] + (1.0 - h.beta2) * g * g;
    const double m_hat = state.m[j] / bc1;
    const double v_hat = state.v[j] / bc2;
    theta[j] += h.lr * m_hat / (std::sqrt(v_hat) + h.eps) - h.lr * h.weight_decay * theta[j];
  }
}

}  // namespace srpo::optimize
