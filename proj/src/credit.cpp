// Copyright 2026 The SRPO Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "srpo/credit.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "json.hpp"

namespace srpo::credit {

std::string_view role_name(Role r) {
  switch (r) {
    case Role::kPerception: return "PERCEPTION";
    case Role::kReasoning: return "REASONING";
    case Role::kNeutral: return "NEUTRAL";
  }
  return "?";
}

void ModulationConfig::validate() const {
  if (!(lambda_mod >= 0.0)) throw ConfigError("modulation.lambda_mod", "must be >= 0");
  if (!(m_min > 0.0)) throw ConfigError("modulation.m_min", "must be > 0");
  if (!(m_min <= 1.0)) throw ConfigError("modulation.m_min", "must be <= 1");
  if (!(m_max >= 1.0)) throw ConfigError("modulation.m_max", "must be >= 1");
  if (!(eps_norm > 0.0)) throw ConfigError("modulation.eps_norm", "must be > 0");
  if (!(p_mask >= 0.0 && p_mask <= 1.0)) throw ConfigError("modulation.p_mask", "must lie in [0, 1]");
}

std::vector<double> group_advantages(std::span<const double> rewards, double eps_norm) {
  const std::size_t G = rewards.size();
  require(G >= 2, "group_advantages: group size must be at least 2");
  require(eps_norm > 0.0, "group_advantages: eps_norm must be positive");
  std::vector<double> adv(G, 0.0);
  if (std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards[0]; })) {
    return adv;
  }
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(G);
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(G);
  const double denom = std::sqrt(var) + eps_norm;
  for (std::size_t i = 0; i < G; ++i) adv[i] = (rewards[i] - mean) / denom;
  return adv;
}

namespace {

std::vector<double> difference(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "contrast: length mismatch");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return d;
}

}  // namespace

std::vector<double> perception_contrast(std::span<const double> logp_full,
                                        std::span<const double> logp_masked) {
  return difference(logp_full, logp_masked);
}

std::vector<double> reasoning_contrast(std::span<const double> logp_full,
                                       std::span<const double> logp_ablated) {
  return difference(logp_full, logp_ablated);
}

int advantage_sign(double advantage) { return (advantage > 0.0) - (advantage < 0.0); }

std::vector<double> role_scores(std::span<const double> delta, int sign) {
  require(sign >= -1 && sign <= 1, "role_scores: sign must be -1, 0 or +1");
  std::vector<double> r(delta.size());
  for (std::size_t i = 0; i < delta.size(); ++i) {
    const double x = std::clamp(static_cast<double>(sign) * delta[i], -kScoreClamp, kScoreClamp);
    r[i] = std::exp(x);
  }
  return r;
}

std::vector<double> unified_modulation(std::span<const double> scores,
                                       const ModulationConfig& cfg) {
  std::vector<double> w(scores.size());
  if (scores.empty()) return w;
  double baseline = 0.0;
  for (double r : scores) baseline += r;
  baseline /= static_cast<double>(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    w[i] = std::clamp(1.0 + cfg.lambda_mod * (scores[i] - baseline), cfg.m_min, cfg.m_max);
  }
  return w;
}

std::vector<double> token_advantages(double advantage, const SpanLayout& layout,
                                     std::span<const double> weights, int length) {
  require(static_cast<int>(weights.size()) == layout.valid_size(),
          "token_advantages: weights must cover the valid set");
  std::vector<double> out(length, advantage);
  int k = 0;
  for (int t : layout.valid_positions()) {
    require(t < length, "token_advantages: valid position beyond response length");
    out[t] = advantage * weights[k++];
  }
  return out;
}

std::vector<TokenCredit> uniform_credit(const SpanLayout& layout, double advantage, int length) {
  std::vector<TokenCredit> out(length);
  for (int t = 0; t < length; ++t) {
    out[t].position = t;
    out[t].role = layout.in_perception(t)  ? Role::kPerception
                  : layout.in_reasoning(t) ? Role::kReasoning
                                           : Role::kNeutral;
    out[t].token_advantage = advantage;
  }
  return out;
}

std::vector<TokenCredit> assign_trajectory_credit(const policy::PolicyParams& behavior,
                                                  const policy::Prompt& prompt,
                                                  std::span<const TokenId> tokens,
                                                  std::span<const double> logp_full,
                                                  const SpanLayout& layout, double advantage,
                                                  const ModulationConfig& cfg,
                                                  const CreditSwitches& switches, Seed mask_seed) {
  const int n = static_cast<int>(tokens.size());
  require(static_cast<int>(logp_full.size()) == n, "assign_trajectory_credit: logp length mismatch");
  std::vector<TokenCredit> out = uniform_credit(layout, advantage, n);
  if (!layout.parse_ok || layout.valid_size() == 0) return out;

  const policy::RescoreSpec spec{cfg.p_mask, mask_seed};
  if (switches.perception && layout.perc_size() > 0) {
    const auto masked = policy::score_sequence(behavior, prompt, tokens,
                                               policy::Variant::kMaskedImage, layout, spec);
    const auto b = static_cast<std::size_t>(layout.perc_begin);
    const auto m = static_cast<std::size_t>(layout.perc_size());
    const auto delta = perception_contrast(logp_full.subspan(b, m),
                                           std::span<const double>(masked.logp).subspan(b, m));
    for (std::size_t i = 0; i < m; ++i) out[b + i].delta = delta[i];
  }
  if (switches.reasoning && layout.reas_size() > 0) {
    const auto ablated = policy::score_sequence(behavior, prompt, tokens,
                                                policy::Variant::kNoPerception, layout, spec);
    const auto b = static_cast<std::size_t>(layout.reas_begin);
    const auto m = static_cast<std::size_t>(layout.reas_size());
    const auto delta = reasoning_contrast(logp_full.subspan(b, m),
                                          std::span<const double>(ablated.logp).subspan(b, m));
    for (std::size_t i = 0; i < m; ++i) out[b + i].delta = delta[i];
  }

  const auto valid = layout.valid_positions();
  std::vector<double> delta(valid.size());
  for (std::size_t k = 0; k < valid.size(); ++k) delta[k] = out[valid[k]].delta;
  const auto scores = role_scores(delta, advantage_sign(advantage));

  std::vector<double> weights(valid.size(), 1.0);
  std::vector<bool> clipped(valid.size(), false);
  if (!switches.unified_modulation) {
    for (std::size_t k = 0; k < valid.size(); ++k) {
      weights[k] = std::clamp(scores[k], cfg.m_min, cfg.m_max);
      clipped[k] = scores[k] < cfg.m_min || scores[k] > cfg.m_max;
    }
  } else if (cfg.lambda_mod != 0.0) {
    weights = unified_modulation(scores, cfg);
    double baseline = 0.0;
    for (double r : scores) baseline += r;
    baseline /= static_cast<double>(scores.size());
    for (std::size_t k = 0; k < valid.size(); ++k) {
      const double pre = 1.0 + cfg.lambda_mod * (scores[k] - baseline);
      clipped[k] = pre < cfg.m_min || pre > cfg.m_max;
    }
  }
  // lambda_mod == 0 keeps every weight at exactly 1.

  for (std::size_t k = 0; k < valid.size(); ++k) {
    TokenCredit& c = out[valid[k]];
    c.raw_score = scores[k];
    c.weight = weights[k];
    c.clipped = clipped[k];
    c.token_advantage = advantage * weights[k];
  }
  return out;
}

void write_credit_dump(std::ostream& out, std::uint64_t task_id, int member_index,
                       std::span<const TokenCredit> credits) {
  for (const auto& c : credits) {
    nlohmann::ordered_json j;
    j["task_id"] = task_id;
    j["member_index"] = member_index;
    j["position"] = c.position;
    j["role"] = role_name(c.role);
    j["delta"] = c.delta;
    j["raw_score"] = c.raw_score;
    j["weight"] = c.weight;
    j["token_advantage"] = c.token_advantage;
    out << j.dump() << '\n';
  }
}

}  // namespace srpo::credit
