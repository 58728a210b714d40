// Copyright 2026 The SRPO Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "srpo/evaldiag.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <string>

#include "json.hpp"
#include "srpo/parallel.hpp"
#include "srpo/vocab.hpp"

namespace srpo::evaldiag {

std::string_view condition_name(Condition c) {
  switch (c) {
    case Condition::kOriginal: return "ORIGINAL";
    case Condition::kMasked: return "MASKED";
    case Condition::kMismatched: return "MISMATCHED";
    case Condition::kBlind: return "BLIND";
  }
  return "?";
}

Condition condition_from_name(std::string_view name) {
  for (Condition c : kAllConditions) {
    if (condition_name(c) == name) return c;
  }
  throw ConfigError("conditions", "unknown condition '" + std::string(name) + "'");
}

Seed eval_task_seed(Seed master, std::uint64_t index) {
  return derive_seed(master, Stream::kEval, {index}) | (1ULL << 63);
}

namespace {

bool answered_correctly(std::span<const TokenId> tokens, const synthgen::TaskInstance& key) {
  const auto parsed = rollout::make_structured(std::vector<TokenId>(tokens.begin(), tokens.end()));
  return synthgen::verify(parsed, key, 0.0, 1.0).r_acc > 0.0;
}

bool run_condition(const policy::PolicyParams& params, const synthgen::TaskInstance& task,
                   Condition c, Seed master, std::uint64_t index, const EvalConfig& cfg) {
  policy::Prompt prompt = policy::make_prompt(task);
  policy::Variant variant = policy::Variant::kFull;
  switch (c) {
    case Condition::kOriginal: break;
    case Condition::kMasked:
      prompt.image = synthgen::corrupt_image(task.image, cfg.p_mask,
                                             derive_seed(master, Stream::kMask, {index, ~0ULL}));
      break;
    case Condition::kMismatched:
      prompt = policy::make_prompt(synthgen::mismatch_image(
          task, derive_seed(master, Stream::kMismatch, {index}), cfg.task.max_digit));
      break;
    case Condition::kBlind: variant = policy::Variant::kBlind; break;
  }
  const auto out = policy::decode_greedy(params, prompt, cfg.max_len, variant);
  return answered_correctly(out.tokens, task);
}

}  // namespace

std::vector<ConditionReport> evaluate_conditions(const policy::PolicyParams& params, Seed master,
                                                 std::uint64_t first, int n_tasks,
                                                 std::span<const Condition> conditions,
                                                 const EvalConfig& cfg) {
  require(n_tasks >= 1, "evaluate_conditions: need at least one task");
  std::vector<Condition> all{Condition::kOriginal};
  for (Condition c : conditions) {
    if (std::find(all.begin(), all.end(), c) == all.end()) all.push_back(c);
  }
  // hits[task * |all| + condition]
  std::vector<char> hits(static_cast<std::size_t>(n_tasks) * all.size(), 0);
  parallel_for(n_tasks, [&](std::size_t t) {
    const std::uint64_t index = first + t;
    const auto task = synthgen::generate_task(eval_task_seed(master, index), cfg.task);
    for (std::size_t k = 0; k < all.size(); ++k) {
      hits[t * all.size() + k] = run_condition(params, task, all[k], master, index, cfg) ? 1 : 0;
    }
  });
  std::vector<double> acc(all.size(), 0.0);
  for (std::size_t k = 0; k < all.size(); ++k) {
    int correct = 0;
    for (int t = 0; t < n_tasks; ++t) correct += hits[t * all.size() + k];
    acc[k] = static_cast<double>(correct) / n_tasks;
  }
  std::vector<ConditionReport> out;
  for (Condition c : conditions) {
    const auto k = static_cast<std::size_t>(std::find(all.begin(), all.end(), c) - all.begin());
    out.push_back(ConditionReport{c, n_tasks, acc[k], acc[k] - acc[0]});
  }
  return out;
}

double greedy_accuracy(const policy::PolicyParams& params,
                       std::span<const synthgen::TaskInstance> tasks, int max_len,
                       policy::Variant variant) {
  require(!tasks.empty(), "greedy_accuracy: no tasks");
  std::vector<char> hits(tasks.size(), 0);
  parallel_for(tasks.size(), [&](std::size_t t) {
    const auto out = policy::decode_greedy(params, policy::make_prompt(tasks[t]), max_len, variant);
    hits[t] = answered_correctly(out.tokens, tasks[t]) ? 1 : 0;
  });
  int correct = 0;
  for (char h : hits) correct += h;
  return static_cast<double>(correct) / static_cast<double>(tasks.size());
}

double pass_at_k_estimate(int n, int c, int k) {
  require(n >= 1 && c >= 0 && c <= n, "pass_at_k_estimate: need 0 <= c <= n, n >= 1");
  require(k >= 1, "pass_at_k_estimate: k must be positive");
  if (k > n) throw ContractViolation("pass_at_k_estimate: k exceeds the number of samples");
  if (n - c < k) return 1.0;
  // C(n-c, k) / C(n, k) = prod_{i = n-c+1}^{n} (1 - k / i)
  double miss = 1.0;
  for (int i = n - c + 1; i <= n; ++i) miss *= 1.0 - static_cast<double>(k) / i;
  return 1.0 - miss;
}

PassAtKReport pass_at_k(const policy::PolicyParams& params,
                        std::span<const synthgen::TaskInstance> tasks, int n,
                        std::span<const int> ks, double top_p, int max_len, Seed seed) {
  require(!tasks.empty(), "pass_at_k: no tasks");
  require(!ks.empty(), "pass_at_k: no k values");
  for (int k : ks) {
    if (k < 1 || k > n) throw ContractViolation("pass_at_k: every k must lie in [1, n]");
  }
  std::vector<int> correct(tasks.size(), 0);
  parallel_for(tasks.size(), [&](std::size_t t) {
    const auto prompt = policy::make_prompt(tasks[t]);
    for (int s = 0; s < n; ++s) {
      const auto out = policy::sample_response(
          params, prompt,
          derive_seed(seed, Stream::kPassAtK, {tasks[t].task_id, static_cast<std::uint64_t>(s)}),
          top_p, max_len);
      if (answered_correctly(out.tokens, tasks[t])) ++correct[t];
    }
  });
  PassAtKReport r;
  r.ks.assign(ks.begin(), ks.end());
  r.n = n;
  r.n_tasks = static_cast<int>(tasks.size());
  for (int k : ks) {
    double sum = 0.0;
    for (int c : correct) sum += pass_at_k_estimate(n, c, k);
    r.estimates.push_back(sum / static_cast<double>(tasks.size()));
  }
  return r;
}

DiagnosedTrajectory diagnose_credits(const policy::PolicyParams& params,
                                     const synthgen::TaskInstance& task, Seed seed, int G,
                                     const rollout::SamplingConfig& sampling,
                                     const credit::ModulationConfig& modulation,
                                     const credit::CreditSwitches& switches, int member) {
  require(member >= 0 && member < G, "diagnose_credits: member index outside the group");
  std::vector<Seed> seeds(G);
  for (int i = 0; i < G; ++i) {
    seeds[i] = derive_seed(seed, Stream::kDiagnose, {task.task_id, static_cast<std::uint64_t>(i)});
  }
  const auto group = rollout::generate_group(params, task, G, seeds, sampling);
  const auto& resp = group.responses[member];
  DiagnosedTrajectory d;
  d.task = task;
  d.member_index = member;
  d.tokens = resp.tokens;
  d.reward = group.rewards[member];
  d.advantage = group.advantages[member];
  d.credits = credit::assign_trajectory_credit(
      params, group.prompt, resp.tokens, resp.logp_full, resp.layout, d.advantage, modulation,
      switches,
      derive_seed(seed, Stream::kDiagnose, {task.task_id, static_cast<std::uint64_t>(member), 1}));
  return d;
}

void render_text(std::ostream& out, const DiagnosedTrajectory& d) {
  char line[160];
  out << "task " << to_hex(d.task.task_id) << "  " << synthgen::kind_name(d.task.question.kind)
      << ' ' << d.task.question.arg << "  answer " << d.task.answer << '\n';
  for (int r = 0; r < d.task.image.rows(); ++r) {
    out << "  ";
    for (int c = 0; c < d.task.image.cols(); ++c) out << d.task.image.value(r, c) << ' ';
    out << '\n';
  }
  std::snprintf(line, sizeof line, "member %d  reward %.3f (fmt %.1f, acc %.1f)  advantage %+.4f\n",
                d.member_index, d.reward.total, d.reward.r_fmt, d.reward.r_acc, d.advantage);
  out << line;
  out << " pos  token     role         delta      r        w      A~\n";
  for (const auto& c : d.credits) {
    std::snprintf(line, sizeof line, "%4d  %-8s  %-10s  %+8.4f  %7.4f  %6.3f  %+8.4f\n",
                  c.position, Vocabulary::name(d.tokens[c.position]).c_str(),
                  std::string(credit::role_name(c.role)).c_str(), c.delta, c.raw_score, c.weight,
                  c.token_advantage);
    out << line;
  }
}

void write_condition_records(std::ostream& out, std::span<const ConditionReport> reports) {
  for (const auto& r : reports) {
    nlohmann::ordered_json j;
    j["condition"] = condition_name(r.condition);
    j["n_tasks"] = r.n_tasks;
    j["accuracy"] = r.accuracy;
    j["delta_vs_original"] = r.delta_vs_original;
    out << j.dump() << '\n';
  }
}

void write_condition_table(std::ostream& out, std::span<const ConditionReport> reports) {
  char line[128];
  out << "condition     tasks  accuracy  delta\n";
  for (const auto& r : reports) {
    std::snprintf(line, sizeof line, "%-12s  %5d  %8.4f  %+.4f\n",
                  std::string(condition_name(r.condition)).c_str(), r.n_tasks, r.accuracy,
                  r.delta_vs_original);
    out << line;
  }
}

void write_pass_at_k(std::ostream& out, const PassAtKReport& report) {
  nlohmann::ordered_json j;
  j["n"] = report.n;
  j["n_tasks"] = report.n_tasks;
  j["ks"] = report.ks;
  j["estimates"] = report.estimates;
  out << j.dump() << '\n';
}

}  // namespace srpo::evaldiag
