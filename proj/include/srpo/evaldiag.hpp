// Copyright 2026 The SRPO Lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Greedy evaluation under controlled visual conditions, pass@k estimation and
// per-token credit inspection.

#ifndef SRPO_EVALDIAG_HPP_
#define SRPO_EVALDIAG_HPP_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "srpo/credit.hpp"
#include "srpo/policy.hpp"
#include "srpo/rollout.hpp"
#include "srpo/synthgen.hpp"

namespace srpo::evaldiag {

enum class Condition { kOriginal, kMasked, kMismatched, kBlind };
std::string_view condition_name(Condition c);
Condition condition_from_name(std::string_view name);
inline constexpr Condition kAllConditions[] = {Condition::kOriginal, Condition::kMasked,
                                               Condition::kMismatched, Condition::kBlind};

struct ConditionReport {
  Condition condition = Condition::kOriginal;
  int n_tasks = 0;
  double accuracy = 0.0;
  double delta_vs_original = 0.0;
};

struct EvalConfig {
  synthgen::TaskShapeConfig task;
  int max_len = 24;
  double p_mask = 0.5;
};

/// Evaluation task seeds. Training seeds never have the top bit set.
Seed eval_task_seed(Seed master, std::uint64_t index);

/// Greedy decoding on tasks eval_task_seed(master, i), i in [first, first + n).
/// Every condition is scored against the original answer.
std::vector<ConditionReport> evaluate_conditions(const policy::PolicyParams& params, Seed master,
                                                 std::uint64_t first, int n_tasks,
                                                 std::span<const Condition> conditions,
                                                 const EvalConfig& cfg);

/// Fraction of tasks answered correctly by greedy decoding, for explicit tasks.
double greedy_accuracy(const policy::PolicyParams& params,
                       std::span<const synthgen::TaskInstance> tasks, int max_len,
                       policy::Variant variant = policy::Variant::kFull);

struct PassAtKReport {
  std::vector<int> ks;
  std::vector<double> estimates;
  int n = 0;
  int n_tasks = 0;
};

/// 1 - C(n - c, k) / C(n, k).
double pass_at_k_estimate(int n, int c, int k);

PassAtKReport pass_at_k(const policy::PolicyParams& params,
                        std::span<const synthgen::TaskInstance> tasks, int n,
                        std::span<const int> ks, double top_p, int max_len, Seed seed);

struct DiagnosedTrajectory {
  synthgen::TaskInstance task;
  int member_index = 0;
  std::vector<TokenId> tokens;
  synthgen::RewardBreakdown reward;
  double advantage = 0.0;
  std::vector<credit::TokenCredit> credits;
};

/// Samples one group for the task (so the advantage is defined) and assigns
/// credit to member `member`.
DiagnosedTrajectory diagnose_credits(const policy::PolicyParams& params,
                                     const synthgen::TaskInstance& task, Seed seed, int G,
                                     const rollout::SamplingConfig& sampling,
                                     const credit::ModulationConfig& modulation,
                                     const credit::CreditSwitches& switches = {}, int member = 0);

void render_text(std::ostream& out, const DiagnosedTrajectory& d);
void write_condition_records(std::ostream& out, std::span<const ConditionReport> reports);
void write_condition_table(std::ostream& out, std::span<const ConditionReport> reports);
void write_pass_at_k(std::ostream& out, const PassAtKReport& report);

}  // namespace srpo::evaldiag

#endif  // SRPO_EVALDIAG_HPP_
