// Copyright 2026 The SRPO Lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Training configuration, the rollout/credit/update loop, per-step metrics,
// checkpoint cadence and resume.

#ifndef SRPO_TRAINER_HPP_
#define SRPO_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "srpo/checkpoint.hpp"
#include "srpo/credit.hpp"
#include "srpo/optimize.hpp"
#include "srpo/policy.hpp"
#include "srpo/rollout.hpp"
#include "srpo/synthgen.hpp"

namespace srpo::trainer {

enum class Algorithm { kSrpo, kGrpo };

struct PolicyConfig {
  int embed_dim = 16;
  int hidden_dim = 32;
  double init_scale = 0.05;
};

struct SamplingOptions {
  double top_p = 0.99;
  int max_len = 24;
};

struct RewardConfig {
  double lambda_fmt = 0.1;
  double lambda_acc = 0.9;
};

struct AblationConfig {
  bool disable_perception_credit = false;
  bool disable_reasoning_credit = false;
  bool disable_unified_modulation = false;
  bool online_filtering = true;
};

/// Supervised pass on grammatical templates run before the first step, so a
/// freshly initialized policy emits parseable responses.
struct WarmstartConfig {
  int steps = 0;
  int batch = 32;
  double lr = 1e-2;
};

struct OutputConfig {
  std::string dir = "run";
  int checkpoint_every = 100;
  int credit_dump_every = 0;   ///< 0 disables
  int rollout_dump_every = 0;  ///< 0 disables
  bool record_wall_time = false;
};

struct TrainConfig {
  Seed master_seed = 0;
  int total_steps = 2000;
  int tasks_per_step = 16;
  int G = 8;
  Algorithm algorithm = Algorithm::kSrpo;
  synthgen::TaskShapeConfig task;
  PolicyConfig policy;
  SamplingOptions sampling;
  RewardConfig reward;
  credit::ModulationConfig modulation;
  optimize::ClipConfig clip;
  double eta = 0.03;
  optimize::OptimizerConfig optimizer;
  AblationConfig ablation;
  WarmstartConfig warmstart;
  OutputConfig output;

  void validate() const;
  policy::Dims dims() const;
  rollout::SamplingConfig sampling_config() const;
  credit::CreditSwitches switches() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Missing keys keep their defaults; unknown keys and bad values raise
/// ConfigError naming the key path.
TrainConfig config_from_json(const nlohmann::json& j);
TrainConfig load_config(const std::string& path);
/// Hash of every setting that shapes the trajectory. Step budget and output
/// options are excluded so a run can be extended or relocated.
std::uint64_t config_hash(const TrainConfig& cfg);

struct WeightStats {
  double mean = 1.0;
  double min = 1.0;
  double max = 1.0;
  double fraction_clipped = 0.0;
};

struct StepMetrics {
  std::int64_t step = 0;
  double mean_reward = 0.0;
  double mean_acc_reward = 0.0;
  double mean_fmt_reward = 0.0;
  double fraction_filtered = 0.0;
  double mean_abs_advantage = 0.0;
  WeightStats weights;
  double j_srpo = 0.0;
  double j_resp = 0.0;
  double j_total = 0.0;
  double grad_norm = 0.0;
  std::optional<double> wall_time;
};

std::string to_json_line(const StepMetrics& m);
StepMetrics metrics_from_json(const nlohmann::json& j);
std::vector<StepMetrics> read_metrics(const std::string& path);

/// Training task seeds; the top bit is always clear.
Seed train_task_seed(Seed master, std::int64_t step, int index);

/// Deterministic supervised warm start; returns the mean token NLL of the
/// last warm-start batch.
double run_warmstart(policy::PolicyParams& params, const TrainConfig& cfg);

struct TrainResult {
  policy::PolicyParams params;
  optimize::OptimizerState optimizer;
  std::vector<StepMetrics> metrics;  ///< steps run by this call
  std::int64_t last_step = 0;
};

class Trainer {
 public:
  /// Fresh run: init, optional warm start, step 0.
  explicit Trainer(TrainConfig cfg);
  /// Continue from a checkpoint. The stored configuration must hash equal to
  /// `cfg`; otherwise IntegrityError lists the differing keys.
  Trainer(TrainConfig cfg, const Checkpoint& ckpt);

  /// Executes the next step and returns its metrics.
  StepMetrics step();
  /// Runs to total_steps, writing metrics, dumps and checkpoints under
  /// output.dir. `on_step` is invoked after each step.
  TrainResult run(const std::function<void(const StepMetrics&)>& on_step = {});

  const policy::PolicyParams& params() const { return params_; }
  const optimize::OptimizerState& optimizer() const { return opt_; }
  std::int64_t current_step() const { return step_; }
  const TrainConfig& config() const { return cfg_; }

  Checkpoint make_checkpoint() const;
  std::string checkpoint_path(std::int64_t step) const;
  std::string metrics_path() const;

 private:
  void dump_step(std::int64_t step, const std::vector<rollout::GroupRollout>& groups) const;

  TrainConfig cfg_;
  policy::PolicyParams params_;
  optimize::OptimizerState opt_;
  std::int64_t step_ = 0;
  bool resumed_ = false;
};

/// Convenience wrappers used by the command-line tool.
TrainResult run_training(const TrainConfig& cfg,
                         const std::function<void(const StepMetrics&)>& on_step = {});
TrainResult resume_training(const TrainConfig& cfg, const std::string& checkpoint_path,
                            const std::function<void(const StepMetrics&)>& on_step = {});

/// Keys whose values differ between two configuration objects, as dotted paths.
std::vector<std::string> config_diff(const nlohmann::json& a, const nlohmann::json& b);

}  // namespace srpo::trainer

#endif  // SRPO_TRAINER_HPP_
