// Copyright 2026 The SRPO Lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// srpo_lab: train, eval, diagnose and plot.
//
// Exit codes: 0 success, 1 unexpected failure, 2 bad arguments, configuration
// or checkpoint, 3 numeric abort.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "srpo/checkpoint.hpp"
#include "srpo/common.hpp"
#include "srpo/evaldiag.hpp"
#include "srpo/plot.hpp"
#include "srpo/trainer.hpp"

namespace {

using namespace srpo;

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

struct Loaded {
  Checkpoint ckpt;
  trainer::TrainConfig cfg;
};

Loaded load_for_inference(const std::string& path) {
  Loaded l{load_checkpoint(path), {}};
  l.cfg = trainer::config_from_json(l.ckpt.config);
  return l;
}

struct TrainArgs {
  std::string config;
  std::string resume;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int cmd_train(const TrainArgs& a) {
  trainer::TrainConfig cfg = trainer::load_config(a.config);
  if (a.seed) cfg.master_seed = *a.seed;
  if (!a.out.empty()) cfg.output.dir = a.out;
  auto progress = [&](const trainer::StepMetrics& m) {
    if (m.step % 100 == 0) {
      std::printf("step %lld  reward %.4f  acc %.4f  fmt %.4f  filtered %.3f  loss %.5f\n",
                  static_cast<long long>(m.step), m.mean_reward, m.mean_acc_reward,
                  m.mean_fmt_reward, m.fraction_filtered, -m.j_total);
      std::fflush(stdout);
    }
  };
  const auto result = a.resume.empty() ? trainer::run_training(cfg, progress)
                                       : trainer::resume_training(cfg, a.resume, progress);
  const double final_acc = result.metrics.empty() ? 0.0 : result.metrics.back().mean_acc_reward;
  std::printf("final step %lld mean_acc_reward %.6f\n", static_cast<long long>(result.last_step),
              final_acc);
  return 0;
}

struct EvalArgs {
  std::string ckpt;
  std::string conditions;
  std::string pass_at_k;
  int n_samples = 8;
  int n_tasks = 200;
  std::string out;
};

int cmd_eval(const EvalArgs& a) {
  if (a.conditions.empty() == a.pass_at_k.empty()) {
    throw ConfigError("eval", "give exactly one of --conditions or --pass-at-k");
  }
  if (a.n_tasks < 1) throw ConfigError("--n-tasks", "must be >= 1");
  std::vector<int> ks;
  std::vector<evaldiag::Condition> conditions;
  if (!a.pass_at_k.empty()) {
    for (const auto& k : split_csv(a.pass_at_k)) {
      int v = 0;
      try {
        v = std::stoi(k);
      } catch (const std::exception&) {
        throw ConfigError("--pass-at-k", "not an integer: " + k);
      }
      if (v < 1 || v > a.n_samples) {
        throw ConfigError("--pass-at-k", "k = " + k + " must lie in [1, --n-samples]");
      }
      ks.push_back(v);
    }
  } else {
    for (const auto& name : split_csv(a.conditions)) {
      try {
        conditions.push_back(evaldiag::condition_from_name(upper(name)));
      } catch (const ConfigError&) {
        throw ConfigError("--conditions", "unknown condition '" + name +
                                              "'; valid: original, masked, mismatched, blind");
      }
    }
  }

  const Loaded l = load_for_inference(a.ckpt);
  const auto& cfg = l.cfg;
  std::string out_path = a.out;
  if (!ks.empty()) {
    std::vector<synthgen::TaskInstance> tasks;
    for (int i = 0; i < a.n_tasks; ++i) {
      tasks.push_back(synthgen::generate_task(
          evaldiag::eval_task_seed(cfg.master_seed, static_cast<std::uint64_t>(i)), cfg.task));
    }
    const auto report = evaldiag::pass_at_k(l.ckpt.params, tasks, a.n_samples, ks,
                                            cfg.sampling.top_p, cfg.sampling.max_len,
                                            cfg.master_seed);
    std::printf("k     pass@k   (n=%d, tasks=%d)\n", report.n, report.n_tasks);
    for (std::size_t i = 0; i < report.ks.size(); ++i) {
      std::printf("%-4d  %.4f\n", report.ks[i], report.estimates[i]);
    }
    if (out_path.empty()) out_path = a.ckpt + ".pass_at_k.jsonl";
    std::ofstream f(out_path);
    evaldiag::write_pass_at_k(f, report);
  } else {
    evaldiag::EvalConfig ec{cfg.task, cfg.sampling.max_len, cfg.modulation.p_mask};
    const auto reports =
        evaldiag::evaluate_conditions(l.ckpt.params, cfg.master_seed, 0, a.n_tasks, conditions, ec);
    evaldiag::write_condition_table(std::cout, reports);
    if (out_path.empty()) out_path = a.ckpt + ".conditions.jsonl";
    std::ofstream f(out_path);
    evaldiag::write_condition_records(f, reports);
  }
  return 0;
}

struct DiagnoseArgs {
  std::string ckpt;
  std::uint64_t task_seed = 0;
  int member = 0;
  bool json = false;
};

int cmd_diagnose(const DiagnoseArgs& a) {
  const Loaded l = load_for_inference(a.ckpt);
  const auto& cfg = l.cfg;
  if (a.member < 0 || a.member >= cfg.G) throw ConfigError("--member", "outside the group");
  const auto task = synthgen::generate_task(a.task_seed, cfg.task);
  const auto d = evaldiag::diagnose_credits(l.ckpt.params, task, a.task_seed, cfg.G,
                                            cfg.sampling_config(), cfg.modulation, cfg.switches(),
                                            a.member);
  if (a.json) {
    credit::write_credit_dump(std::cout, task.task_id, d.member_index, d.credits);
  } else {
    evaldiag::render_text(std::cout, d);
  }
  return 0;
}

struct PlotArgs {
  std::vector<std::string> metrics;
  std::string field = "mean_acc_reward";
  int window = 20;
  std::string out = "curve.svg";
};

int cmd_plot(const PlotArgs& a) {
  if (a.window < 1) throw ConfigError("--window", "must be >= 1");
  std::vector<plot::Series> series;
  for (const auto& path : a.metrics) series.push_back(plot::load_series(path, a.field));
  std::ofstream f(a.out);
  if (!f) throw ConfigError("--out", "cannot write " + a.out);
  f << plot::render_svg(series, a.window, a.field);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Role-aware credit assignment lab on synthetic grid tasks"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Run training from a configuration file");
  t->add_option("--config", train.config, "Training configuration (JSON)")->required();
  t->add_option("--resume", train.resume, "Checkpoint to continue from");
  t->add_option("--seed", train.seed, "Override master_seed");
  t->add_option("--out", train.out, "Override output.dir");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint");
  e->add_option("--ckpt", eval.ckpt, "Checkpoint file")->required();
  e->add_option("--conditions", eval.conditions,
                "Comma-separated: original,masked,mismatched,blind");
  e->add_option("--pass-at-k", eval.pass_at_k, "Comma-separated k values");
  e->add_option("--n-samples", eval.n_samples, "Samples per task for pass@k");
  e->add_option("--n-tasks", eval.n_tasks, "Number of evaluation tasks");
  e->add_option("--out", eval.out, "Line-delimited report file");

  DiagnoseArgs diag;
  auto* d = app.add_subcommand("diagnose", "Show per-token credit for one sampled response");
  d->add_option("--ckpt", diag.ckpt, "Checkpoint file")->required();
  d->add_option("--task-seed", diag.task_seed, "Task seed")->required();
  d->add_option("--member", diag.member, "Group member to render");
  d->add_flag("--json", diag.json, "One record per token");

  PlotArgs plot_args;
  auto* p = app.add_subcommand("plot", "Render learning curves as SVG");
  p->add_option("--metrics", plot_args.metrics, "Metrics files")->required()->expected(1, -1);
  p->add_option("--field", plot_args.field, "Metric field");
  p->add_option("--window", plot_args.window, "Running-mean window");
  p->add_option("--out", plot_args.out, "Output SVG path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return kExitUsage;
  }

  try {
    if (*t) return cmd_train(train);
    if (*e) return cmd_eval(eval);
    if (*d) return cmd_diagnose(diag);
    if (*p) return cmd_plot(plot_args);
  } catch (const ConfigError& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return kExitUsage;
  } catch (const IntegrityError& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return kExitUsage;
  } catch (const NumericError& ex) {
    std::fprintf(stderr, "numeric error: %s\n", ex.what());
    return kExitNumeric;
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return kExitFailure;
  }
  return kExitFailure;
}
