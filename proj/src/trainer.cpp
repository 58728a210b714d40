// Copyright 2026 The SRPO Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "srpo/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "srpo/parallel.hpp"
#include "srpo/vocab.hpp"

namespace srpo::trainer {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

namespace {

// Reads one JSON object, remembering which keys were consumed so leftovers
// can be reported.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string key_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw ConfigError(key_path(key), "expected a number");
      out = v->get<double>();
    }
  }

  void integer(const std::string& key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) throw ConfigError(key_path(key), "expected an integer");
      const auto x = v->get<std::int64_t>();
      if (x < INT32_MIN || x > INT32_MAX) throw ConfigError(key_path(key), "out of range");
      out = static_cast<int>(x);
    }
  }

  void seed(const std::string& key, Seed& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned()) {
        throw ConfigError(key_path(key), "expected a non-negative integer");
      }
      out = v->get<std::uint64_t>();
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(key_path(key), "expected true or false");
      out = v->get<bool>();
    }
  }

  void string(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw ConfigError(key_path(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  template <typename Fn>
  void object(const std::string& key, Fn&& fn) {
    if (const json* v = find(key)) {
      ObjectReader sub(*v, key_path(key));
      fn(sub);
      sub.finish();
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(key_path(it.key()), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string_view algorithm_name(Algorithm a) { return a == Algorithm::kSrpo ? "srpo" : "grpo"; }

json hashed_view(const TrainConfig& cfg) {
  json j = to_json(cfg);
  j.erase("total_steps");
  j.erase("output");
  return j;
}

}  // namespace

void TrainConfig::validate() const {
  if (total_steps < 1) throw ConfigError("total_steps", "must be >= 1");
  if (tasks_per_step < 1) throw ConfigError("tasks_per_step", "must be >= 1");
  if (G < 2) throw ConfigError("G", "group size must be >= 2");
  try {
    task.validate();
  } catch (const ConfigError& e) {
    throw ConfigError("task." + e.key_path(), e.what());
  }
  if (task.max_answer() > Vocabulary::kNumAnswers - 1) {
    throw ConfigError("task", "largest possible answer exceeds the answer vocabulary");
  }
  if (policy.embed_dim < 1) throw ConfigError("policy.embed_dim", "must be >= 1");
  if (policy.hidden_dim < 1) throw ConfigError("policy.hidden_dim", "must be >= 1");
  if (!(policy.init_scale > 0.0)) throw ConfigError("policy.init_scale", "must be > 0");
  if (!(sampling.top_p > 0.0 && sampling.top_p <= 1.0)) {
    throw ConfigError("sampling.top_p", "must lie in (0, 1]");
  }
  if (sampling.max_len < 7) throw ConfigError("sampling.L_max", "must be >= 7");
  if (!(reward.lambda_fmt >= 0.0)) throw ConfigError("reward.lambda_fmt", "must be >= 0");
  if (!(reward.lambda_acc >= 0.0)) throw ConfigError("reward.lambda_acc", "must be >= 0");
  modulation.validate();
  clip.validate();
  if (!(eta >= 0.0)) throw ConfigError("eta", "must be >= 0");
  optimizer.validate();
  if (warmstart.steps < 0) throw ConfigError("warmstart.steps", "must be >= 0");
  if (warmstart.batch < 1) throw ConfigError("warmstart.batch", "must be >= 1");
  if (!(warmstart.lr > 0.0)) throw ConfigError("warmstart.lr", "must be > 0");
  if (output.checkpoint_every < 0) throw ConfigError("output.checkpoint_every", "must be >= 0");
  if (output.credit_dump_every < 0) throw ConfigError("output.credit_dump_every", "must be >= 0");
  if (output.rollout_dump_every < 0) {
    throw ConfigError("output.rollout_dump_every", "must be >= 0");
  }
}

policy::Dims TrainConfig::dims() const {
  policy::Dims d;
  d.embed_dim = policy.embed_dim;
  d.hidden_dim = policy.hidden_dim;
  d.max_rows = task.max_rows;
  d.max_cols = task.max_cols;
  d.context_len = sampling.max_len;
  return d;
}

rollout::SamplingConfig TrainConfig::sampling_config() const {
  return rollout::SamplingConfig{sampling.top_p, sampling.max_len, reward.lambda_fmt,
                                 reward.lambda_acc, modulation.eps_norm};
}

credit::CreditSwitches TrainConfig::switches() const {
  return credit::CreditSwitches{!ablation.disable_perception_credit,
                                !ablation.disable_reasoning_credit,
                                !ablation.disable_unified_modulation};
}

json to_json(const TrainConfig& c) {
  json kinds = json::array();
  for (auto k : c.task.kinds) kinds.push_back(std::string(synthgen::kind_name(k)));
  return json{
      {"master_seed", c.master_seed},
      {"total_steps", c.total_steps},
      {"tasks_per_step", c.tasks_per_step},
      {"G", c.G},
      {"algorithm", std::string(algorithm_name(c.algorithm))},
      {"task",
       {{"min_rows", c.task.min_rows},
        {"max_rows", c.task.max_rows},
        {"min_cols", c.task.min_cols},
        {"max_cols", c.task.max_cols},
        {"question_kinds", kinds},
        {"max_digit", c.task.max_digit}}},
      {"policy",
       {{"embed_dim", c.policy.embed_dim},
        {"hidden_dim", c.policy.hidden_dim},
        {"init_scale", c.policy.init_scale}}},
      {"sampling", {{"top_p", c.sampling.top_p}, {"L_max", c.sampling.max_len}}},
      {"reward", {{"lambda_fmt", c.reward.lambda_fmt}, {"lambda_acc", c.reward.lambda_acc}}},
      {"modulation",
       {{"lambda_mod", c.modulation.lambda_mod},
        {"m_min", c.modulation.m_min},
        {"m_max", c.modulation.m_max},
        {"eps_norm", c.modulation.eps_norm},
        {"p_mask", c.modulation.p_mask}}},
      {"clip", {{"eps_low", c.clip.eps_low}, {"eps_high", c.clip.eps_high}}},
      {"eta", c.eta},
      {"optimizer",
       {{"lr", c.optimizer.lr},
        {"beta1", c.optimizer.beta1},
        {"beta2", c.optimizer.beta2},
        {"eps", c.optimizer.eps},
        {"weight_decay", c.optimizer.weight_decay},
        {"epochs_per_batch", c.optimizer.epochs_per_batch}}},
      {"ablation",
       {{"disable_perception_credit", c.ablation.disable_perception_credit},
        {"disable_reasoning_credit", c.ablation.disable_reasoning_credit},
        {"disable_unified_modulation", c.ablation.disable_unified_modulation},
        {"online_filtering", c.ablation.online_filtering}}},
      {"warmstart",
       {{"steps", c.warmstart.steps}, {"batch", c.warmstart.batch}, {"lr", c.warmstart.lr}}},
      {"output",
       {{"dir", c.output.dir},
        {"checkpoint_every", c.output.checkpoint_every},
        {"credit_dump_every", c.output.credit_dump_every},
        {"rollout_dump_every", c.output.rollout_dump_every},
        {"record_wall_time", c.output.record_wall_time}}},
  };
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  ObjectReader r(j, "");
  r.seed("master_seed", c.master_seed);
  r.integer("total_steps", c.total_steps);
  r.integer("tasks_per_step", c.tasks_per_step);
  r.integer("G", c.G);
  std::string algo(algorithm_name(c.algorithm));
  r.string("algorithm", algo);
  if (algo == "srpo") {
    c.algorithm = Algorithm::kSrpo;
  } else if (algo == "grpo") {
    c.algorithm = Algorithm::kGrpo;
  } else {
    throw ConfigError("algorithm", "expected \"srpo\" or \"grpo\"");
  }
  r.object("task", [&](ObjectReader& t) {
    t.integer("min_rows", c.task.min_rows);
    t.integer("max_rows", c.task.max_rows);
    t.integer("min_cols", c.task.min_cols);
    t.integer("max_cols", c.task.max_cols);
    t.integer("max_digit", c.task.max_digit);
    if (const json* k = t.find("question_kinds")) {
      if (!k->is_array()) throw ConfigError("task.question_kinds", "expected an array");
      c.task.kinds.clear();
      for (const auto& name : *k) {
        if (!name.is_string()) throw ConfigError("task.question_kinds", "expected kind names");
        try {
          c.task.kinds.push_back(synthgen::kind_from_name(name.get<std::string>()));
        } catch (const ConfigError& e) {
          throw ConfigError("task.question_kinds", e.what());
        }
      }
    }
  });
  r.object("policy", [&](ObjectReader& p) {
    p.integer("embed_dim", c.policy.embed_dim);
    p.integer("hidden_dim", c.policy.hidden_dim);
    p.number("init_scale", c.policy.init_scale);
  });
  r.object("sampling", [&](ObjectReader& s) {
    s.number("top_p", c.sampling.top_p);
    s.integer("L_max", c.sampling.max_len);
  });
  r.object("reward", [&](ObjectReader& s) {
    s.number("lambda_fmt", c.reward.lambda_fmt);
    s.number("lambda_acc", c.reward.lambda_acc);
  });
  r.object("modulation", [&](ObjectReader& m) {
    m.number("lambda_mod", c.modulation.lambda_mod);
    m.number("m_min", c.modulation.m_min);
    m.number("m_max", c.modulation.m_max);
    m.number("eps_norm", c.modulation.eps_norm);
    m.number("p_mask", c.modulation.p_mask);
  });
  r.object("clip", [&](ObjectReader& s) {
    s.number("eps_low", c.clip.eps_low);
    s.number("eps_high", c.clip.eps_high);
  });
  r.number("eta", c.eta);
  r.object("optimizer", [&](ObjectReader& o) {
    o.number("lr", c.optimizer.lr);
    o.number("beta1", c.optimizer.beta1);
    o.number("beta2", c.optimizer.beta2);
    o.number("eps", c.optimizer.eps);
    o.number("weight_decay", c.optimizer.weight_decay);
    o.integer("epochs_per_batch", c.optimizer.epochs_per_batch);
  });
  r.object("ablation", [&](ObjectReader& a) {
    a.boolean("disable_perception_credit", c.ablation.disable_perception_credit);
    a.boolean("disable_reasoning_credit", c.ablation.disable_reasoning_credit);
    a.boolean("disable_unified_modulation", c.ablation.disable_unified_modulation);
    a.boolean("online_filtering", c.ablation.online_filtering);
  });
  r.object("warmstart", [&](ObjectReader& w) {
    w.integer("steps", c.warmstart.steps);
    w.integer("batch", c.warmstart.batch);
    w.number("lr", c.warmstart.lr);
  });
  r.object("output", [&](ObjectReader& o) {
    o.string("dir", c.output.dir);
    o.integer("checkpoint_every", c.output.checkpoint_every);
    o.integer("credit_dump_every", c.output.credit_dump_every);
    o.integer("rollout_dump_every", c.output.rollout_dump_every);
    o.boolean("record_wall_time", c.output.record_wall_time);
  });
  r.finish();
  c.validate();
  return c;
}

TrainConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("", "cannot open config file " + path);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError("", "config is not valid JSON: " + std::string(e.what()));
  }
  return config_from_json(j);
}

std::uint64_t config_hash(const TrainConfig& cfg) {
  Fnv1a h;
  h.update(hashed_view(cfg).dump());
  return h.digest();
}

std::vector<std::string> config_diff(const json& a, const json& b) {
  std::vector<std::string> out;
  std::function<void(const json&, const json&, const std::string&)> walk =
      [&](const json& x, const json& y, const std::string& path) {
        if (x.is_object() && y.is_object()) {
          std::set<std::string> keys;
          for (auto it = x.begin(); it != x.end(); ++it) keys.insert(it.key());
          for (auto it = y.begin(); it != y.end(); ++it) keys.insert(it.key());
          for (const auto& k : keys) {
            const std::string p = path.empty() ? k : path + "." + k;
            if (!x.contains(k) || !y.contains(k)) {
              out.push_back(p);
            } else {
              walk(x.at(k), y.at(k), p);
            }
          }
        } else if (x != y) {
          out.push_back(path);
        }
      };
  walk(a, b, "");
  return out;
}

// ---------------------------------------------------------------------------
// Metrics

std::string to_json_line(const StepMetrics& m) {
  nlohmann::ordered_json j;
  j["step"] = m.step;
  j["mean_reward"] = m.mean_reward;
  j["mean_acc_reward"] = m.mean_acc_reward;
  j["mean_fmt_reward"] = m.mean_fmt_reward;
  j["fraction_filtered"] = m.fraction_filtered;
  j["mean_abs_advantage"] = m.mean_abs_advantage;
  j["weight_stats"] = {{"mean", m.weights.mean},
                       {"min", m.weights.min},
                       {"max", m.weights.max},
                       {"fraction_clipped", m.weights.fraction_clipped}};
  j["J_SRPO"] = m.j_srpo;
  j["J_resp"] = m.j_resp;
  j["J_total"] = m.j_total;
  j["loss"] = -m.j_total;
  j["grad_norm"] = m.grad_norm;
  if (m.wall_time) j["wall_time"] = *m.wall_time;
  return j.dump();
}

StepMetrics metrics_from_json(const json& j) {
  StepMetrics m;
  m.step = j.at("step").get<std::int64_t>();
  m.mean_reward = j.at("mean_reward").get<double>();
  m.mean_acc_reward = j.at("mean_acc_reward").get<double>();
  m.mean_fmt_reward = j.at("mean_fmt_reward").get<double>();
  m.fraction_filtered = j.at("fraction_filtered").get<double>();
  m.mean_abs_advantage = j.at("mean_abs_advantage").get<double>();
  const auto& w = j.at("weight_stats");
  m.weights = WeightStats{w.at("mean").get<double>(), w.at("min").get<double>(),
                          w.at("max").get<double>(), w.at("fraction_clipped").get<double>()};
  m.j_srpo = j.at("J_SRPO").get<double>();
  m.j_resp = j.at("J_resp").get<double>();
  m.j_total = j.at("J_total").get<double>();
  m.grad_norm = j.at("grad_norm").get<double>();
  if (j.contains("wall_time")) m.wall_time = j.at("wall_time").get<double>();
  return m;
}

std::vector<StepMetrics> read_metrics(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open metrics file " + path);
  std::vector<StepMetrics> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(metrics_from_json(json::parse(line)));
    } catch (const json::exception&) {
      // An interrupted writer can leave one partial record at the end.
      if (f.peek() == std::char_traits<char>::eof()) break;
      throw;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Seeds

Seed train_task_seed(Seed master, std::int64_t step, int index) {
  return derive_seed(master, Stream::kTask,
                     {static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(index)}) &
         ~(1ULL << 63);
}

// ---------------------------------------------------------------------------
// Warm start

namespace {

std::vector<TokenId> warmstart_template(Rng& rng, const synthgen::TaskShapeConfig& task) {
  const int max_answer = task.max_answer();
  std::vector<TokenId> seq{Vocabulary::kPercOpen};
  const int np = 1 + rng.below(3);
  for (int k = 0; k < np; ++k) seq.push_back(Vocabulary::digit(rng.below(task.max_digit + 1)));
  seq.push_back(Vocabulary::kPercClose);
  seq.push_back(Vocabulary::kReasOpen);
  const int nr = 1 + rng.below(2);
  for (int k = 0; k < nr; ++k) seq.push_back(Vocabulary::answer(rng.below(max_answer + 1)));
  seq.push_back(Vocabulary::kReasClose);
  seq.push_back(Vocabulary::kAns);
  seq.push_back(Vocabulary::answer(rng.below(max_answer + 1)));
  seq.push_back(Vocabulary::kEos);
  return seq;
}

}  // namespace

double run_warmstart(policy::PolicyParams& params, const TrainConfig& cfg) {
  const auto& ws = cfg.warmstart;
  if (ws.steps == 0) return 0.0;
  optimize::OptimizerConfig hyper;
  hyper.lr = ws.lr;
  auto state = optimize::make_optimizer_state(params.size(), hyper);
  double last_nll = 0.0;
  for (int w = 0; w < ws.steps; ++w) {
    std::vector<std::vector<double>> grads(ws.batch);
    std::vector<double> nll(ws.batch, 0.0);
    parallel_for(ws.batch, [&](std::size_t b) {
      Rng rng(derive_seed(cfg.master_seed, Stream::kWarmstart,
                          {static_cast<std::uint64_t>(w), static_cast<std::uint64_t>(b)}));
      const auto task = synthgen::generate_task(rng.next() & ~(1ULL << 63), cfg.task);
      const auto seq = warmstart_template(rng, cfg.task);
      const auto prompt = policy::make_prompt(task);
      const auto parsed = rollout::make_structured(seq);
      const auto tr =
          policy::trace_sequence(params, prompt, seq, policy::Variant::kFull, parsed.layout);
      const int T = tr.length;
      std::vector<double> coeff(T, 1.0 / (static_cast<double>(ws.batch) * T));
      grads[b].assign(params.size(), 0.0);
      policy::accumulate_logprob_gradient(params, tr, coeff, grads[b]);
      for (double lp : tr.logp) nll[b] -= lp / T;
    });
    std::vector<double> grad(params.size(), 0.0);
    last_nll = 0.0;
    for (int b = 0; b < ws.batch; ++b) {
      for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += grads[b][k];
      last_nll += nll[b] / ws.batch;
    }
    optimize::apply_update(params, grad, state);
  }
  return last_nll;
}

// ---------------------------------------------------------------------------
// Trainer

Trainer::Trainer(TrainConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  params_ = policy::PolicyParams::random_init(cfg_.dims(), cfg_.master_seed, cfg_.policy.init_scale);
  run_warmstart(params_, cfg_);
  opt_ = optimize::make_optimizer_state(params_.size(), cfg_.optimizer);
}

Trainer::Trainer(TrainConfig cfg, const Checkpoint& ckpt) : cfg_(std::move(cfg)) {
  cfg_.validate();
  if (ckpt.cfg_hash != config_hash(cfg_)) {
    json stored = ckpt.config;
    if (stored.is_object()) {
      stored.erase("total_steps");
      stored.erase("output");
    }
    const auto diff = config_diff(stored, hashed_view(cfg_));
    std::string msg = "checkpoint was produced by a different configuration";
    if (!diff.empty()) {
      msg += "; differing keys:";
      for (const auto& k : diff) msg += " " + k;
    }
    throw IntegrityError(msg);
  }
  if (!(ckpt.params.dims() == cfg_.dims())) {
    throw IntegrityError("checkpoint dimensions do not match the configuration");
  }
  if (!ckpt.optimizer) throw IntegrityError("checkpoint carries no optimizer state");
  params_ = ckpt.params;
  opt_ = *ckpt.optimizer;
  step_ = ckpt.step;
  resumed_ = true;
}

std::string Trainer::metrics_path() const { return (fs::path(cfg_.output.dir) / "metrics.jsonl").string(); }

std::string Trainer::checkpoint_path(std::int64_t step) const {
  char name[40];
  std::snprintf(name, sizeof name, "step_%06lld.json", static_cast<long long>(step));
  return (fs::path(cfg_.output.dir) / "checkpoints" / name).string();
}

Checkpoint Trainer::make_checkpoint() const {
  Checkpoint c;
  c.params = params_;
  c.vocab_hash = Vocabulary::hash();
  c.optimizer = opt_;
  c.cfg_hash = config_hash(cfg_);
  c.step = step_;
  c.rng_epoch = static_cast<std::uint64_t>(step_);
  c.config = to_json(cfg_);
  return c;
}

void Trainer::dump_step(std::int64_t s, const std::vector<rollout::GroupRollout>& groups) const {
  char name[40];
  std::snprintf(name, sizeof name, "step_%06lld.jsonl", static_cast<long long>(s));
  const auto& out = cfg_.output;
  if (out.rollout_dump_every > 0 && s % out.rollout_dump_every == 0) {
    const fs::path dir = fs::path(out.dir) / "rollouts";
    fs::create_directories(dir);
    std::ofstream f(dir / name);
    for (const auto& g : groups) rollout::write_rollout_dump(f, g);
  }
  if (out.credit_dump_every > 0 && s % out.credit_dump_every == 0) {
    const fs::path dir = fs::path(out.dir) / "credits";
    fs::create_directories(dir);
    std::ofstream f(dir / name);
    for (const auto& g : groups) {
      for (int i = 0; i < g.size(); ++i) {
        if (g.credits.empty()) {
          const auto uc = credit::uniform_credit(g.responses[i].layout, g.advantages[i],
                                                 static_cast<int>(g.responses[i].tokens.size()));
          credit::write_credit_dump(f, g.task_id, i, uc);
        } else {
          credit::write_credit_dump(f, g.task_id, i, g.credits[i]);
        }
      }
    }
  }
}

StepMetrics Trainer::step() {
  const std::int64_t s = step_ + 1;
  const auto t0 = std::chrono::steady_clock::now();
  const auto saved_params = params_;
  const auto saved_opt = opt_;
  try {
    const auto behavior = rollout::snapshot_behavior(params_);
    const std::uint64_t stamp = behavior.hash();
    const int n = cfg_.tasks_per_step;
    const int G = cfg_.G;
    const auto scfg = cfg_.sampling_config();

    std::vector<rollout::GroupRollout> groups(n);
    parallel_for(n, [&](std::size_t j) {
      const auto task =
          synthgen::generate_task(train_task_seed(cfg_.master_seed, s, static_cast<int>(j)), cfg_.task);
      const auto seeds = rollout::member_seeds(cfg_.master_seed, s, task.task_id, G);
      groups[j] = rollout::generate_group(behavior, task, G, seeds, scfg);
    });

    StepMetrics m;
    m.step = s;
    double sum_r = 0.0, sum_acc = 0.0, sum_fmt = 0.0;
    for (const auto& g : groups) {
      for (const auto& r : g.rewards) {
        sum_r += r.total;
        sum_acc += r.r_acc;
        sum_fmt += r.r_fmt;
      }
    }
    const double n_resp = static_cast<double>(n) * G;
    m.mean_reward = sum_r / n_resp;
    m.mean_acc_reward = sum_acc / n_resp;
    m.mean_fmt_reward = sum_fmt / n_resp;

    std::vector<rollout::GroupRollout> batch =
        cfg_.ablation.online_filtering ? rollout::online_filter(groups) : groups;
    m.fraction_filtered = 1.0 - static_cast<double>(batch.size()) / n;

    if (cfg_.algorithm == Algorithm::kSrpo) {
      const auto sw = cfg_.switches();
      parallel_for(batch.size(), [&](std::size_t k) {
        auto& g = batch[k];
        if (g.behavior_stamp != stamp) {
          throw ContractViolation("credit assignment requires the sampling snapshot");
        }
        g.credits.resize(g.size());
        for (int i = 0; i < g.size(); ++i) {
          const auto& r = g.responses[i];
          const Seed mask_seed = derive_seed(cfg_.master_seed, Stream::kMask,
                                             {static_cast<std::uint64_t>(s), g.task_id,
                                              static_cast<std::uint64_t>(i)});
          g.credits[i] = credit::assign_trajectory_credit(behavior, g.prompt, r.tokens, r.logp_full,
                                                          r.layout, g.advantages[i], cfg_.modulation,
                                                          sw, mask_seed);
        }
      });
    }

    double abs_adv = 0.0;
    std::size_t n_adv = 0;
    std::size_t n_w = 0, n_clipped = 0;
    double w_sum = 0.0, w_min = 1.0, w_max = 1.0;
    for (const auto& g : batch) {
      for (int i = 0; i < g.size(); ++i) {
        abs_adv += std::abs(g.advantages[i]);
        ++n_adv;
        const auto& layout = g.responses[i].layout;
        if (!layout.parse_ok) continue;
        for (int t : layout.valid_positions()) {
          const double w = g.credits.empty() ? 1.0 : g.credits[i][t].weight;
          const bool clipped = g.credits.empty() ? false : g.credits[i][t].clipped;
          if (n_w == 0) {
            w_min = w;
            w_max = w;
          } else {
            w_min = std::min(w_min, w);
            w_max = std::max(w_max, w);
          }
          w_sum += w;
          n_clipped += clipped ? 1 : 0;
          ++n_w;
        }
      }
    }
    m.mean_abs_advantage = n_adv ? abs_adv / n_adv : 0.0;
    if (n_w > 0) {
      m.weights = WeightStats{w_sum / n_w, w_min, w_max, static_cast<double>(n_clipped) / n_w};
    }

    dump_step(s, cfg_.algorithm == Algorithm::kSrpo ? batch : groups);

    for (int e = 0; e < cfg_.optimizer.epochs_per_batch; ++e) {
      if (batch.empty()) break;
      const auto terms = optimize::evaluate_total(batch, params_, behavior, cfg_.clip, cfg_.eta);
      if (e == 0) {
        m.j_srpo = terms.j_srpo;
        m.j_resp = terms.j_resp;
        m.j_total = terms.j_total;
        double sq = 0.0;
        for (double g : terms.grad) sq += g * g;
        m.grad_norm = std::sqrt(sq);
      }
      optimize::apply_update(params_, terms.grad, opt_);
    }
    params_.check_finite();

    if (cfg_.output.record_wall_time) {
      m.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    step_ = s;
    return m;
  } catch (const NumericError& e) {
    params_ = saved_params;
    opt_ = saved_opt;
    throw NumericError("step " + std::to_string(s) + ": " + e.what());
  }
}

namespace {

// Keeps complete metric lines up to `last_step`; anything after (including a
// partially written line) is discarded.
void truncate_metrics(const std::string& path, std::int64_t last_step) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return;
  std::stringstream buf;
  buf << in.rdbuf();
  in.close();
  const std::string text = buf.str();
  std::string kept;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) break;
    const std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) continue;
    std::int64_t step = 0;
    try {
      step = json::parse(line).at("step").get<std::int64_t>();
    } catch (const json::exception&) {
      break;
    }
    if (step > last_step) break;
    kept += line;
    kept += '\n';
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << kept;
}

}  // namespace

TrainResult Trainer::run(const std::function<void(const StepMetrics&)>& on_step) {
  fs::create_directories(cfg_.output.dir);
  const std::string mpath = metrics_path();
  if (resumed_) {
    truncate_metrics(mpath, step_);
  } else {
    std::ofstream(mpath, std::ios::trunc);
  }
  std::ofstream metrics(mpath, std::ios::app | std::ios::binary);
  if (!metrics) throw std::runtime_error("cannot open metrics file " + mpath);

  TrainResult result;
  while (step_ < cfg_.total_steps) {
    StepMetrics m;
    try {
      m = step();
    } catch (const NumericError&) {
      save_checkpoint(checkpoint_path(step_), make_checkpoint());
      throw;
    }
    metrics << to_json_line(m) << '\n';
    metrics.flush();
    if (!metrics) {
      save_checkpoint(checkpoint_path(step_), make_checkpoint());
      throw std::runtime_error("writing " + mpath + " failed; checkpoint saved");
    }
    result.metrics.push_back(m);
    if (on_step) on_step(m);
    const int every = cfg_.output.checkpoint_every;
    if ((every > 0 && step_ % every == 0) || step_ == cfg_.total_steps) {
      save_checkpoint(checkpoint_path(step_), make_checkpoint());
    }
  }
  if (result.metrics.empty()) save_checkpoint(checkpoint_path(step_), make_checkpoint());
  result.params = params_;
  result.optimizer = opt_;
  result.last_step = step_;
  return result;
}

TrainResult run_training(const TrainConfig& cfg,
                         const std::function<void(const StepMetrics&)>& on_step) {
  Trainer t(cfg);
  return t.run(on_step);
}

TrainResult resume_training(const TrainConfig& cfg, const std::string& checkpoint_path,
                            const std::function<void(const StepMetrics&)>& on_step) {
  Trainer t(cfg, load_checkpoint(checkpoint_path));
  return t.run(on_step);
}

}  // namespace srpo::trainer
