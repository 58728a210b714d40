// Copyright 2026 The SRPO Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "srpo/rollout.hpp"

#include <algorithm>
#include <ostream>

#include "json.hpp"

namespace srpo::rollout {

std::vector<Seed> member_seeds(Seed master, std::uint64_t step, std::uint64_t task_id, int G) {
  std::vector<Seed> seeds(G);
  for (int i = 0; i < G; ++i) {
    seeds[i] = derive_seed(master, Stream::kRollout, {step, task_id, static_cast<std::uint64_t>(i)});
  }
  return seeds;
}

GroupRollout generate_group(const policy::PolicyParams& params_old,
                            const synthgen::TaskInstance& task, int G,
                            std::span<const Seed> seeds, const SamplingConfig& cfg) {
  require(G >= 2, "generate_group: group size must be at least 2");
  require(static_cast<int>(seeds.size()) == G, "generate_group: need one seed per member");
  GroupRollout group;
  group.task_id = task.task_id;
  group.prompt = policy::make_prompt(task);
  group.behavior_stamp = params_old.hash();
  group.responses.reserve(G);
  std::vector<double> totals;
  for (int i = 0; i < G; ++i) {
    auto sampled = policy::sample_response(params_old, group.prompt, seeds[i], cfg.top_p, cfg.max_len);
    StructuredResponse parsed = make_structured(sampled.tokens);
    group.rewards.push_back(synthgen::verify(parsed, task, cfg.lambda_fmt, cfg.lambda_acc));
    totals.push_back(group.rewards.back().total);
    group.responses.push_back(
        ResponseRecord{std::move(sampled.tokens), std::move(sampled.logp), parsed.layout});
  }
  group.advantages = credit::group_advantages(totals, cfg.eps_norm);
  return group;
}

policy::PolicyParams snapshot_behavior(const policy::PolicyParams& params) { return params; }

bool has_reward_variance(const GroupRollout& group) {
  return std::any_of(group.rewards.begin(), group.rewards.end(), [&](const auto& r) {
    return r.total != group.rewards.front().total;
  });
}

std::vector<GroupRollout> online_filter(std::vector<GroupRollout> groups) {
  std::erase_if(groups, [](const GroupRollout& g) { return !has_reward_variance(g); });
  return groups;
}

void write_rollout_dump(std::ostream& out, const GroupRollout& group) {
  for (int i = 0; i < group.size(); ++i) {
    const auto& r = group.responses[i];
    nlohmann::ordered_json j;
    j["task_id"] = group.task_id;
    j["member_index"] = i;
    j["tokens"] = r.tokens;
    j["logp_full"] = r.logp_full;
    j["reward"] = {{"r_fmt", group.rewards[i].r_fmt},
                   {"r_acc", group.rewards[i].r_acc},
                   {"total", group.rewards[i].total}};
    j["advantage"] = group.advantages[i];
    j["perc_span"] = {r.layout.perc_begin, r.layout.perc_end};
    j["reas_span"] = {r.layout.reas_begin, r.layout.reas_end};
    j["parse_ok"] = r.layout.parse_ok;
    out << j.dump() << '\n';
  }
}

}  // namespace srpo::rollout
