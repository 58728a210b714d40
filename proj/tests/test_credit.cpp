// Copyright 2026 The SRPO Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "oracle.hpp"
#include "srpo/credit.hpp"
#include "srpo/rollout.hpp"
#include "support.hpp"

using namespace srpo;
using namespace srpo::credit;

namespace {

struct Fixture {
  synthgen::TaskInstance task;
  policy::Prompt prompt;
  policy::PolicyParams params;
  std::vector<TokenId> tokens;
  SpanLayout layout;
  std::vector<double> logp;
};

Fixture fixture(Seed seed, std::vector<int> perc, std::vector<int> reas, double scale = 1.0) {
  Fixture f;
  synthgen::TaskShapeConfig cfg;
  cfg.min_rows = cfg.max_rows = 3;
  cfg.min_cols = cfg.max_cols = 3;
  f.task = synthgen::generate_task(seed, cfg);
  f.prompt = policy::make_prompt(f.task);
  f.params = policy::PolicyParams::random_init(policy::Dims{}, seed + 1000, scale);
  f.tokens = testing::make_response(std::move(perc), std::move(reas), f.task.answer);
  f.layout = rollout::parse_structured(f.tokens);
  f.logp = policy::score_sequence(f.params, f.prompt, f.tokens, policy::Variant::kFull, f.layout).logp;
  return f;
}

std::vector<TokenCredit> run(const Fixture& f, double adv, const ModulationConfig& m,
                             const CreditSwitches& s = {}, Seed mask_seed = 5) {
  return assign_trajectory_credit(f.params, f.prompt, f.tokens, f.logp, f.layout, adv, m, s,
                                  mask_seed);
}

}  // namespace

TEST_CASE("group advantages") {
  CHECK(group_advantages(std::vector<double>{1, 1, 1, 1}, 1e-6) == std::vector<double>(4, 0.0));

  const auto two = group_advantages(std::vector<double>{1, 0}, 1e-6);
  CHECK(std::fabs(two[0] - 0.5 / (0.5 + 1e-6)) <= 1e-12);
  CHECK(std::fabs(two[1] + 0.5 / (0.5 + 1e-6)) <= 1e-12);

  const auto four = group_advantages(std::vector<double>{1, 0, 0, 0}, 1e-6);
  const double sigma = std::sqrt(3.0) / 4.0;
  CHECK(std::fabs(four[0] - 0.75 / (sigma + 1e-6)) <= 1e-10);
  for (int i = 1; i < 4; ++i) CHECK(std::fabs(four[i] + 0.25 / (sigma + 1e-6)) <= 1e-10);

  Rng rng(3);
  for (int it = 0; it < 200; ++it) {
    std::vector<double> r(2 + rng.below(8));
    for (double& x : r) x = rng.below(3) * 0.45;
    const auto got = group_advantages(r, 1e-6);
    const auto want = oracle::group_advantages(r, 1e-6);
    for (std::size_t i = 0; i < r.size(); ++i) REQUIRE(std::fabs(got[i] - want[i]) <= 1e-12);
  }
  CHECK_THROWS_AS(group_advantages(std::vector<double>{1.0}, 1e-6), ContractViolation);
}

TEST_CASE("likelihood contrasts") {
  const std::vector<double> a{-0.5, -2.0, -1.25};
  CHECK(perception_contrast(a, a) == std::vector<double>(3, 0.0));
  CHECK(perception_contrast(std::vector<double>{-0.5}, std::vector<double>{-1.5})[0] == 1.0);
  CHECK(perception_contrast(std::vector<double>{-2.0}, std::vector<double>{-1.0})[0] == -1.0);
  CHECK(reasoning_contrast(std::vector<double>{-0.5}, std::vector<double>{-1.5})[0] == 1.0);
  CHECK(reasoning_contrast(a, a) == std::vector<double>(3, 0.0));
  CHECK_THROWS_AS(perception_contrast(a, std::vector<double>{0.0}), ContractViolation);
}

TEST_CASE("role scores") {
  CHECK(role_scores(std::vector<double>{0.0}, +1)[0] == 1.0);
  const double ln2 = std::log(2.0);
  CHECK(std::fabs(role_scores(std::vector<double>{ln2}, +1)[0] - 2.0) <= 1e-12);
  CHECK(std::fabs(role_scores(std::vector<double>{ln2}, -1)[0] - 0.5) <= 1e-12);
  CHECK(role_scores(std::vector<double>{ln2, -3.0, 7.0}, 0) == std::vector<double>(3, 1.0));
  CHECK(advantage_sign(0.0) == 0);
  CHECK(advantage_sign(-1e-300) == -1);
  CHECK(advantage_sign(2.0) == 1);

  const auto big = role_scores(std::vector<double>{1e6, -1e6}, +1);
  CHECK(big[0] == std::exp(kScoreClamp));
  CHECK(big[1] == std::exp(-kScoreClamp));

  Rng rng(8);
  for (int i = 0; i < 2000; ++i) {
    const std::vector<double> d{(rng.uniform() * 2 - 1) * 30.0};
    REQUIRE(std::fabs(role_scores(d, +1)[0] * role_scores(d, -1)[0] - 1.0) <= 1e-12);
  }
}

TEST_CASE("unified modulation") {
  ModulationConfig m;
  CHECK(unified_modulation(std::vector<double>{0.7, 0.7, 0.7}, m) == std::vector<double>(3, 1.0));
  CHECK(unified_modulation(std::vector<double>{}, m).empty());
  CHECK(unified_modulation(std::vector<double>{2.0, 0.0}, m) == std::vector<double>{1.2, 0.8});
  CHECK(unified_modulation(std::vector<double>{0.4, 1.6}, m) == std::vector<double>{0.8, 1.2});

  Rng rng(11);
  for (int it = 0; it < 2000; ++it) {
    std::vector<double> r(1 + rng.below(10));
    for (double& x : r) x = std::exp((rng.uniform() - 0.5) * 0.6);
    const auto w = unified_modulation(r, m);
    double mean_r = 0.0;
    for (double x : r) mean_r += x / r.size();
    bool clipped = false;
    double mean_dev = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double pre = 1.0 + m.lambda_mod * (r[i] - mean_r);
      clipped = clipped || pre < m.m_min || pre > m.m_max;
      mean_dev += (w[i] - 1.0) / r.size();
    }
    if (clipped) {
      REQUIRE(mean_dev >= m.m_min - 1.0);
      REQUIRE(mean_dev <= m.m_max - 1.0);
    } else {
      REQUIRE(std::fabs(mean_dev) <= 1e-12);
    }
    // Raising one score never lowers its weight.
    const std::size_t k = rng.below(static_cast<int>(r.size()));
    auto up = r;
    up[k] += rng.uniform();
    REQUIRE(unified_modulation(up, m)[k] >= w[k]);
  }
}

TEST_CASE("token advantages") {
  SpanLayout l;
  l.parse_ok = true;
  l.perc_begin = 1;
  l.perc_end = 3;
  l.reas_begin = 5;
  l.reas_end = 6;
  const std::vector<double> w{1.2, 0.8, 1.0};
  CHECK(token_advantages(0.0, l, w, 8) == std::vector<double>(8, 0.0));
  const auto a = token_advantages(-1.0, l, w, 8);
  CHECK(a == std::vector<double>{-1.0, -1.2, -0.8, -1.0, -1.0, -1.0, -1.0, -1.0});
  CHECK_THROWS_AS(token_advantages(1.0, l, std::vector<double>{1.0}, 8), ContractViolation);
}

TEST_CASE("zero modulation strength reproduces the group advantage exactly") {
  ModulationConfig m;
  m.lambda_mod = 0.0;
  for (Seed s = 0; s < 20; ++s) {
    const auto f = fixture(s, {1, 2, 0}, {4, 5});
    const double adv = (s % 2 ? -1.0 : 1.0) * (0.1 + s);
    for (const auto& c : run(f, adv, m)) {
      REQUIRE(c.weight == 1.0);
      REQUIRE(c.token_advantage == adv);
    }
  }
}

TEST_CASE("identity contrasts") {
  SUBCASE("no masking gives zero perception contrast") {
    ModulationConfig m;
    m.p_mask = 0.0;
    for (Seed s = 0; s < 20; ++s) {
      const auto f = fixture(s, {1, 2, 0, 1}, {3});
      for (const auto& c : run(f, 0.8, m)) {
        if (c.role != Role::kPerception) continue;
        REQUIRE(c.delta == 0.0);
        REQUIRE(c.raw_score == 1.0);
      }
    }
  }
  SUBCASE("an empty perception span gives zero reasoning contrast") {
    for (Seed s = 0; s < 20; ++s) {
      const auto f = fixture(s, {}, {3, 7, 1});
      const auto credits = run(f, -0.6, ModulationConfig{});
      int reasoning = 0;
      for (const auto& c : credits) {
        REQUIRE(c.role != Role::kPerception);
        if (c.role != Role::kReasoning) continue;
        ++reasoning;
        REQUIRE(c.delta == 0.0);
        REQUIRE(c.raw_score == 1.0);
        REQUIRE(c.weight == 1.0);
      }
      REQUIRE(reasoning == 3);
    }
  }
}

TEST_CASE("credit records against independent arithmetic") {
  ModulationConfig m;
  for (Seed s = 0; s < 10; ++s) {
    const auto f = fixture(s, {1, 2}, {3, 0, 6}, 2.0);
    const double adv = s % 2 ? -0.9 : 1.3;
    const auto credits = run(f, adv, m, {}, 17 + s);
    const auto valid = f.layout.valid_positions();
    std::vector<double> r;
    for (int t : valid) {
      const bool perc = f.layout.in_perception(t);
      const double alt = oracle::logprob(
          f.params, f.prompt, f.tokens, t,
          perc ? policy::Variant::kMaskedImage : policy::Variant::kNoPerception, f.layout,
          m.p_mask, 17 + s);
      const double delta = f.logp[t] - alt;
      REQUIRE(std::fabs(credits[t].delta - delta) <= 1e-10);
      r.push_back(std::exp(std::clamp((adv > 0 ? 1 : -1) * delta, -30.0, 30.0)));
    }
    double mean = 0.0;
    for (double x : r) mean += x / r.size();
    for (std::size_t k = 0; k < valid.size(); ++k) {
      const double w = std::clamp(1.0 + 0.5 * (r[k] - mean), 0.8, 1.2);
      REQUIRE(std::fabs(credits[valid[k]].weight - w) <= 1e-10);
      REQUIRE(std::fabs(credits[valid[k]].token_advantage - adv * w) <= 1e-10);
    }
    for (const auto& c : credits) {
      if (c.role == Role::kNeutral) REQUIRE(c.token_advantage == adv);
    }
  }
}

TEST_CASE("failed trajectories: image-dependent tokens are scored down") {
  // Under a negative advantage the score is exp(-delta), so weights are
  // non-increasing in delta; a token whose weight saturates at the top bound
  // receives token advantage -1.2.
  ModulationConfig m;
  bool saw_top = false;
  for (Seed s = 0; s < 200 && !saw_top; ++s) {
    const auto f = fixture(s, {1, 2, 0, 2}, {5, 3}, 3.0);
    const auto credits = run(f, -1.0, m, {}, s);
    const auto valid = f.layout.valid_positions();
    for (int a : valid) {
      for (int b : valid) {
        if (credits[a].delta < credits[b].delta) REQUIRE(credits[a].weight >= credits[b].weight);
      }
      if (credits[a].weight == 1.2) {
        saw_top = true;
        REQUIRE(credits[a].token_advantage == -1.2);
      }
    }
  }
  CHECK(saw_top);
}

TEST_CASE("direction preservation and bounds on random trajectories") {
  Rng rng(42);
  for (int it = 0; it < 300; ++it) {
    std::vector<int> perc(rng.below(4));
    std::vector<int> reas(rng.below(4));
    for (int& p : perc) p = rng.below(10);
    for (int& r : reas) r = rng.below(20);
    const auto f = fixture(it, perc, reas, 4.0);
    ModulationConfig m;
    m.lambda_mod = rng.uniform() * 3.0;
    m.p_mask = rng.uniform();
    const double adv = rng.below(5) == 0 ? 0.0 : (rng.uniform() - 0.5) * 6.0;
    CreditSwitches sw{rng.below(2) == 0, rng.below(2) == 0, rng.below(3) != 0};
    for (const auto& c : run(f, adv, m, sw, rng.next())) {
      REQUIRE(c.weight > 0.0);
      REQUIRE(c.weight >= m.m_min);
      REQUIRE(c.weight <= m.m_max);
      if (adv != 0.0) REQUIRE(advantage_sign(c.token_advantage) == advantage_sign(adv));
      if (adv == 0.0) REQUIRE(c.token_advantage == 0.0);
    }
  }
}

TEST_CASE("ablation switches") {
  const auto f = fixture(3, {1, 2, 0}, {4, 9}, 3.0);
  ModulationConfig m;
  const auto both = run(f, 1.0, m);

  const auto no_perc = run(f, 1.0, m, {false, true, true});
  const auto no_reas = run(f, 1.0, m, {true, false, true});
  const auto none = run(f, 1.0, m, {false, false, true});
  const auto raw = run(f, 1.0, m, {true, true, false});
  for (std::size_t t = 0; t < both.size(); ++t) {
    if (both[t].role == Role::kPerception) {
      CHECK(no_perc[t].delta == 0.0);
      CHECK(no_perc[t].raw_score == 1.0);
      CHECK(no_reas[t].delta == both[t].delta);
    }
    if (both[t].role == Role::kReasoning) {
      CHECK(no_reas[t].delta == 0.0);
      CHECK(no_reas[t].raw_score == 1.0);
      CHECK(no_perc[t].delta == both[t].delta);
    }
    CHECK(none[t].weight == 1.0);
    CHECK(none[t].token_advantage == 1.0);
    CHECK(raw[t].delta == both[t].delta);
    CHECK(raw[t].raw_score == both[t].raw_score);
    if (both[t].role != Role::kNeutral) {
      CHECK(raw[t].weight == std::clamp(both[t].raw_score, m.m_min, m.m_max));
    }
  }
}

TEST_CASE("malformed responses keep uniform credit") {
  auto f = fixture(1, {1}, {2});
  f.tokens.pop_back();
  f.layout = rollout::parse_structured(f.tokens);
  f.logp.pop_back();
  REQUIRE_FALSE(f.layout.parse_ok);
  for (const auto& c : run(f, 0.7, ModulationConfig{})) {
    CHECK(c.weight == 1.0);
    CHECK(c.token_advantage == 0.7);
    CHECK(c.role == Role::kNeutral);
  }
}

TEST_CASE("credit dump records") {
  const auto f = fixture(2, {1, 2}, {3});
  const auto credits = run(f, 0.5, ModulationConfig{});
  std::stringstream out;
  write_credit_dump(out, 99, 3, credits);
  std::string line;
  std::size_t n = 0;
  while (std::getline(out, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.at("task_id").get<std::uint64_t>() == 99);
    CHECK(j.at("member_index").get<int>() == 3);
    CHECK(j.at("position").get<int>() == credits[n].position);
    CHECK(j.at("role").get<std::string>() == role_name(credits[n].role));
    CHECK(j.at("weight").get<double>() == credits[n].weight);
    ++n;
  }
  CHECK(n == credits.size());
}

TEST_CASE("modulation configuration is validated") {
  ModulationConfig m;
  m.m_min = 1.1;
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m = ModulationConfig{};
  m.lambda_mod = -0.1;
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m = ModulationConfig{};
  m.p_mask = 1.5;
  CHECK_THROWS_AS(m.validate(), ConfigError);
}
