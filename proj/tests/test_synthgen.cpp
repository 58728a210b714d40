// Copyright 2026 The SRPO Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <sstream>

#include "doctest.h"
#include "srpo/synthgen.hpp"
#include "srpo/vocab.hpp"
#include "support.hpp"

using namespace srpo;
using namespace srpo::synthgen;

namespace {

TaskShapeConfig grid3(std::vector<QuestionKind> kinds) {
  TaskShapeConfig c;
  c.min_rows = c.max_rows = 3;
  c.min_cols = c.max_cols = 3;
  c.kinds = std::move(kinds);
  return c;
}

StructuredResponse respond(std::vector<TokenId> tokens) {
  return rollout::make_structured(std::move(tokens));
}

}  // namespace

TEST_CASE("row-sum task answer is the sum of its row") {
  const auto t = generate_task(0, grid3({QuestionKind::kRowSum}));
  CHECK(t.image.rows() == 3);
  CHECK(t.image.cols() == 3);
  int s = 0;
  for (int c = 0; c < 3; ++c) s += t.image.value(t.question.arg, c);
  CHECK(t.answer == s);
}

TEST_CASE("generation is a pure function of the seed") {
  const auto cfg = TaskShapeConfig{};
  CHECK(generate_task(7, cfg) == generate_task(7, cfg));
  CHECK_FALSE(generate_task(7, cfg) == generate_task(8, cfg));
}

TEST_CASE("count answers stay within the cell count") {
  TaskShapeConfig cfg;
  cfg.kinds = {QuestionKind::kCountSymbol};
  for (Seed s = 0; s < 1000; ++s) {
    const auto t = generate_task(s, cfg);
    REQUIRE(t.answer >= 0);
    REQUIRE(t.answer <= t.image.cells());
  }
}

TEST_CASE("every generated task closes over its program") {
  TaskShapeConfig cfg;
  for (Seed s = 0; s < 2000; ++s) {
    const auto t = generate_task(s, cfg);
    REQUIRE(execute_question(t.question, t.image) == t.answer);
    REQUIRE(t.image.rows() >= cfg.min_rows);
    REQUIRE(t.image.cols() <= cfg.max_cols);
    REQUIRE(t.answer <= cfg.max_answer());
  }
}

TEST_CASE("question programs on fixed grids") {
  const SymbolImage img(2, 3, {2, 3, 4, 5, 5, 5});
  CHECK(execute_question(make_question(QuestionKind::kRowSum, 0), img) == 9);
  CHECK(execute_question(make_question(QuestionKind::kCountSymbol, 7), img) == 0);
  CHECK(execute_question(make_question(QuestionKind::kRowMax, 1), img) == 5);
  CHECK(execute_question(make_question(QuestionKind::kColSum, 2), img) == 9);
  CHECK(execute_question(make_question(QuestionKind::kCountSymbol, 5), img) == 3);
}

TEST_CASE("corruption extremes") {
  const auto t = generate_task(3, TaskShapeConfig{});
  const auto same = corrupt_image(t.image, 0.0, 99);
  CHECK(same.serialize() == t.image.serialize());
  const auto all = corrupt_image(t.image, 1.0, 99);
  for (int v : all.serialize()) CHECK(v == kMaskSymbol);
  CHECK(all.grid() == t.image.grid());
}

TEST_CASE("half masking hits half the cells") {
  TaskShapeConfig cfg;
  cfg.min_rows = cfg.max_rows = 5;
  cfg.min_cols = cfg.max_cols = 5;
  int masked = 0;
  int total = 0;
  for (Seed s = 0; s < 400; ++s) {
    const auto t = generate_task(s, cfg);
    const auto c = corrupt_image(t.image, 0.5, derive_seed(s, Stream::kMask, {1}));
    masked += c.masked_count();
    total += c.cells();
  }
  REQUIRE(total == 10000);
  const double frac = static_cast<double>(masked) / total;
  CHECK(frac > 0.48);
  CHECK(frac < 0.52);
}

TEST_CASE("corruption is local and monotone in severity") {
  TaskShapeConfig cfg;
  for (Seed s = 0; s < 300; ++s) {
    const auto t = generate_task(s, cfg);
    const Seed ms = derive_seed(s, Stream::kMask, {0});
    const auto lo = corrupt_image(t.image, 0.3, ms);
    const auto hi = corrupt_image(t.image, 0.6, ms);
    REQUIRE(lo.grid() == t.image.grid());
    for (int i = 0; i < t.image.cells(); ++i) {
      if (!lo.masked(i)) REQUIRE(lo.symbol(i) == t.image.symbol(i));
      if (lo.masked(i)) REQUIRE(hi.masked(i));
    }
  }
}

TEST_CASE("mismatched images keep shape, question and answer") {
  TaskShapeConfig cfg;
  cfg.min_rows = cfg.max_rows = 3;
  cfg.min_cols = cfg.max_cols = 4;
  const auto t = generate_task(11, cfg);
  const auto m = mismatch_image(t, 5);
  CHECK(m.image.rows() == 3);
  CHECK(m.image.cols() == 4);
  CHECK(m.question == t.question);
  CHECK(m.answer == t.answer);
  CHECK(m.image.grid() != t.image.grid());
}

TEST_CASE("mismatched images rarely preserve the row-sum answer") {
  const auto cfg = grid3({QuestionKind::kRowSum});
  int preserved = 0;
  for (Seed s = 0; s < 500; ++s) {
    const auto t = generate_task(s, cfg);
    const auto m = mismatch_image(t, derive_seed(s, Stream::kMismatch, {}));
    if (execute_question(m.question, m.image) == t.answer) ++preserved;
  }
  CHECK(static_cast<double>(preserved) / 500.0 < 0.2);
}

TEST_CASE("reward weights and strict format gate") {
  const auto t = generate_task(4, grid3({QuestionKind::kRowSum}));
  const auto good = respond(testing::make_response({1, 2}, {3}, t.answer));
  const auto r1 = verify(good, t, 0.1, 0.9);
  CHECK(r1.r_fmt == 1.0);
  CHECK(r1.r_acc == 1.0);
  CHECK(r1.total == doctest::Approx(1.0).epsilon(1e-15));

  const auto wrong = respond(testing::make_response({1}, {}, t.answer + 1));
  const auto r2 = verify(wrong, t, 0.1, 0.9);
  CHECK(r2.r_acc == 0.0);
  CHECK(r2.total == 0.1);

  auto broken = testing::make_response({1, 2}, {3}, t.answer);
  broken.erase(broken.begin() + 3);  // </perc>
  const auto r3 = verify(respond(broken), t, 0.1, 0.9);
  CHECK(r3.total == 0.0);
  CHECK(r3.r_fmt == 0.0);
  CHECK(r3.r_acc == 0.0);
}

TEST_CASE("reward decomposes exactly") {
  const auto t = generate_task(9, TaskShapeConfig{});
  Rng rng(1);
  for (int i = 0; i < 500; ++i) {
    std::vector<TokenId> toks;
    const int n = 1 + rng.below(12);
    for (int k = 0; k < n; ++k) toks.push_back(rng.below(Vocabulary::kQuestion0));
    if (i % 3 == 0) toks = testing::make_response({rng.below(10)}, {}, rng.below(10));
    const double lf = rng.uniform();
    const double la = rng.uniform();
    const auto r = verify(respond(toks), t, lf, la);
    REQUIRE(r.total - lf * r.r_fmt - la * r.r_acc == 0.0);
  }
}

TEST_CASE("corpus records round-trip") {
  std::vector<TaskInstance> tasks;
  for (Seed s = 0; s < 50; ++s) tasks.push_back(generate_task(s, TaskShapeConfig{}));
  std::stringstream buf;
  write_corpus(buf, tasks);
  CHECK(read_corpus(buf) == tasks);

  auto rec = to_record(tasks[0]);
  const auto pos = rec.find("\"answer\":");
  rec.replace(pos, rec.size() - pos, "\"answer\":999}");
  CHECK_THROWS_AS(from_record(rec), IntegrityError);
  CHECK_THROWS_AS(from_record("{not json"), IntegrityError);
}

TEST_CASE("shape configuration is validated") {
  TaskShapeConfig c;
  c.max_rows = 7;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TaskShapeConfig{};
  c.kinds.clear();
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TaskShapeConfig{};
  c.max_digit = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
