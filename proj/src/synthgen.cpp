// Copyright 2026 The SRPO Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "srpo/synthgen.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

#include "json.hpp"

#include "srpo/vocab.hpp"

namespace srpo::synthgen {

SymbolImage::SymbolImage(int rows, int cols, std::vector<int> grid)
    : rows_(rows), cols_(cols), grid_(std::move(grid)), mask_(grid_.size(), 0) {
  require(rows >= kMinSide && rows <= kMaxSide && cols >= kMinSide && cols <= kMaxSide,
          "SymbolImage: shape out of range");
  require(static_cast<int>(grid_.size()) == rows * cols, "SymbolImage: grid size mismatch");
  for (int v : grid_) require(v >= 0 && v <= 9, "SymbolImage: cell outside digit alphabet");
}

std::vector<int> SymbolImage::serialize() const {
  std::vector<int> out(grid_.size());
  for (int i = 0; i < cells(); ++i) out[i] = symbol(i);
  return out;
}

int SymbolImage::masked_count() const {
  return static_cast<int>(std::count(mask_.begin(), mask_.end(), 1));
}

std::string_view kind_name(QuestionKind k) {
  switch (k) {
    case QuestionKind::kRowSum: return "ROW_SUM";
    case QuestionKind::kColSum: return "COL_SUM";
    case QuestionKind::kCountSymbol: return "COUNT_SYMBOL";
    case QuestionKind::kRowMax: return "ROW_MAX";
  }
  return "?";
}

QuestionKind kind_from_name(std::string_view name) {
  for (auto k : {QuestionKind::kRowSum, QuestionKind::kColSum, QuestionKind::kCountSymbol,
                 QuestionKind::kRowMax}) {
    if (kind_name(k) == name) return k;
  }
  throw ConfigError("", "unknown question kind '" + std::string(name) + "'");
}

QuestionProgram make_question(QuestionKind kind, int arg) {
  require(arg >= 0 && arg <= 9, "make_question: argument outside 0..9");
  QuestionProgram q;
  q.kind = kind;
  q.arg = arg;
  q.surface_tokens = {Vocabulary::kQuestion0 + static_cast<int>(kind), Vocabulary::digit(arg)};
  return q;
}

void TaskShapeConfig::validate() const {
  if (kinds.empty()) throw ConfigError("question_kinds", "at least one question kind required");
  auto side_ok = [](int v) { return v >= kMinSide && v <= kMaxSide; };
  if (!side_ok(min_rows) || !side_ok(max_rows) || min_rows > max_rows) {
    throw ConfigError("min_rows", "row bounds must satisfy 2 <= min_rows <= max_rows <= 6");
  }
  if (!side_ok(min_cols) || !side_ok(max_cols) || min_cols > max_cols) {
    throw ConfigError("min_cols", "column bounds must satisfy 2 <= min_cols <= max_cols <= 6");
  }
  if (max_digit < 1 || max_digit > 9) throw ConfigError("max_digit", "must lie in 1..9");
}

int TaskShapeConfig::max_answer() const {
  int best = 0;
  for (auto k : kinds) {
    switch (k) {
      case QuestionKind::kRowSum: best = std::max(best, max_cols * max_digit); break;
      case QuestionKind::kColSum: best = std::max(best, max_rows * max_digit); break;
      case QuestionKind::kCountSymbol: best = std::max(best, max_rows * max_cols); break;
      case QuestionKind::kRowMax: best = std::max(best, max_digit); break;
    }
  }
  return best;
}

int execute_question(const QuestionProgram& q, const SymbolImage& img) {
  switch (q.kind) {
    case QuestionKind::kRowSum: {
      require(q.arg >= 0 && q.arg < img.rows(), "execute_question: row index out of range");
      int s = 0;
      for (int c = 0; c < img.cols(); ++c) s += img.value(q.arg, c);
      return s;
    }
    case QuestionKind::kColSum: {
      require(q.arg >= 0 && q.arg < img.cols(), "execute_question: column index out of range");
      int s = 0;
      for (int r = 0; r < img.rows(); ++r) s += img.value(r, q.arg);
      return s;
    }
    case QuestionKind::kCountSymbol: {
      require(q.arg >= 0 && q.arg <= 9, "execute_question: symbol outside digit alphabet");
      int n = 0;
      for (int i = 0; i < img.cells(); ++i) n += img.value(i) == q.arg ? 1 : 0;
      return n;
    }
    case QuestionKind::kRowMax: {
      require(q.arg >= 0 && q.arg < img.rows(), "execute_question: row index out of range");
      int m = 0;
      for (int c = 0; c < img.cols(); ++c) m = std::max(m, img.value(q.arg, c));
      return m;
    }
  }
  throw ContractViolation("execute_question: unknown question kind");
}

namespace {

SymbolImage random_grid(Rng& rng, int rows, int cols, int max_digit) {
  std::vector<int> grid(rows * cols);
  for (int& v : grid) v = rng.below(max_digit + 1);
  return SymbolImage(rows, cols, std::move(grid));
}

}  // namespace

TaskInstance generate_task(Seed seed, const TaskShapeConfig& cfg) {
  cfg.validate();
  Rng rng(splitmix64(seed ^ 0x5eed7a5cULL));
  const int rows = cfg.min_rows + rng.below(cfg.max_rows - cfg.min_rows + 1);
  const int cols = cfg.min_cols + rng.below(cfg.max_cols - cfg.min_cols + 1);
  TaskInstance task;
  task.image = random_grid(rng, rows, cols, cfg.max_digit);
  const QuestionKind kind = cfg.kinds[rng.below(static_cast<int>(cfg.kinds.size()))];
  int arg = 0;
  switch (kind) {
    case QuestionKind::kRowSum:
    case QuestionKind::kRowMax: arg = rng.below(rows); break;
    case QuestionKind::kColSum: arg = rng.below(cols); break;
    case QuestionKind::kCountSymbol: arg = rng.below(cfg.max_digit + 1); break;
  }
  task.question = make_question(kind, arg);
  task.answer = execute_question(task.question, task.image);
  task.task_id = splitmix64(seed);
  return task;
}

SymbolImage corrupt_image(const SymbolImage& img, double p_mask, Seed seed) {
  require(p_mask >= 0.0 && p_mask <= 1.0, "corrupt_image: p_mask outside [0, 1]");
  SymbolImage out = img;
  for (int i = 0; i < out.cells(); ++i) {
    if (keyed_uniform(seed, static_cast<std::uint64_t>(i)) < p_mask) out.set_mask(i, true);
  }
  return out;
}

TaskInstance mismatch_image(const TaskInstance& task, Seed pool_seed, int max_digit) {
  require(max_digit >= 1 && max_digit <= 9, "mismatch_image: max_digit outside 1..9");
  TaskInstance out = task;
  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng(derive_seed(pool_seed, Stream::kMismatch, {attempt}));
    SymbolImage fresh = random_grid(rng, task.image.rows(), task.image.cols(), max_digit);
    if (fresh.grid() != task.image.grid()) {
      out.image = std::move(fresh);
      return out;
    }
  }
}

RewardBreakdown verify(const StructuredResponse& resp, const TaskInstance& task,
                       double lambda_fmt, double lambda_acc) {
  RewardBreakdown r;
  if (resp.layout.parse_ok) {
    r.r_fmt = 1.0;
    r.r_acc = (resp.answer && *resp.answer == task.answer) ? 1.0 : 0.0;
  }
  r.total = lambda_fmt * r.r_fmt + lambda_acc * r.r_acc;
  return r;
}

std::string to_record(const TaskInstance& task) {
  nlohmann::ordered_json j;
  j["task_id"] = task.task_id;
  j["rows"] = task.image.rows();
  j["cols"] = task.image.cols();
  j["grid"] = task.image.grid();
  j["question_kind"] = kind_name(task.question.kind);
  j["question_arg"] = task.question.arg;
  j["answer"] = task.answer;
  return j.dump();
}

TaskInstance from_record(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("corpus record: ") + e.what());
  }
  TaskInstance task;
  try {
    task.task_id = j.at("task_id").get<std::uint64_t>();
    task.image = SymbolImage(j.at("rows").get<int>(), j.at("cols").get<int>(),
                             j.at("grid").get<std::vector<int>>());
    task.question = make_question(kind_from_name(j.at("question_kind").get<std::string>()),
                                  j.at("question_arg").get<int>());
    task.answer = j.at("answer").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("corpus record: ") + e.what());
  }
  if (execute_question(task.question, task.image) != task.answer) {
    throw IntegrityError("corpus record: answer does not match question program");
  }
  return task;
}

void write_corpus(std::ostream& out, const std::vector<TaskInstance>& tasks) {
  for (const auto& t : tasks) out << to_record(t) << '\n';
}

std::vector<TaskInstance> read_corpus(std::istream& in) {
  std::vector<TaskInstance> tasks;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) tasks.push_back(from_record(line));
  }
  return tasks;
}

}  // namespace srpo::synthgen
