// Copyright 2026 The SRPO Lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic verifiable grid tasks: a symbol grid plays the image, a small
// question program plays the question, and the program output is the answer.

#ifndef SRPO_SYNTHGEN_HPP_
#define SRPO_SYNTHGEN_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "srpo/common.hpp"
#include "srpo/structured.hpp"

namespace srpo::synthgen {

inline constexpr int kMinSide = 2;
inline constexpr int kMaxSide = 6;
/// Cell symbol index of a blacked-out cell (digits occupy 0..9).
inline constexpr int kMaskSymbol = 10;
inline constexpr int kNumCellSymbols = 11;

/// A rows x cols digit grid with a per-cell blackout mask. Masking hides a
/// cell from serialization but never changes its value.
class SymbolImage {
 public:
  SymbolImage() = default;
  SymbolImage(int rows, int cols, std::vector<int> grid);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int cells() const { return rows_ * cols_; }
  int value(int r, int c) const { return grid_[index(r, c)]; }
  int value(int cell) const { return grid_[cell]; }
  bool masked(int cell) const { return mask_[cell] != 0; }
  /// Digit, or kMaskSymbol for a masked cell.
  int symbol(int cell) const { return mask_[cell] ? kMaskSymbol : grid_[cell]; }
  std::vector<int> serialize() const;
  int masked_count() const;

  const std::vector<int>& grid() const { return grid_; }
  void set_mask(int cell, bool m) { mask_[cell] = m ? 1 : 0; }

  bool operator==(const SymbolImage&) const = default;

 private:
  int index(int r, int c) const { return r * cols_ + c; }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<int> grid_;
  std::vector<unsigned char> mask_;
};

enum class QuestionKind { kRowSum, kColSum, kCountSymbol, kRowMax };

std::string_view kind_name(QuestionKind k);
QuestionKind kind_from_name(std::string_view name);

struct QuestionProgram {
  QuestionKind kind = QuestionKind::kRowSum;
  int arg = 0;
  std::vector<TokenId> surface_tokens;

  bool operator==(const QuestionProgram&) const = default;
};

/// Builds a program with its token rendering.
QuestionProgram make_question(QuestionKind kind, int arg);

struct TaskInstance {
  SymbolImage image;
  QuestionProgram question;
  int answer = 0;
  std::uint64_t task_id = 0;

  bool operator==(const TaskInstance&) const = default;
};

struct TaskShapeConfig {
  int min_rows = 2;
  int max_rows = 6;
  int min_cols = 2;
  int max_cols = 6;
  std::vector<QuestionKind> kinds = {QuestionKind::kRowSum, QuestionKind::kColSum,
                                     QuestionKind::kCountSymbol, QuestionKind::kRowMax};
  /// Grid digits are drawn from 0..max_digit.
  int max_digit = 9;

  void validate() const;
  /// Largest answer any enabled program can produce for this shape.
  int max_answer() const;
};

struct RewardBreakdown {
  double r_fmt = 0.0;
  double r_acc = 0.0;
  double total = 0.0;

  bool operator==(const RewardBreakdown&) const = default;
};

TaskInstance generate_task(Seed seed, const TaskShapeConfig& cfg);

/// Each cell is masked independently iff keyed_uniform(seed, cell) < p_mask,
/// so the masked set grows monotonically with p_mask for a fixed seed.
SymbolImage corrupt_image(const SymbolImage& img, double p_mask, Seed seed);

/// Same question and recorded answer, fresh grid of the same shape. Grids
/// equal to the original are redrawn.
TaskInstance mismatch_image(const TaskInstance& task, Seed pool_seed, int max_digit = 9);

/// Ground truth: reads hidden values, ignoring the mask.
int execute_question(const QuestionProgram& q, const SymbolImage& img);

RewardBreakdown verify(const StructuredResponse& resp, const TaskInstance& task,
                       double lambda_fmt, double lambda_acc);

/// Line-delimited corpus records with fixed field order.
void write_corpus(std::ostream& out, const std::vector<TaskInstance>& tasks);
std::vector<TaskInstance> read_corpus(std::istream& in);
std::string to_record(const TaskInstance& task);
TaskInstance from_record(std::string_view line);

}  // namespace srpo::synthgen

#endif  // SRPO_SYNTHGEN_HPP_
