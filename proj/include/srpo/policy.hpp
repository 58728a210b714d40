// Copyright 2026 The SRPO Lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// The toy autoregressive policy: a one-hidden-layer softmax model over a
// mean-pooled context of (image cells, question, prefix, previous token,
// position). Backpropagation is hand-written.
//
// Context layout, each slot embed_dim wide except the last:
//   [ mean cell embedding | mean question embedding | mean prefix embedding |
//     previous-token (or BOS) embedding | pos / context_len ]

#ifndef SRPO_POLICY_HPP_
#define SRPO_POLICY_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "srpo/common.hpp"
#include "srpo/structured.hpp"
#include "srpo/synthgen.hpp"
#include "srpo/vocab.hpp"

namespace srpo::policy {

using synthgen::SymbolImage;

struct Dims {
  int vocab_size = Vocabulary::kSize;
  int embed_dim = 16;
  int hidden_dim = 32;
  int max_rows = synthgen::kMaxSide;
  int max_cols = synthgen::kMaxSide;
  /// Normalizer of the position feature.
  int context_len = 24;
  /// Terminator; -1 means sequences only end at the length cap.
  TokenId eos = Vocabulary::kEos;

  int context_dim() const { return 4 * embed_dim + 1; }
  int cell_rows() const { return max_rows * max_cols * synthgen::kNumCellSymbols; }

  // Offsets into the flat parameter vector.
  std::size_t token_embedding_offset() const { return 0; }
  std::size_t bos_offset() const;
  std::size_t cell_embedding_offset() const;
  std::size_t w1_offset() const;
  std::size_t b1_offset() const;
  std::size_t w2_offset() const;
  std::size_t b2_offset() const;
  std::size_t param_count() const;

  void validate() const;
  bool operator==(const Dims&) const = default;
};

/// Flat parameter vector plus its architecture descriptor.
class PolicyParams {
 public:
  PolicyParams() = default;
  explicit PolicyParams(Dims dims);  ///< all-zero parameters
  PolicyParams(Dims dims, std::vector<double> theta);

  /// Uniform in [-scale, scale], keyed by seed.
  static PolicyParams random_init(const Dims& dims, Seed seed, double scale = 0.05);

  const Dims& dims() const { return dims_; }
  std::span<double> theta() { return theta_; }
  std::span<const double> theta() const { return theta_; }
  std::size_t size() const { return theta_.size(); }

  std::uint64_t hash() const;
  void check_finite() const;

  bool operator==(const PolicyParams&) const = default;

 private:
  Dims dims_;
  std::vector<double> theta_;
};

enum class Variant { kFull, kMaskedImage, kNoPerception, kBlind };
std::string_view variant_name(Variant v);

/// The (I, q) part of a conditioning context.
struct Prompt {
  std::optional<SymbolImage> image;
  std::vector<TokenId> question;
};

Prompt make_prompt(const synthgen::TaskInstance& task);

/// Builds a context vector. `prefix` must already be filtered for the variant;
/// kBlind zeroes the image slot, a null image also gives a zero slot.
std::vector<double> encode_context(const PolicyParams& params, const SymbolImage* image,
                                   std::span<const TokenId> question,
                                   std::span<const TokenId> prefix, int pos, Variant variant);

/// softmax(W2 tanh(W1 context + b1) + b2). Throws NumericError on non-finite
/// logits.
std::vector<double> token_distribution(const PolicyParams& params,
                                       std::span<const double> context);

struct RescoreSpec {
  double p_mask = 0.5;
  Seed mask_seed = 0;
};

struct ScoredSequence {
  std::vector<TokenId> tokens;
  std::vector<double> logp;
  Variant variant = Variant::kFull;
};

/// Per-position log-probabilities of a fixed token sequence under a
/// conditioning variant. For kMaskedImage the image is corrupted once from
/// spec.mask_seed; kNoPerception drops the perception span of `layout` from
/// every prefix and shifts positions accordingly.
ScoredSequence score_sequence(const PolicyParams& params, const Prompt& prompt,
                              std::span<const TokenId> tokens, Variant variant,
                              const SpanLayout& layout, const RescoreSpec& spec = {});

/// Task-level convenience that parses the grammar itself.
ScoredSequence score_sequence(const PolicyParams& params, const synthgen::TaskInstance& task,
                              std::span<const TokenId> tokens, Variant variant, Seed mask_seed,
                              double p_mask = 0.5);

struct SampledResponse {
  std::vector<TokenId> tokens;
  /// Log-probabilities under the untruncated distribution.
  std::vector<double> logp;
};

/// Nucleus sampling under FULL conditioning; stops at EOS or the cap.
SampledResponse sample_response(const PolicyParams& params, const Prompt& prompt, Seed rng_seed,
                                double top_p, int max_len);

/// Argmax decoding, ties to the lowest token id. `variant` is kFull or kBlind.
SampledResponse decode_greedy(const PolicyParams& params, const Prompt& prompt, int max_len,
                              Variant variant = Variant::kFull);

/// Forward activations of one sequence, kept for backpropagation.
struct SequenceTrace {
  int length = 0;
  std::vector<double> context;  ///< length x context_dim
  std::vector<double> hidden;   ///< length x hidden_dim
  std::vector<double> probs;    ///< length x vocab_size
  std::vector<double> logp;     ///< length
  std::vector<TokenId> tokens;

  // Context provenance.
  std::vector<int> cell_rows;        ///< embedding rows averaged into the image slot
  std::vector<TokenId> question;
  std::vector<TokenId> kept_prefix;  ///< prefix tokens after variant filtering
  std::vector<int> prefix_count;     ///< per position: |kept prefix|
  std::vector<TokenId> prev_token;   ///< per position: previous kept token or -1 (BOS)
};

SequenceTrace trace_sequence(const PolicyParams& params, const Prompt& prompt,
                             std::span<const TokenId> tokens, Variant variant,
                             const SpanLayout& layout, const RescoreSpec& spec = {});

/// grad += sum_t coeff[t] * d log pi(y_t | context_t) / d theta.
void accumulate_logprob_gradient(const PolicyParams& params, const SequenceTrace& trace,
                                 std::span<const double> coeff, std::span<double> grad);

/// d log pi(y_t | context_t) / d theta for one position.
std::vector<double> grad_logprob(const PolicyParams& params, const Prompt& prompt,
                                 std::span<const TokenId> tokens, Variant variant,
                                 const SpanLayout& layout, int t, const RescoreSpec& spec = {});

}  // namespace srpo::policy

#endif  // SRPO_POLICY_HPP_
