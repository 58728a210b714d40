// Copyright 2026 The SRPO Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "srpo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace srpo::policy {

std::size_t Dims::bos_offset() const {
  return token_embedding_offset() + static_cast<std::size_t>(vocab_size) * embed_dim;
}
std::size_t Dims::cell_embedding_offset() const { return bos_offset() + embed_dim; }
std::size_t Dims::w1_offset() const {
  return cell_embedding_offset() + static_cast<std::size_t>(cell_rows()) * embed_dim;
}
std::size_t Dims::b1_offset() const {
  return w1_offset() + static_cast<std::size_t>(hidden_dim) * context_dim();
}
std::size_t Dims::w2_offset() const { return b1_offset() + hidden_dim; }
std::size_t Dims::b2_offset() const {
  return w2_offset() + static_cast<std::size_t>(vocab_size) * hidden_dim;
}
std::size_t Dims::param_count() const { return b2_offset() + vocab_size; }

void Dims::validate() const {
  if (vocab_size < 2) throw ConfigError("policy.vocab_size", "must be at least 2");
  if (embed_dim < 1) throw ConfigError("policy.embed_dim", "must be positive");
  if (hidden_dim < 1) throw ConfigError("policy.hidden_dim", "must be positive");
  if (max_rows < 1 || max_rows > synthgen::kMaxSide || max_cols < 1 ||
      max_cols > synthgen::kMaxSide) {
    throw ConfigError("policy.max_rows", "grid bounds must lie in 1..6");
  }
  if (context_len < 1) throw ConfigError("policy.context_len", "must be positive");
  if (eos < -1 || eos >= vocab_size) throw ConfigError("policy.eos", "out of vocabulary");
}

PolicyParams::PolicyParams(Dims dims) : dims_(dims), theta_(dims.param_count(), 0.0) {
  dims_.validate();
}

PolicyParams::PolicyParams(Dims dims, std::vector<double> theta)
    : dims_(dims), theta_(std::move(theta)) {
  dims_.validate();
  require(theta_.size() == dims_.param_count(), "PolicyParams: theta length does not match dims");
}

PolicyParams PolicyParams::random_init(const Dims& dims, Seed seed, double scale) {
  PolicyParams p(dims);
  Rng rng(derive_seed(seed, Stream::kInit, {}));
  for (double& v : p.theta_) v = scale * (2.0 * rng.uniform() - 1.0);
  return p;
}

std::uint64_t PolicyParams::hash() const {
  Fnv1a h;
  h.update(static_cast<std::uint64_t>(theta_.size()));
  h.update(std::span<const double>(theta_));
  return h.digest();
}

void PolicyParams::check_finite() const {
  for (double v : theta_) {
    if (!std::isfinite(v)) throw NumericError("policy parameters contain a non-finite value");
  }
}

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kFull: return "FULL";
    case Variant::kMaskedImage: return "MASKED_IMAGE";
    case Variant::kNoPerception: return "NO_PERCEPTION";
    case Variant::kBlind: return "BLIND";
  }
  return "?";
}

Prompt make_prompt(const synthgen::TaskInstance& task) {
  return Prompt{task.image, task.question.surface_tokens};
}

namespace {

void check_token(const Dims& d, TokenId t) {
  if (t < 0 || t >= d.vocab_size) throw ContractViolation("token id out of range");
}

int cell_row(const Dims& d, const SymbolImage& img, int cell) {
  const int r = cell / img.cols();
  const int c = cell % img.cols();
  return (r * d.max_cols + c) * synthgen::kNumCellSymbols + img.symbol(cell);
}

std::vector<int> image_rows(const Dims& d, const SymbolImage* img) {
  std::vector<int> rows;
  if (img == nullptr) return rows;
  if (img->rows() > d.max_rows || img->cols() > d.max_cols) {
    throw ContractViolation("image larger than the policy's grid bounds");
  }
  rows.reserve(img->cells());
  for (int i = 0; i < img->cells(); ++i) rows.push_back(cell_row(d, *img, i));
  return rows;
}

// Incremental context assembly. The prefix slot is a running sum divided by
// the count, so building it incrementally or from scratch gives identical
// bits.
class ContextBuilder {
 public:
  ContextBuilder(const PolicyParams& params, std::span<const int> cell_rows,
                 std::span<const TokenId> question)
      : p_(params), d_(params.dims()), E_(d_.embed_dim), fixed_(2 * E_, 0.0), sum_(E_, 0.0) {
    const auto theta = p_.theta();
    if (!cell_rows.empty()) {
      const double* base = theta.data() + d_.cell_embedding_offset();
      for (int row : cell_rows) {
        for (int k = 0; k < E_; ++k) fixed_[k] += base[static_cast<std::size_t>(row) * E_ + k];
      }
      for (int k = 0; k < E_; ++k) fixed_[k] /= static_cast<double>(cell_rows.size());
    }
    if (!question.empty()) {
      for (TokenId t : question) {
        check_token(d_, t);
        const double* e = token(t);
        for (int k = 0; k < E_; ++k) fixed_[E_ + k] += e[k];
      }
      for (int k = 0; k < E_; ++k) fixed_[E_ + k] /= static_cast<double>(question.size());
    }
  }

  void push(TokenId t) {
    check_token(d_, t);
    const double* e = token(t);
    for (int k = 0; k < E_; ++k) sum_[k] += e[k];
    ++count_;
    prev_ = t;
  }

  void write(int pos, std::span<double> ctx) const {
    std::copy(fixed_.begin(), fixed_.end(), ctx.begin());
    for (int k = 0; k < E_; ++k) {
      ctx[2 * E_ + k] = count_ > 0 ? sum_[k] / static_cast<double>(count_) : 0.0;
    }
    const double* prev = prev_ < 0 ? p_.theta().data() + d_.bos_offset() : token(prev_);
    for (int k = 0; k < E_; ++k) ctx[3 * E_ + k] = prev[k];
    ctx[4 * E_] = static_cast<double>(pos) / static_cast<double>(d_.context_len);
  }

  int count() const { return count_; }
  TokenId prev() const { return prev_; }

 private:
  const double* token(TokenId t) const {
    return p_.theta().data() + d_.token_embedding_offset() + static_cast<std::size_t>(t) * E_;
  }

  const PolicyParams& p_;
  const Dims& d_;
  int E_;
  std::vector<double> fixed_;
  std::vector<double> sum_;
  int count_ = 0;
  TokenId prev_ = -1;
};

// hidden = tanh(W1 ctx + b1); logits = W2 hidden + b2.
void forward(const PolicyParams& params, std::span<const double> ctx, std::span<double> hidden,
             std::span<double> logits) {
  const Dims& d = params.dims();
  const int D = d.context_dim();
  const int H = d.hidden_dim;
  const auto theta = params.theta();
  const double* w1 = theta.data() + d.w1_offset();
  const double* b1 = theta.data() + d.b1_offset();
  const double* w2 = theta.data() + d.w2_offset();
  const double* b2 = theta.data() + d.b2_offset();
  for (int j = 0; j < H; ++j) {
    const double* row = w1 + static_cast<std::size_t>(j) * D;
    double a = b1[j];
    for (int k = 0; k < D; ++k) a += row[k] * ctx[k];
    hidden[j] = std::tanh(a);
  }
  for (int v = 0; v < d.vocab_size; ++v) {
    const double* row = w2 + static_cast<std::size_t>(v) * H;
    double z = b2[v];
    for (int j = 0; j < H; ++j) z += row[j] * hidden[j];
    logits[v] = z;
  }
}

// In-place log-softmax of logits into log-probabilities.
void log_softmax(std::span<double> z) {
  double m = -INFINITY;
  for (double v : z) {
    if (!std::isfinite(v)) throw NumericError("non-finite logit in token distribution");
    m = std::max(m, v);
  }
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  const double lse = m + std::log(s);
  for (double& v : z) v -= lse;
}

struct Conditioning {
  std::optional<SymbolImage> masked;  // owns the corrupted image when needed
  const SymbolImage* image = nullptr;
};

Conditioning condition(const Prompt& prompt, Variant variant, const SpanLayout& layout,
                       const RescoreSpec& spec) {
  Conditioning c;
  const SymbolImage* img = prompt.image ? &*prompt.image : nullptr;
  switch (variant) {
    case Variant::kFull: c.image = img; break;
    case Variant::kBlind: c.image = nullptr; break;
    case Variant::kMaskedImage:
      if (img != nullptr) {
        c.masked = synthgen::corrupt_image(*img, spec.p_mask, spec.mask_seed);
        c.image = &*c.masked;
      }
      break;
    case Variant::kNoPerception:
      if (!layout.parse_ok) {
        throw SpanError("NO_PERCEPTION scoring requires a parsed response");
      }
      c.image = img;
      break;
  }
  return c;
}

}  // namespace

std::vector<double> encode_context(const PolicyParams& params, const SymbolImage* image,
                                   std::span<const TokenId> question,
                                   std::span<const TokenId> prefix, int pos, Variant variant) {
  const Dims& d = params.dims();
  const auto rows = image_rows(d, variant == Variant::kBlind ? nullptr : image);
  ContextBuilder b(params, rows, question);
  for (TokenId t : prefix) b.push(t);
  std::vector<double> ctx(d.context_dim());
  b.write(pos, ctx);
  return ctx;
}

std::vector<double> token_distribution(const PolicyParams& params,
                                       std::span<const double> context) {
  const Dims& d = params.dims();
  require(static_cast<int>(context.size()) == d.context_dim(),
          "token_distribution: context dimension mismatch");
  std::vector<double> hidden(d.hidden_dim);
  std::vector<double> z(d.vocab_size);
  forward(params, context, hidden, z);
  log_softmax(z);
  for (double& v : z) v = std::exp(v);
  return z;
}

SequenceTrace trace_sequence(const PolicyParams& params, const Prompt& prompt,
                             std::span<const TokenId> tokens, Variant variant,
                             const SpanLayout& layout, const RescoreSpec& spec) {
  const Dims& d = params.dims();
  const Conditioning cond = condition(prompt, variant, layout, spec);
  const int n = static_cast<int>(tokens.size());
  const int D = d.context_dim();
  const int H = d.hidden_dim;
  const int V = d.vocab_size;

  SequenceTrace tr;
  tr.length = n;
  tr.tokens.assign(tokens.begin(), tokens.end());
  tr.cell_rows = image_rows(d, cond.image);
  tr.question = prompt.question;
  tr.context.resize(static_cast<std::size_t>(n) * D);
  tr.hidden.resize(static_cast<std::size_t>(n) * H);
  tr.probs.resize(static_cast<std::size_t>(n) * V);
  tr.logp.resize(n);
  tr.prefix_count.resize(n);
  tr.prev_token.resize(n);

  const bool drop_perception = variant == Variant::kNoPerception;
  ContextBuilder b(params, tr.cell_rows, tr.question);
  for (int t = 0; t < n; ++t) {
    check_token(d, tokens[t]);
    std::span<double> ctx(tr.context.data() + static_cast<std::size_t>(t) * D, D);
    std::span<double> hid(tr.hidden.data() + static_cast<std::size_t>(t) * H, H);
    std::span<double> pr(tr.probs.data() + static_cast<std::size_t>(t) * V, V);
    b.write(b.count(), ctx);
    tr.prefix_count[t] = b.count();
    tr.prev_token[t] = b.prev();
    forward(params, ctx, hid, pr);
    log_softmax(pr);
    tr.logp[t] = pr[tokens[t]];
    for (double& v : pr) v = std::exp(v);
    if (!(drop_perception && layout.in_perception(t))) {
      b.push(tokens[t]);
      tr.kept_prefix.push_back(tokens[t]);
    }
  }
  return tr;
}

ScoredSequence score_sequence(const PolicyParams& params, const Prompt& prompt,
                              std::span<const TokenId> tokens, Variant variant,
                              const SpanLayout& layout, const RescoreSpec& spec) {
  SequenceTrace tr = trace_sequence(params, prompt, tokens, variant, layout, spec);
  return ScoredSequence{std::move(tr.tokens), std::move(tr.logp), variant};
}

ScoredSequence score_sequence(const PolicyParams& params, const synthgen::TaskInstance& task,
                              std::span<const TokenId> tokens, Variant variant, Seed mask_seed,
                              double p_mask) {
  const SpanLayout layout = rollout::parse_structured(tokens);
  return score_sequence(params, make_prompt(task), tokens, variant, layout,
                        RescoreSpec{p_mask, mask_seed});
}

namespace {

template <typename Choose>
SampledResponse generate(const PolicyParams& params, const Prompt& prompt, int max_len,
                         Variant variant, Choose&& choose) {
  const Dims& d = params.dims();
  require(variant == Variant::kFull || variant == Variant::kBlind,
          "generation supports FULL or BLIND conditioning only");
  const SymbolImage* img =
      (variant == Variant::kFull && prompt.image) ? &*prompt.image : nullptr;
  const auto rows = image_rows(d, img);
  ContextBuilder b(params, rows, prompt.question);
  std::vector<double> ctx(d.context_dim());
  std::vector<double> hid(d.hidden_dim);
  std::vector<double> lp(d.vocab_size);
  SampledResponse out;
  for (int t = 0; t < max_len; ++t) {
    b.write(t, ctx);
    forward(params, ctx, hid, lp);
    log_softmax(lp);
    const TokenId y = choose(std::span<const double>(lp));
    out.tokens.push_back(y);
    out.logp.push_back(lp[y]);
    if (y == d.eos) break;
    b.push(y);
  }
  return out;
}

}  // namespace

SampledResponse sample_response(const PolicyParams& params, const Prompt& prompt, Seed rng_seed,
                                double top_p, int max_len) {
  require(top_p > 0.0 && top_p <= 1.0, "sample_response: top_p must lie in (0, 1]");
  require(max_len >= 1, "sample_response: length cap must be positive");
  Rng rng(rng_seed);
  const int V = params.dims().vocab_size;
  std::vector<int> order(V);
  std::vector<double> p(V);
  return generate(params, prompt, max_len, Variant::kFull, [&](std::span<const double> lp) {
    for (int v = 0; v < V; ++v) p[v] = std::exp(lp[v]);
    std::iota(order.begin(), order.end(), 0);
    int keep = V;
    double mass = 0.0;
    if (top_p < 1.0) {
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return p[a] > p[b]; });
      for (keep = 0; keep < V;) {
        mass += p[order[keep++]];
        if (mass >= top_p) break;
      }
    } else {
      for (int v = 0; v < V; ++v) mass += p[v];
    }
    const double target = rng.uniform() * mass;
    double cum = 0.0;
    for (int i = 0; i < keep; ++i) {
      cum += p[order[i]];
      if (target < cum) return order[i];
    }
    return order[keep - 1];
  });
}

SampledResponse decode_greedy(const PolicyParams& params, const Prompt& prompt, int max_len,
                              Variant variant) {
  return generate(params, prompt, max_len, variant, [](std::span<const double> lp) {
    return static_cast<TokenId>(std::max_element(lp.begin(), lp.end()) - lp.begin());
  });
}

void accumulate_logprob_gradient(const PolicyParams& params, const SequenceTrace& tr,
                                 std::span<const double> coeff, std::span<double> grad) {
  const Dims& d = params.dims();
  require(static_cast<int>(coeff.size()) == tr.length, "gradient: coefficient length mismatch");
  require(grad.size() == params.size(), "gradient: buffer length mismatch");
  const int E = d.embed_dim;
  const int D = d.context_dim();
  const int H = d.hidden_dim;
  const int V = d.vocab_size;
  const auto theta = params.theta();
  const double* w1 = theta.data() + d.w1_offset();
  const double* w2 = theta.data() + d.w2_offset();
  double* g_tok = grad.data() + d.token_embedding_offset();
  double* g_bos = grad.data() + d.bos_offset();
  double* g_cell = grad.data() + d.cell_embedding_offset();
  double* g_w1 = grad.data() + d.w1_offset();
  double* g_b1 = grad.data() + d.b1_offset();
  double* g_w2 = grad.data() + d.w2_offset();
  double* g_b2 = grad.data() + d.b2_offset();

  std::vector<double> dl(V), da(H), dctx(D);
  std::vector<double> d_image(E, 0.0), d_question(E, 0.0);
  const int kept = static_cast<int>(tr.kept_prefix.size());
  // by_count[n] collects the prefix-slot gradient of every position whose
  // context averages the first n kept tokens.
  std::vector<double> by_count(static_cast<std::size_t>(kept + 1) * E, 0.0);

  for (int t = 0; t < tr.length; ++t) {
    const double c = coeff[t];
    if (c == 0.0) continue;
    const double* ctx = tr.context.data() + static_cast<std::size_t>(t) * D;
    const double* h = tr.hidden.data() + static_cast<std::size_t>(t) * H;
    const double* p = tr.probs.data() + static_cast<std::size_t>(t) * V;
    for (int v = 0; v < V; ++v) dl[v] = -c * p[v];
    dl[tr.tokens[t]] += c;

    std::fill(da.begin(), da.end(), 0.0);
    for (int v = 0; v < V; ++v) {
      g_b2[v] += dl[v];
      double* gw = g_w2 + static_cast<std::size_t>(v) * H;
      const double* w = w2 + static_cast<std::size_t>(v) * H;
      for (int j = 0; j < H; ++j) {
        gw[j] += dl[v] * h[j];
        da[j] += w[j] * dl[v];
      }
    }
    std::fill(dctx.begin(), dctx.end(), 0.0);
    for (int j = 0; j < H; ++j) {
      da[j] *= 1.0 - h[j] * h[j];
      g_b1[j] += da[j];
      double* gw = g_w1 + static_cast<std::size_t>(j) * D;
      const double* w = w1 + static_cast<std::size_t>(j) * D;
      for (int k = 0; k < D; ++k) {
        gw[k] += da[j] * ctx[k];
        dctx[k] += w[k] * da[j];
      }
    }
    for (int k = 0; k < E; ++k) {
      d_image[k] += dctx[k];
      d_question[k] += dctx[E + k];
    }
    const int n = tr.prefix_count[t];
    if (n > 0) {
      for (int k = 0; k < E; ++k) {
        by_count[static_cast<std::size_t>(n) * E + k] += dctx[2 * E + k] / static_cast<double>(n);
      }
    }
    double* g_prev = tr.prev_token[t] < 0 ? g_bos : g_tok + static_cast<std::size_t>(tr.prev_token[t]) * E;
    for (int k = 0; k < E; ++k) g_prev[k] += dctx[3 * E + k];
  }

  if (!tr.cell_rows.empty()) {
    const double inv = 1.0 / static_cast<double>(tr.cell_rows.size());
    for (int row : tr.cell_rows) {
      double* g = g_cell + static_cast<std::size_t>(row) * E;
      for (int k = 0; k < E; ++k) g[k] += d_image[k] * inv;
    }
  }
  if (!tr.question.empty()) {
    const double inv = 1.0 / static_cast<double>(tr.question.size());
    for (TokenId q : tr.question) {
      double* g = g_tok + static_cast<std::size_t>(q) * E;
      for (int k = 0; k < E; ++k) g[k] += d_question[k] * inv;
    }
  }
  // Kept token i appears in every context with n > i.
  std::vector<double> running(E, 0.0);
  for (int i = kept - 1; i >= 0; --i) {
    double* g = g_tok + static_cast<std::size_t>(tr.kept_prefix[i]) * E;
    for (int k = 0; k < E; ++k) {
      running[k] += by_count[static_cast<std::size_t>(i + 1) * E + k];
      g[k] += running[k];
    }
  }
}

std::vector<double> grad_logprob(const PolicyParams& params, const Prompt& prompt,
                                 std::span<const TokenId> tokens, Variant variant,
                                 const SpanLayout& layout, int t, const RescoreSpec& spec) {
  require(t >= 0 && t < static_cast<int>(tokens.size()), "grad_logprob: position out of range");
  // Positions after t do not influence the context at t.
  const SequenceTrace tr = trace_sequence(params, prompt, tokens.first(t + 1), variant, layout, spec);
  std::vector<double> coeff(t + 1, 0.0);
  coeff[t] = 1.0;
  std::vector<double> grad(params.size(), 0.0);
  accumulate_logprob_gradient(params, tr, coeff, grad);
  return grad;
}

}  // namespace srpo::policy
