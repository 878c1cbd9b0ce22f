#pragma once

// Small post-norm transformer encoder with a BIO token head and per-task
// sequence heads, plus hand-written reverse-mode gradients.
//
// Layout: one row per sequence position. A layer computes
//   r1  = x + MHA(x) Wo + bo            y   = LN1(r1)
//   f   = dropout(gelu(y W1 + b1)) W2 + b2
//   out = LN2(y + f)
// Only the prefix up to the last unmasked position is computed; trailing
// padding never influences real positions, so skipping it is exact.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "medctx/error.hpp"
#include "medctx/preproc.hpp"

namespace medctx {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

enum class Precision : std::uint8_t { F32, F64 };

template <typename T>
inline constexpr Precision precision_of = std::is_same_v<T, double> ? Precision::F64 : Precision::F32;

inline int precision_bits(Precision p) { return p == Precision::F64 ? 64 : 32; }

struct EncoderConfig {
  std::size_t layers = 2;
  std::size_t hidden_dim = 128;
  std::size_t heads = 4;
  std::size_t ffn_dim = 256;
  std::size_t max_len = kDefaultMaxLen;
  std::size_t vocab_size = 4096;
  double dropout_rate = 0.1;
  std::uint64_t seed = 13;
  Precision precision = Precision::F32;

  void validate() const {
    if (layers == 0 || hidden_dim == 0 || heads == 0 || ffn_dim == 0 || vocab_size <= Vocabulary::kNumSpecial)
      throw ConfigError("encoder dimensions must be positive and vocab_size must exceed the special tokens");
    if (hidden_dim % heads != 0)
      throw ConfigError("hidden_dim " + std::to_string(hidden_dim) + " not divisible by heads " +
                        std::to_string(heads));
    if (max_len < 8) throw ConfigError("max_len must be at least 8");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout_rate must lie in [0, 1)");
  }

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

template <typename T>
struct LayerParams {
  Matrix<T> wq, bq, wk, bk, wv, bv, wo, bo;
  Matrix<T> ln1_gain, ln1_bias;
  Matrix<T> w1, b1, w2, b2;
  Matrix<T> ln2_gain, ln2_bias;
};

// Affine map from concat(h[CLS], h[S], h[E]) to one task's classes.
template <typename T>
struct SequenceHead {
  std::string task;
  Matrix<T> weight;  // 3H x C
  Matrix<T> bias;    // 1 x C
  std::size_t classes() const { return static_cast<std::size_t>(weight.cols()); }
};

struct HeadSpec {
  std::string task;
  std::size_t classes;
};

template <typename T>
struct EncoderModel {
  EncoderConfig config;
  Matrix<T> token_embedding;     // V x H
  Matrix<T> position_embedding;  // L x H
  std::vector<LayerParams<T>> layers;
  Matrix<T> token_head_weight;  // H x 3
  Matrix<T> token_head_bias;    // 1 x 3
  std::vector<SequenceHead<T>> sequence_heads;

  struct Named {
    std::string name;
    Matrix<T>* value;
  };
  struct ConstNamed {
    std::string name;
    const Matrix<T>* value;
  };

  // Every parameter tensor in a fixed order; the order defines serialization,
  // initialization draws and optimizer state layout.
  std::vector<Named> parameters() {
    std::vector<Named> out;
    out.push_back({"embeddings.token", &token_embedding});
    out.push_back({"embeddings.position", &position_embedding});
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto& p = layers[l];
      const std::string pre = "layer" + std::to_string(l) + ".";
      for (auto [n, m] : {std::pair{"attn.wq", &p.wq}, {"attn.bq", &p.bq}, {"attn.wk", &p.wk}, {"attn.bk", &p.bk},
                          {"attn.wv", &p.wv}, {"attn.bv", &p.bv}, {"attn.wo", &p.wo}, {"attn.bo", &p.bo},
                          {"ln1.gain", &p.ln1_gain}, {"ln1.bias", &p.ln1_bias}, {"ffn.w1", &p.w1},
                          {"ffn.b1", &p.b1}, {"ffn.w2", &p.w2}, {"ffn.b2", &p.b2}, {"ln2.gain", &p.ln2_gain},
                          {"ln2.bias", &p.ln2_bias}})
        out.push_back({pre + n, m});
    }
    out.push_back({"token_head.weight", &token_head_weight});
    out.push_back({"token_head.bias", &token_head_bias});
    for (auto& h : sequence_heads) {
      out.push_back({"sequence_head." + h.task + ".weight", &h.weight});
      out.push_back({"sequence_head." + h.task + ".bias", &h.bias});
    }
    return out;
  }

  std::vector<ConstNamed> parameters() const {
    std::vector<ConstNamed> out;
    for (auto& p : const_cast<EncoderModel*>(this)->parameters()) out.push_back({std::move(p.name), p.value});
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += static_cast<std::size_t>(p.value->size());
    return n;
  }

  std::size_t head_index(std::string_view task) const {
    for (std::size_t i = 0; i < sequence_heads.size(); ++i)
      if (sequence_heads[i].task == task) return i;
    throw KeyError("model has no sequence head '" + std::string(task) + "'");
  }

  // Same shapes, all zeros. Used for gradient and optimizer-moment storage.
  EncoderModel zeros_like() const {
    EncoderModel z = *this;
    for (auto& p : z.parameters()) p.value->setZero();
    return z;
  }

  bool all_finite() const {
    for (const auto& p : parameters())
      if (!p.value->allFinite()) return false;
    return true;
  }
};

// Same parameters in another scalar type (used by the gradient checker).
template <typename U, typename T>
EncoderModel<U> model_cast(const EncoderModel<T>& m) {
  EncoderModel<U> out;
  out.config = m.config;
  auto cast = [](const Matrix<T>& x) { return Matrix<U>(x.template cast<U>()); };
  out.token_embedding = cast(m.token_embedding);
  out.position_embedding = cast(m.position_embedding);
  for (const auto& l : m.layers)
    out.layers.push_back({cast(l.wq), cast(l.bq), cast(l.wk), cast(l.bk), cast(l.wv), cast(l.bv), cast(l.wo),
                          cast(l.bo), cast(l.ln1_gain), cast(l.ln1_bias), cast(l.w1), cast(l.b1), cast(l.w2),
                          cast(l.b2), cast(l.ln2_gain), cast(l.ln2_bias)});
  out.token_head_weight = cast(m.token_head_weight);
  out.token_head_bias = cast(m.token_head_bias);
  for (const auto& h : m.sequence_heads) out.sequence_heads.push_back({h.task, cast(h.weight), cast(h.bias)});
  return out;
}

namespace detail {

// Portable uniform in [0, 1) from a 64-bit engine (53 random mantissa bits).
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

template <typename T>
Matrix<T> filled(std::size_t rows, std::size_t cols, T value) {
  return Matrix<T>::Constant(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols), value);
}

inline bool is_bias_or_norm(const std::string& name) {
  auto ends_with = [&](std::string_view suf) {
    return name.size() >= suf.size() && name.compare(name.size() - suf.size(), suf.size(), suf) == 0;
  };
  return ends_with("bias") || ends_with(".bq") || ends_with(".bk") || ends_with(".bv") || ends_with(".bo") ||
         ends_with(".b1") || ends_with(".b2") || ends_with(".gain");
}

}  // namespace detail

// Weights ~ uniform(-0.02, 0.02) from the config seed, biases 0, norm gains 1.
template <typename T>
EncoderModel<T> init_model(const EncoderConfig& cfg, std::span<const HeadSpec> heads) {
  cfg.validate();
  if (cfg.precision != precision_of<T>)
    throw ConfigError("config precision " + std::to_string(precision_bits(cfg.precision)) +
                      "-bit does not match model scalar type");
  const std::size_t H = cfg.hidden_dim, F = cfg.ffn_dim;
  EncoderModel<T> m;
  m.config = cfg;
  m.token_embedding = detail::filled<T>(cfg.vocab_size, H, 0);
  m.position_embedding = detail::filled<T>(cfg.max_len, H, 0);
  m.layers.resize(cfg.layers);
  for (auto& l : m.layers) {
    l.wq = l.wk = l.wv = l.wo = detail::filled<T>(H, H, 0);
    l.bq = l.bk = l.bv = l.bo = detail::filled<T>(1, H, 0);
    l.ln1_gain = l.ln2_gain = detail::filled<T>(1, H, 1);
    l.ln1_bias = l.ln2_bias = detail::filled<T>(1, H, 0);
    l.w1 = detail::filled<T>(H, F, 0);
    l.b1 = detail::filled<T>(1, F, 0);
    l.w2 = detail::filled<T>(F, H, 0);
    l.b2 = detail::filled<T>(1, H, 0);
  }
  m.token_head_weight = detail::filled<T>(H, kNumBioTags, 0);
  m.token_head_bias = detail::filled<T>(1, kNumBioTags, 0);
  for (const auto& h : heads) {
    if (h.classes < 1) throw ConfigError("sequence head '" + h.task + "' needs at least one class");
    m.sequence_heads.push_back({h.task, detail::filled<T>(3 * H, h.classes, 0), detail::filled<T>(1, h.classes, 0)});
  }
  std::mt19937_64 rng(cfg.seed);
  for (auto& p : m.parameters()) {
    if (detail::is_bias_or_norm(p.name)) continue;
    for (Eigen::Index i = 0; i < p.value->size(); ++i)
      p.value->data()[i] = static_cast<T>(-0.02 + 0.04 * detail::unit_uniform(rng));
  }
  return m;
}

template <typename T>
EncoderModel<T> init_model(const EncoderConfig& cfg, std::initializer_list<HeadSpec> heads = {}) {
  return init_model<T>(cfg, std::span<const HeadSpec>(heads.begin(), heads.size()));
}

// Seeded inverted dropout; a null pointer anywhere means inference mode.
struct Dropout {
  double rate = 0.0;
  std::mt19937_64 rng;

  Dropout(double r, std::uint64_t seed) : rate(r), rng(seed) {}

  template <typename T>
  Matrix<T> mask(Eigen::Index rows, Eigen::Index cols) {
    Matrix<T> m(rows, cols);
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = detail::unit_uniform(rng) < rate ? T(0) : keep_scale;
    return m;
  }
};

namespace detail {

template <typename T>
struct NormCache {
  Matrix<T> xhat;
  RowVec<T> inv_std;
};

template <typename T>
struct LayerCache {
  Matrix<T> input;
  Matrix<T> q, k, v;
  std::vector<Matrix<T>> probs;          // per head, n x n
  std::vector<Matrix<T>> dropped_probs;  // after dropout (aliases probs when off)
  std::vector<Matrix<T>> prob_masks;     // empty when dropout is off
  Matrix<T> context;
  NormCache<T> norm1;
  Matrix<T> normed1;
  Matrix<T> pre_act;
  Matrix<T> act_mask;  // empty when dropout is off
  Matrix<T> act;       // after dropout
  NormCache<T> norm2;
  Matrix<T> output;
};

inline constexpr double kNormEps = 1e-5;

template <typename T>
Matrix<T> layer_norm(const Matrix<T>& x, const Matrix<T>& gain, const Matrix<T>& bias, NormCache<T>& cache) {
  const Eigen::Index n = x.rows(), h = x.cols();
  cache.xhat.resize(n, h);
  cache.inv_std.resize(n);
  Matrix<T> out(n, h);
  for (Eigen::Index i = 0; i < n; ++i) {
    const T mean = x.row(i).mean();
    const T var = (x.row(i).array() - mean).square().mean();
    const T inv = T(1) / std::sqrt(var + static_cast<T>(kNormEps));
    cache.inv_std(i) = inv;
    cache.xhat.row(i) = (x.row(i).array() - mean) * inv;
    out.row(i) = cache.xhat.row(i).cwiseProduct(gain.row(0)) + bias.row(0);
  }
  return out;
}

template <typename T>
Matrix<T> layer_norm_backward(const Matrix<T>& dout, const NormCache<T>& cache, const Matrix<T>& gain,
                              Matrix<T>& dgain, Matrix<T>& dbias) {
  const Eigen::Index n = dout.rows(), h = dout.cols();
  dgain.row(0) += dout.cwiseProduct(cache.xhat).colwise().sum();
  dbias.row(0) += dout.colwise().sum();
  Matrix<T> dx(n, h);
  for (Eigen::Index i = 0; i < n; ++i) {
    RowVec<T> dxhat = dout.row(i).cwiseProduct(gain.row(0));
    const T mean_d = dxhat.mean();
    const T mean_dx = dxhat.cwiseProduct(cache.xhat.row(i)).mean();
    dx.row(i) = cache.inv_std(i) * (dxhat.array() - mean_d - cache.xhat.row(i).array() * mean_dx);
  }
  return dx;
}

template <typename T>
T gelu(T x) {
  return T(0.5) * x * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
}

template <typename T>
T gelu_grad(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
  const T pdf = std::exp(T(-0.5) * x * x) * std::numbers::inv_sqrtpi_v<T> / std::numbers::sqrt2_v<T>;
  return cdf + x * pdf;
}

template <typename T>
void add_bias(Matrix<T>& m, const Matrix<T>& bias) {
  m.rowwise() += bias.row(0);
}

// Row softmax restricted to unmasked keys; masked keys get probability 0.
template <typename T>
Matrix<T> masked_softmax(const Matrix<T>& scores, std::span<const std::uint8_t> key_mask) {
  Matrix<T> p(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    T mx = -std::numeric_limits<T>::infinity();
    for (Eigen::Index j = 0; j < scores.cols(); ++j)
      if (key_mask[static_cast<std::size_t>(j)]) mx = std::max(mx, scores(i, j));
    T sum = 0;
    for (Eigen::Index j = 0; j < scores.cols(); ++j) {
      const T e = key_mask[static_cast<std::size_t>(j)] ? std::exp(scores(i, j) - mx) : T(0);
      p(i, j) = e;
      sum += e;
    }
    p.row(i) /= sum;
  }
  return p;
}

}  // namespace detail

// Activations retained for the backward pass.
template <typename T>
struct ForwardState {
  std::vector<int> ids;
  std::vector<std::uint8_t> mask;
  Matrix<T> embed_mask;  // empty when dropout is off
  std::vector<detail::LayerCache<T>> layers;
  Matrix<T> hidden;

  std::size_t length() const { return ids.size(); }
};

template <typename T>
ForwardState<T> forward_state(const EncoderModel<T>& m, const LabeledSequence& seq, Dropout* dropout = nullptr) {
  const auto& cfg = m.config;
  if (seq.size() > cfg.max_len)
    throw LengthError("sequence length " + std::to_string(seq.size()) + " exceeds max_len " +
                      std::to_string(cfg.max_len));
  if (seq.mask.size() != seq.ids.size()) throw InputError("attention mask length differs from ids");
  const std::size_t n = seq.active_length();
  if (n == 0) throw InputError("sequence has no unmasked position");
  const auto H = static_cast<Eigen::Index>(cfg.hidden_dim);
  const auto heads = static_cast<Eigen::Index>(cfg.heads);
  const Eigen::Index d = H / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(d));

  ForwardState<T> st;
  st.ids.assign(seq.ids.begin(), seq.ids.begin() + static_cast<long>(n));
  st.mask.assign(seq.mask.begin(), seq.mask.begin() + static_cast<long>(n));
  const auto rows = static_cast<Eigen::Index>(n);

  Matrix<T> x(rows, H);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const int id = st.ids[static_cast<std::size_t>(i)];
    if (id < 0 || static_cast<std::size_t>(id) >= cfg.vocab_size)
      throw IndexError("token id " + std::to_string(id) + " outside vocabulary of " + std::to_string(cfg.vocab_size));
    x.row(i) = m.token_embedding.row(id) + m.position_embedding.row(i);
  }
  if (dropout && dropout->rate > 0) {
    st.embed_mask = dropout->template mask<T>(rows, H);
    x = x.cwiseProduct(st.embed_mask);
  }

  st.layers.resize(m.layers.size());
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const auto& p = m.layers[l];
    auto& c = st.layers[l];
    c.input = x;
    c.q = x * p.wq;
    detail::add_bias(c.q, p.bq);
    c.k = x * p.wk;
    detail::add_bias(c.k, p.bk);
    c.v = x * p.wv;
    detail::add_bias(c.v, p.bv);
    c.context.resize(rows, H);
    c.probs.resize(static_cast<std::size_t>(heads));
    c.dropped_probs.resize(static_cast<std::size_t>(heads));
    if (dropout && dropout->rate > 0) c.prob_masks.resize(static_cast<std::size_t>(heads));
    for (Eigen::Index h = 0; h < heads; ++h) {
      const auto hs = static_cast<std::size_t>(h);
      Matrix<T> scores = (c.q.middleCols(h * d, d) * c.k.middleCols(h * d, d).transpose()) * scale;
      c.probs[hs] = detail::masked_softmax<T>(scores, st.mask);
      if (dropout && dropout->rate > 0) {
        c.prob_masks[hs] = dropout->template mask<T>(rows, rows);
        c.dropped_probs[hs] = c.probs[hs].cwiseProduct(c.prob_masks[hs]);
      } else {
        c.dropped_probs[hs] = c.probs[hs];
      }
      c.context.middleCols(h * d, d) = c.dropped_probs[hs] * c.v.middleCols(h * d, d);
    }
    Matrix<T> r1 = c.context * p.wo;
    detail::add_bias(r1, p.bo);
    r1 += x;
    c.normed1 = detail::layer_norm<T>(r1, p.ln1_gain, p.ln1_bias, c.norm1);
    c.pre_act = c.normed1 * p.w1;
    detail::add_bias(c.pre_act, p.b1);
    c.act = c.pre_act.unaryExpr([](T v) { return detail::gelu(v); });
    if (dropout && dropout->rate > 0) {
      c.act_mask = dropout->template mask<T>(c.act.rows(), c.act.cols());
      c.act = c.act.cwiseProduct(c.act_mask);
    }
    Matrix<T> r2 = c.act * p.w2;
    detail::add_bias(r2, p.b2);
    r2 += c.normed1;
    c.output = detail::layer_norm<T>(r2, p.ln2_gain, p.ln2_bias, c.norm2);
    x = c.output;
  }
  st.hidden = std::move(x);
  return st;
}

// Hidden states for positions [0, active_length). Inference mode.
template <typename T>
Matrix<T> forward(const EncoderModel<T>& m, const LabeledSequence& seq) {
  return forward_state(m, seq).hidden;
}

template <typename T>
Matrix<T> token_logits(const EncoderModel<T>& m, const Matrix<T>& hidden) {
  Matrix<T> logits = hidden * m.token_head_weight;
  detail::add_bias(logits, m.token_head_bias);
  return logits;
}

template <typename T>
RowVec<T> sequence_features(const Matrix<T>& hidden, std::size_t s_pos, std::size_t e_pos) {
  const auto n = static_cast<std::size_t>(hidden.rows());
  if (s_pos == 0 || e_pos == 0 || s_pos >= n || e_pos >= n)
    throw IndexError("marker positions (" + std::to_string(s_pos) + ", " + std::to_string(e_pos) +
                     ") outside the " + std::to_string(n) + " computed positions");
  const Eigen::Index H = hidden.cols();
  RowVec<T> f(3 * H);
  f.segment(0, H) = hidden.row(0);
  f.segment(H, H) = hidden.row(static_cast<Eigen::Index>(s_pos));
  f.segment(2 * H, H) = hidden.row(static_cast<Eigen::Index>(e_pos));
  return f;
}

template <typename T>
RowVec<T> sequence_logits(const EncoderModel<T>& m, const Matrix<T>& hidden, std::size_t s_pos, std::size_t e_pos,
                          std::size_t head) {
  if (head >= m.sequence_heads.size()) throw IndexError("no sequence head " + std::to_string(head));
  const auto& h = m.sequence_heads[head];
  return sequence_features(hidden, s_pos, e_pos) * h.weight + h.bias;
}

template <typename Vec>
auto softmax(const Vec& logits) {
  using T = typename Vec::Scalar;
  RowVec<T> p = (logits.array() - logits.maxCoeff()).exp();
  return RowVec<T>(p / p.sum());
}

// First maximal index wins.
template <typename Vec>
std::size_t argmax(const Vec& v) {
  std::size_t best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) > v(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(i);
  return best;
}

// Backpropagates dhidden through the encoder stack into grads.
template <typename T>
void backward(const EncoderModel<T>& m, const ForwardState<T>& st, Matrix<T> dx, EncoderModel<T>& grads) {
  const auto H = static_cast<Eigen::Index>(m.config.hidden_dim);
  const auto heads = static_cast<Eigen::Index>(m.config.heads);
  const Eigen::Index d = H / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(d));

  for (std::size_t li = m.layers.size(); li-- > 0;) {
    const auto& p = m.layers[li];
    auto& g = grads.layers[li];
    const auto& c = st.layers[li];

    Matrix<T> dr2 = detail::layer_norm_backward<T>(dx, c.norm2, p.ln2_gain, g.ln2_gain, g.ln2_bias);
    g.w2.noalias() += c.act.transpose() * dr2;
    g.b2.row(0) += dr2.colwise().sum();
    Matrix<T> dact = dr2 * p.w2.transpose();
    if (c.act_mask.size()) dact = dact.cwiseProduct(c.act_mask);
    Matrix<T> dpre = dact.cwiseProduct(c.pre_act.unaryExpr([](T v) { return detail::gelu_grad(v); }));
    g.w1.noalias() += c.normed1.transpose() * dpre;
    g.b1.row(0) += dpre.colwise().sum();
    Matrix<T> dnormed1 = dr2 + dpre * p.w1.transpose();

    Matrix<T> dr1 = detail::layer_norm_backward<T>(dnormed1, c.norm1, p.ln1_gain, g.ln1_gain, g.ln1_bias);
    g.wo.noalias() += c.context.transpose() * dr1;
    g.bo.row(0) += dr1.colwise().sum();
    Matrix<T> dcontext = dr1 * p.wo.transpose();

    Matrix<T> dq(c.q.rows(), H), dk(c.k.rows(), H), dv(c.v.rows(), H);
    for (Eigen::Index h = 0; h < heads; ++h) {
      const auto hs = static_cast<std::size_t>(h);
      const auto dctx = dcontext.middleCols(h * d, d);
      dv.middleCols(h * d, d) = c.dropped_probs[hs].transpose() * dctx;
      Matrix<T> dprobs = dctx * c.v.middleCols(h * d, d).transpose();
      if (!c.prob_masks.empty()) dprobs = dprobs.cwiseProduct(c.prob_masks[hs]);
      const auto& P = c.probs[hs];
      Matrix<T> dscores = P.cwiseProduct(dprobs);
      const auto row_dot = dscores.rowwise().sum();
      dscores -= P.cwiseProduct(row_dot.replicate(1, P.cols()));
      dscores *= scale;
      dq.middleCols(h * d, d) = dscores * c.k.middleCols(h * d, d);
      dk.middleCols(h * d, d) = dscores.transpose() * c.q.middleCols(h * d, d);
    }
    g.wq.noalias() += c.input.transpose() * dq;
    g.bq.row(0) += dq.colwise().sum();
    g.wk.noalias() += c.input.transpose() * dk;
    g.bk.row(0) += dk.colwise().sum();
    g.wv.noalias() += c.input.transpose() * dv;
    g.bv.row(0) += dv.colwise().sum();
    dx = dr1 + dq * p.wq.transpose() + dk * p.wk.transpose() + dv * p.wv.transpose();
  }

  if (st.embed_mask.size()) dx = dx.cwiseProduct(st.embed_mask);
  for (Eigen::Index i = 0; i < dx.rows(); ++i) {
    grads.token_embedding.row(st.ids[static_cast<std::size_t>(i)]) += dx.row(i);
    grads.position_embedding.row(i) += dx.row(i);
  }
}

enum class LossMode : std::uint8_t { Token, Sequence };

template <typename T>
struct LossAndGrads {
  double loss = 0.0;
  std::size_t count = 0;  // positions (token mode) or examples (sequence mode)
  EncoderModel<T> grads;
};

namespace detail {

inline bool counts_for_token_loss(const LabeledSequence& s, std::size_t i) {
  return s.mask[i] == 1 && s.word_index[i] >= 0;
}

}  // namespace detail

// Mean cross-entropy and its gradient. Token mode averages over every real,
// non-special subtoken in the batch; sequence mode averages over examples
// using sequence head `head`.
template <typename T>
LossAndGrads<T> loss_and_grads(const EncoderModel<T>& m, std::span<const LabeledSequence> batch, LossMode mode,
                               std::size_t head = 0, Dropout* dropout = nullptr) {
  if (batch.empty()) throw InputError("empty batch");
  LossAndGrads<T> out{0.0, 0, m.zeros_like()};

  if (mode == LossMode::Token) {
    for (const auto& s : batch) {
      const std::size_t n = std::min(s.active_length(), s.size());
      for (std::size_t i = 0; i < n; ++i) out.count += detail::counts_for_token_loss(s, i) ? 1 : 0;
    }
  } else {
    if (head >= m.sequence_heads.size()) throw IndexError("no sequence head " + std::to_string(head));
    out.count = batch.size();
  }
  if (out.count == 0) return out;
  const T inv_count = T(1) / static_cast<T>(out.count);

  for (const auto& s : batch) {
    auto st = forward_state(m, s, dropout);
    const auto n = st.hidden.rows();
    Matrix<T> dhidden = Matrix<T>::Zero(n, st.hidden.cols());
    double example_loss = 0.0;

    if (mode == LossMode::Token) {
      if (s.tags.size() != s.size()) throw InputError("token-mode example without per-subtoken tags");
      Matrix<T> logits = token_logits(m, st.hidden);
      Matrix<T> dlogits = Matrix<T>::Zero(n, kNumBioTags);
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!detail::counts_for_token_loss(s, static_cast<std::size_t>(i))) continue;
        const auto gold = static_cast<Eigen::Index>(s.tags[static_cast<std::size_t>(i)]);
        RowVec<T> prob = softmax(RowVec<T>(logits.row(i)));
        example_loss -= std::log(static_cast<double>(prob(gold)));
        prob(gold) -= T(1);
        dlogits.row(i) = prob * inv_count;
      }
      auto& gw = out.grads.token_head_weight;
      gw.noalias() += st.hidden.transpose() * dlogits;
      out.grads.token_head_bias.row(0) += dlogits.colwise().sum();
      dhidden = dlogits * m.token_head_weight.transpose();
    } else {
      const auto& h = m.sequence_heads[head];
      if (s.label < 0 || static_cast<std::size_t>(s.label) >= h.classes())
        throw InputError("label " + std::to_string(s.label) + " outside " + h.task + " classes (" + s.origin() + ")");
      RowVec<T> feat = sequence_features(st.hidden, s.start_marker, s.end_marker);
      RowVec<T> prob = softmax(RowVec<T>(feat * h.weight + h.bias));
      example_loss = -std::log(static_cast<double>(prob(s.label)));
      prob(s.label) -= T(1);
      RowVec<T> dlogits = prob * inv_count;
      auto& gh = out.grads.sequence_heads[head];
      gh.weight.noalias() += feat.transpose() * dlogits;
      gh.bias.row(0) += dlogits;
      RowVec<T> dfeat = dlogits * h.weight.transpose();
      const auto H = st.hidden.cols();
      dhidden.row(0) += dfeat.segment(0, H);
      dhidden.row(static_cast<Eigen::Index>(s.start_marker)) += dfeat.segment(H, H);
      dhidden.row(static_cast<Eigen::Index>(s.end_marker)) += dfeat.segment(2 * H, H);
    }
    if (!std::isfinite(example_loss)) throw NumericError(s.origin(), "non-finite loss");
    out.loss += example_loss;
    backward(m, st, std::move(dhidden), out.grads);
  }
  out.loss /= static_cast<double>(out.count);
  return out;
}

// Loss only, no gradients; inference mode. Accumulates in the wider of T and double.
template <typename T, typename Acc = std::conditional_t<(sizeof(T) > sizeof(double)), T, double>>
Acc batch_loss(const EncoderModel<T>& m, std::span<const LabeledSequence> batch, LossMode mode, std::size_t head = 0) {
  Acc total = 0;
  std::size_t count = 0;
  for (const auto& s : batch) {
    auto hidden = forward(m, s);
    if (mode == LossMode::Token) {
      Matrix<T> logits = token_logits(m, hidden);
      for (Eigen::Index i = 0; i < hidden.rows(); ++i) {
        if (!detail::counts_for_token_loss(s, static_cast<std::size_t>(i))) continue;
        RowVec<T> prob = softmax(RowVec<T>(logits.row(i)));
        total -= std::log(static_cast<Acc>(prob(static_cast<Eigen::Index>(s.tags[static_cast<std::size_t>(i)]))));
        ++count;
      }
    } else {
      RowVec<T> prob = softmax(sequence_logits(m, hidden, s.start_marker, s.end_marker, head));
      total -= std::log(static_cast<Acc>(prob(s.label)));
      ++count;
    }
  }
  return count ? total / static_cast<Acc>(count) : Acc(0);
}

}  // namespace medctx
