#pragma once

// Embedding model with optional neighbor aggregation:
//
//   H^0 = E0
//   Z^l = S H^{l-1} W_l,   H^l = act(Z^l)   (act is the identity on the last layer)
//
// S is the row-normalized adjacency with self-loops (MeanSage) or the
// symmetrically normalized adjacency with self-loops (GcnNorm). The reverse
// pass is written out by hand for this fixed family.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mixdec/error.hpp"
#include "mixdec/graph.hpp"
#include "mixdec/rng.hpp"

namespace mixdec {

enum class Aggregator : std::uint32_t { EmbeddingOnly = 0, MeanSage = 1, GcnNorm = 2 };
enum class Activation : std::uint32_t { Relu = 0, None = 1 };
enum class FinalEmbedding : std::uint32_t { LastLayer = 0, LayerMean = 1 };

struct ModelConfig {
  std::size_t dim = 128;
  std::size_t layers = 3;
  Aggregator aggregator = Aggregator::GcnNorm;
  Activation activation = Activation::Relu;
  FinalEmbedding final_embedding = FinalEmbedding::LastLayer;
  double init_scale = 0.1;
  std::uint64_t seed = 0;

  /// Number of propagation layers actually applied.
  std::size_t effective_layers() const { return aggregator == Aggregator::EmbeddingOnly ? 0 : layers; }

  void validate() const {
    if (dim < 1) throw ValidationError("dim must be >= 1");
    if (!(init_scale >= 0.0)) throw ValidationError("init_scale must be >= 0");
  }
};

/// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  void fill(double v) { std::fill(data.begin(), data.end(), v); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

struct ModelParams {
  Matrix embeddings;            // (n_users + n_items) x dim, users first
  std::vector<Matrix> weights;  // one dim x dim matrix per layer

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct ForwardState {
  std::vector<Matrix> hidden;      // H^0 .. H^L
  std::vector<Matrix> aggregated;  // S H^{l-1}, for l = 1..L
  std::vector<Matrix> pre;         // Z^l, for l = 1..L
};

struct Gradients {
  Matrix embeddings;
  std::vector<Matrix> weights;
};

/// Sparse propagation operator S and its transpose, over global node rows.
class Propagator {
 public:
  Propagator() = default;

  Propagator(const BipartiteGraph& g, Aggregator agg) : n_(g.n_nodes()) {
    if (agg == Aggregator::EmbeddingOnly) return;
    std::vector<double> deg(n_);
    for (std::size_t v = 0; v < n_; ++v) deg[v] = static_cast<double>(g.degree(node(g, v))) + 1.0;
    offsets_.assign(n_ + 1, 0);
    for (std::size_t v = 0; v < n_; ++v) {
      // Self first, then neighbors in ascending order: a fixed summation order.
      NodeId x = node(g, v);
      auto push = [&](std::size_t u) {
        cols_.push_back(u);
        vals_.push_back(agg == Aggregator::MeanSage ? 1.0 / deg[v] : 1.0 / std::sqrt(deg[v] * deg[u]));
      };
      push(v);
      for (auto y : g.neighbors(x)) push(g.global_index(NodeId{opposite(x.kind), y}));
      offsets_[v + 1] = cols_.size();
    }
    // Transpose.
    t_offsets_.assign(n_ + 1, 0);
    for (auto c : cols_) ++t_offsets_[c + 1];
    for (std::size_t v = 0; v < n_; ++v) t_offsets_[v + 1] += t_offsets_[v];
    t_cols_.resize(cols_.size());
    t_vals_.resize(vals_.size());
    std::vector<std::size_t> fill(t_offsets_.begin(), t_offsets_.end() - 1);
    for (std::size_t r = 0; r < n_; ++r)
      for (std::size_t k = offsets_[r]; k < offsets_[r + 1]; ++k) {
        t_cols_[fill[cols_[k]]] = r;
        t_vals_[fill[cols_[k]]++] = vals_[k];
      }
  }

  std::size_t n_nodes() const { return n_; }

  /// out = S x
  Matrix apply(const Matrix& x) const { return spmm(offsets_, cols_, vals_, x); }
  /// out = S^T x
  Matrix apply_transpose(const Matrix& x) const { return spmm(t_offsets_, t_cols_, t_vals_, x); }

  /// Dense copy of S, for tests.
  Matrix dense() const {
    Matrix m(n_, n_);
    for (std::size_t r = 0; r < n_; ++r)
      for (std::size_t k = offsets_[r]; k < offsets_[r + 1]; ++k) m(r, cols_[k]) += vals_[k];
    return m;
  }

 private:
  static NodeId node(const BipartiteGraph& g, std::size_t v) {
    return v < g.n_users() ? NodeId::user(static_cast<std::uint32_t>(v))
                           : NodeId::item(static_cast<std::uint32_t>(v - g.n_users()));
  }

  static Matrix spmm(const std::vector<std::size_t>& off, const std::vector<std::size_t>& cols,
                     const std::vector<double>& vals, const Matrix& x) {
    Matrix out(x.rows, x.cols);
    for (std::size_t r = 0; r + 1 < off.size(); ++r) {
      auto o = out.row(r);
      for (std::size_t k = off[r]; k < off[r + 1]; ++k) {
        auto xr = x.row(cols[k]);
        double v = vals[k];
        for (std::size_t c = 0; c < x.cols; ++c) o[c] += v * xr[c];
      }
    }
    return out;
  }

  std::size_t n_ = 0;
  std::vector<std::size_t> offsets_, cols_, t_offsets_, t_cols_;
  std::vector<double> vals_, t_vals_;
};

namespace detail {

// a (n x k) * b (k x m)
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows, b.cols);
  for (std::size_t r = 0; r < a.rows; ++r) {
    auto o = out.row(r);
    for (std::size_t k = 0; k < a.cols; ++k) {
      double v = a(r, k);
      if (v == 0.0) continue;
      auto br = b.row(k);
      for (std::size_t c = 0; c < b.cols; ++c) o[c] += v * br[c];
    }
  }
  return out;
}

// a^T * b, a (n x k), b (n x m) -> k x m
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  Matrix out(a.cols, b.cols);
  for (std::size_t r = 0; r < a.rows; ++r) {
    auto br = b.row(r);
    for (std::size_t k = 0; k < a.cols; ++k) {
      double v = a(r, k);
      if (v == 0.0) continue;
      auto o = out.row(k);
      for (std::size_t c = 0; c < b.cols; ++c) o[c] += v * br[c];
    }
  }
  return out;
}

// a * b^T, a (n x m), b (k x m) -> n x k
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows, b.rows);
  for (std::size_t r = 0; r < a.rows; ++r) {
    auto ar = a.row(r);
    for (std::size_t k = 0; k < b.rows; ++k) {
      auto br = b.row(k);
      double s = 0.0;
      for (std::size_t c = 0; c < a.cols; ++c) s += ar[c] * br[c];
      out(r, k) = s;
    }
  }
  return out;
}

}  // namespace detail

inline ModelParams init_params(const ModelConfig& cfg, std::size_t n_users, std::size_t n_items, Rng& rng) {
  cfg.validate();
  if (n_users == 0 || n_items == 0) throw ValidationError("init_params: need users and items");
  ModelParams p;
  p.embeddings = Matrix(n_users + n_items, cfg.dim);
  std::uniform_real_distribution<double> emb(-cfg.init_scale, cfg.init_scale);
  if (cfg.init_scale > 0.0)
    for (auto& v : p.embeddings.data) v = emb(rng);
  // Glorot-uniform for the square layer weights.
  double bound = std::sqrt(6.0 / static_cast<double>(2 * cfg.dim));
  std::uniform_real_distribution<double> w(-bound, bound);
  for (std::size_t l = 0; l < cfg.effective_layers(); ++l) {
    Matrix m(cfg.dim, cfg.dim);
    for (auto& v : m.data) v = w(rng);
    p.weights.push_back(std::move(m));
  }
  return p;
}

inline void check_shapes(const ModelParams& p, const ModelConfig& cfg, std::size_t n_nodes) {
  if (p.embeddings.rows != n_nodes || p.embeddings.cols != cfg.dim)
    throw ValidationError("embedding table is " + std::to_string(p.embeddings.rows) + "x" +
                          std::to_string(p.embeddings.cols) + ", expected " + std::to_string(n_nodes) + "x" +
                          std::to_string(cfg.dim));
  if (p.weights.size() != cfg.effective_layers()) throw ValidationError("layer count mismatch");
  for (const auto& w : p.weights)
    if (w.rows != cfg.dim || w.cols != cfg.dim) throw ValidationError("layer weight shape mismatch");
}

inline ForwardState forward(const Propagator& prop, const ModelParams& params, const ModelConfig& cfg) {
  check_shapes(params, cfg, prop.n_nodes() == 0 ? params.embeddings.rows : prop.n_nodes());
  ForwardState st;
  st.hidden.push_back(params.embeddings);
  std::size_t L = cfg.effective_layers();
  for (std::size_t l = 1; l <= L; ++l) {
    st.aggregated.push_back(prop.apply(st.hidden.back()));
    st.pre.push_back(detail::matmul(st.aggregated.back(), params.weights[l - 1]));
    Matrix h = st.pre.back();
    if (cfg.activation == Activation::Relu && l < L)
      for (auto& v : h.data) v = v > 0.0 ? v : 0.0;
    st.hidden.push_back(std::move(h));
  }
  return st;
}

inline ForwardState forward(const BipartiteGraph& g, const ModelParams& params, const ModelConfig& cfg) {
  return forward(Propagator(g, cfg.aggregator), params, cfg);
}

/// Final node embeddings: the last layer, or the mean over all layers.
inline Matrix final_embeddings(const ForwardState& st, const ModelConfig& cfg) {
  if (cfg.final_embedding == FinalEmbedding::LastLayer) return st.hidden.back();
  Matrix out(st.hidden[0].rows, st.hidden[0].cols);
  double inv = 1.0 / static_cast<double>(st.hidden.size());
  for (const auto& h : st.hidden)
    for (std::size_t k = 0; k < out.data.size(); ++k) out.data[k] += h.data[k];
  for (auto& v : out.data) v *= inv;
  return out;
}

inline std::vector<double> final_embedding(const ForwardState& st, const ModelConfig& cfg, std::size_t node) {
  std::vector<double> out(st.hidden[0].cols, 0.0);
  if (cfg.final_embedding == FinalEmbedding::LastLayer) {
    auto r = st.hidden.back().row(node);
    return {r.begin(), r.end()};
  }
  for (const auto& h : st.hidden) {
    auto r = h.row(node);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += r[c];
  }
  for (auto& v : out) v /= static_cast<double>(st.hidden.size());
  return out;
}

inline double score(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("score: dimension mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

/// Reverse pass: given dLoss/dFinal, returns gradients w.r.t. E0 and every W_l.
inline Gradients backward(const Propagator& prop, const ModelParams& params, const ModelConfig& cfg,
                          const ForwardState& st, const Matrix& d_final) {
  std::size_t L = cfg.effective_layers();
  Gradients g;
  g.weights.resize(L);
  double share = cfg.final_embedding == FinalEmbedding::LayerMean ? 1.0 / static_cast<double>(L + 1) : 1.0;

  Matrix d_h = d_final;
  if (share != 1.0)
    for (auto& v : d_h.data) v *= share;
  for (std::size_t l = L; l >= 1; --l) {
    Matrix d_z = d_h;
    if (cfg.activation == Activation::Relu && l < L) {
      const auto& z = st.pre[l - 1];
      for (std::size_t k = 0; k < d_z.data.size(); ++k)
        if (!(z.data[k] > 0.0)) d_z.data[k] = 0.0;
    }
    g.weights[l - 1] = detail::matmul_tn(st.aggregated[l - 1], d_z);
    Matrix d_agg = detail::matmul_nt(d_z, params.weights[l - 1]);
    d_h = prop.apply_transpose(d_agg);
    if (share != 1.0)
      for (std::size_t k = 0; k < d_h.data.size(); ++k) d_h.data[k] += share * d_final.data[k];
  }
  g.embeddings = std::move(d_h);
  return g;
}

}  // namespace mixdec
