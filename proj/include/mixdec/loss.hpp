#pragma once

// Training objectives over final embeddings F (one row per node):
//
//   L_ns = -mean_t [ log s(e_v . e_pos) + log s(-e_v . e_neg) ]
//   L_m  =  mean_t | s(e_v . e_s) - w_s |,  e_s = lambda e_i + (1 - lambda) e_j
//   L_d  =  mean_t | s(e_v . e_d) - w_d |
//
// Each function optionally accumulates dLoss/dF into `grad`.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mixdec/error.hpp"
#include "mixdec/instrumentation.hpp"
#include "mixdec/log.hpp"
#include "mixdec/mixup.hpp"
#include "mixdec/model.hpp"

namespace mixdec {

// Node fields below are global embedding rows.
struct NsTerm {
  std::size_t anchor = 0, pos = 0, neg = 0;
};

struct MixTerm {
  std::size_t anchor = 0, i = 0, j = 0;
  double lambda = 0.0;
  double weight = 0.0;  // w_s
};

struct DecayTerm {
  std::size_t anchor = 0, node = 0;
  double weight = 0.0;
};

/// A component left as nullopt is absent; an empty vector is present but
/// contributes zero.
struct Batch {
  std::vector<NsTerm> ns;
  std::optional<std::vector<MixTerm>> mix;
  std::optional<std::vector<DecayTerm>> decay;
};

enum class SamplingMode { UniformOnly, Mixup, Decay, MixDec };

inline bool uses_mix(SamplingMode m) { return m == SamplingMode::Mixup || m == SamplingMode::MixDec; }
inline bool uses_decay(SamplingMode m) { return m == SamplingMode::Decay || m == SamplingMode::MixDec; }

struct LossWeights {
  double ns = 1.0, m = 1.0, d = 1.0;
};

struct LossBreakdown {
  double ns = 0.0, m = 0.0, d = 0.0, total = 0.0;
};

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(sigmoid(x)) without overflow.
inline double log_sigmoid(double x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

inline double g_mae(double p, double w) { return std::abs(p - w); }

namespace detail {

inline double dot_rows(const Matrix& f, std::size_t a, std::size_t b) { return score(f.row(a), f.row(b)); }

inline void axpy_row(Matrix& g, std::size_t r, double s, std::span<const double> x) {
  auto gr = g.row(r);
  for (std::size_t k = 0; k < x.size(); ++k) gr[k] += s * x[k];
}

// d|s(x) - w|/dx with the subgradient at the kink fixed to 0.
inline double mae_slope(double x, double w) {
  double p = sigmoid(x);
  double diff = p - w;
  if (diff == 0.0) return 0.0;
  return (diff > 0 ? 1.0 : -1.0) * p * (1.0 - p);
}

}  // namespace detail

inline double loss_ns(std::span<const NsTerm> terms, const Matrix& f, Matrix* grad = nullptr,
                      double scale = 1.0) {
  if (terms.empty()) {
    log::warn("loss_ns: empty batch");
    return 0.0;
  }
  double inv = 1.0 / static_cast<double>(terms.size());
  double sum = 0.0;
  for (const auto& t : terms) {
    double a = detail::dot_rows(f, t.anchor, t.pos);
    double b = detail::dot_rows(f, t.anchor, t.neg);
    sum += -log_sigmoid(a) - log_sigmoid(-b);
    if (grad) {
      double da = (sigmoid(a) - 1.0) * inv * scale;
      double db = sigmoid(b) * inv * scale;
      auto ev = f.row(t.anchor), ep = f.row(t.pos), en = f.row(t.neg);
      detail::axpy_row(*grad, t.anchor, da, ep);
      detail::axpy_row(*grad, t.anchor, db, en);
      detail::axpy_row(*grad, t.pos, da, ev);
      detail::axpy_row(*grad, t.neg, db, ev);
    }
  }
  return sum * inv;
}

inline double loss_m(std::span<const MixTerm> terms, const Matrix& f, Matrix* grad = nullptr,
                     double scale = 1.0) {
  ++instrumentation::counters().loss_m_calls;
  if (terms.empty()) return 0.0;
  double inv = 1.0 / static_cast<double>(terms.size());
  double sum = 0.0;
  for (const auto& t : terms) {
    auto es = mix_vectors(t.lambda, f.row(t.i), f.row(t.j));
    auto ev = f.row(t.anchor);
    double x = score(ev, es);
    sum += g_mae(sigmoid(x), t.weight);
    if (grad) {
      double dx = detail::mae_slope(x, t.weight) * inv * scale;
      detail::axpy_row(*grad, t.anchor, dx, es);
      detail::axpy_row(*grad, t.i, dx * t.lambda, ev);
      detail::axpy_row(*grad, t.j, dx * (1.0 - t.lambda), ev);
    }
  }
  return sum * inv;
}

inline double loss_d(std::span<const DecayTerm> terms, const Matrix& f, Matrix* grad = nullptr,
                     double scale = 1.0) {
  ++instrumentation::counters().loss_d_calls;
  if (terms.empty()) return 0.0;
  double inv = 1.0 / static_cast<double>(terms.size());
  double sum = 0.0;
  for (const auto& t : terms) {
    double x = detail::dot_rows(f, t.anchor, t.node);
    sum += g_mae(sigmoid(x), t.weight);
    if (grad) {
      double dx = detail::mae_slope(x, t.weight) * inv * scale;
      auto ev = f.row(t.anchor), ed = f.row(t.node);
      detail::axpy_row(*grad, t.anchor, dx, ed);
      detail::axpy_row(*grad, t.node, dx, ev);
    }
  }
  return sum * inv;
}

/// UniformOnly: L_ns. Mixup: L_ns + L_m. Decay: L_ns + L_d. MixDec: all three.
inline LossBreakdown loss_total(const Batch& batch, const Matrix& f, SamplingMode mode,
                                const LossWeights& w = {}, Matrix* grad = nullptr) {
  if (uses_mix(mode) && !batch.mix) throw ValidationError("sampling mode needs mix terms");
  if (uses_decay(mode) && !batch.decay) throw ValidationError("sampling mode needs decay terms");
  LossBreakdown out;
  out.ns = loss_ns(batch.ns, f, grad, w.ns);
  out.total = w.ns * out.ns;
  if (uses_mix(mode)) {
    out.m = loss_m(*batch.mix, f, grad, w.m);
    out.total += w.m * out.m;
  }
  if (uses_decay(mode)) {
    out.d = loss_d(*batch.decay, f, grad, w.d);
    out.total += w.d * out.d;
  }
  return out;
}

}  // namespace mixdec
