#pragma once

// Mixup sampling: uniform negatives, Beta-distributed mixing coefficients and
// plans for synthetic nodes built by interpolating a positive item with
// another positive, a negative, or a decay item.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "mixdec/decay.hpp"
#include "mixdec/error.hpp"
#include "mixdec/graph.hpp"
#include "mixdec/instrumentation.hpp"
#include "mixdec/log.hpp"
#include "mixdec/rng.hpp"

namespace mixdec {

struct BetaParams {
  double alpha = 0.2;
  double beta = 0.5;

  void validate() const {
    if (!(alpha > 0.0 && beta > 0.0)) throw ValidationError("Beta parameters must be positive");
  }
};

enum class PairKind : std::uint8_t { PosPos, PosNeg, PosDecay };

struct MixPlanEntry {
  std::uint32_t anchor = 0;  // user
  std::uint32_t i = 0;       // positive item
  std::uint32_t j = 0;       // partner item
  double w_i = 1.0;
  double w_j = 0.0;
  double lambda = 0.0;
  PairKind kind = PairKind::PosNeg;

  friend bool operator==(const MixPlanEntry&, const MixPlanEntry&) = default;
};

struct SamplerCounts {
  std::size_t c = 20;    // negatives per positive pair
  std::size_t c_m = 5;   // mixed pairs per positive pair
  std::size_t c_d = 5;   // decay draws per positive pair
};

enum class MixMode { Mixup, MixDec };

/// Relative frequency of each pair kind among the available kinds.
struct KindProportions {
  double pos_pos = 1.0;
  double pos_neg = 1.0;
  double pos_decay = 1.0;

  void validate() const {
    if (pos_pos < 0 || pos_neg < 0 || pos_decay < 0 || pos_pos + pos_neg + pos_decay <= 0)
      throw ValidationError("pair-kind proportions must be non-negative with a positive sum");
  }
};

/// `c` items drawn uniformly (with replacement) from those not adjacent to
/// `user`.
inline std::vector<std::uint32_t> sample_uniform_negatives(const BipartiteGraph& g, std::uint32_t user,
                                                           std::size_t c, Rng& rng) {
  std::size_t deg = g.items_of(user).size();
  if (deg >= g.n_items()) throw ValidationError("no negatives available for user " + std::to_string(user));
  std::vector<std::uint32_t> out;
  out.reserve(c);
  if (deg * 2 <= g.n_items()) {
    // Rejection sampling accepts with probability >= 1/2.
    while (out.size() < c) {
      auto item = static_cast<std::uint32_t>(uniform_index(rng, g.n_items()));
      if (!g.has_edge(user, item)) out.push_back(item);
    }
  } else {
    std::vector<std::uint32_t> pool;
    pool.reserve(g.n_items() - deg);
    for (std::uint32_t i = 0; i < g.n_items(); ++i)
      if (!g.has_edge(user, i)) pool.push_back(i);
    for (std::size_t k = 0; k < c; ++k) out.push_back(pool[uniform_index(rng, pool.size())]);
  }
  return out;
}

namespace detail {

// log of a Gamma(shape, 1) variate; shapes below 1 use the boost
// Gamma(a) = Gamma(a + 1) * U^(1/a) in log space so tiny shapes cannot
// underflow to zero.
inline double log_gamma_variate(double shape, Rng& rng) {
  if (shape >= 1.0) return std::log(std::gamma_distribution<double>(shape, 1.0)(rng));
  double g = std::gamma_distribution<double>(shape + 1.0, 1.0)(rng);
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  while (u == 0.0) u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  return std::log(g) + std::log(u) / shape;
}

}  // namespace detail

/// Beta(alpha, beta) draw as X / (X + Y) with X ~ Gamma(alpha), Y ~ Gamma(beta).
inline double sample_beta(const BetaParams& p, Rng& rng) {
  double lx = detail::log_gamma_variate(p.alpha, rng);
  double ly = detail::log_gamma_variate(p.beta, rng);
  // X / (X + Y) = 1 / (1 + exp(ly - lx))
  double lambda = 1.0 / (1.0 + std::exp(ly - lx));
  return std::clamp(lambda, 0.0, 1.0);
}

inline double mixed_weight(double lambda, double w_i, double w_j) {
  return lambda * w_i + (1.0 - lambda) * w_j;
}

inline std::vector<double> mix_vectors(double lambda, std::span<const double> e_i, std::span<const double> e_j) {
  if (e_i.size() != e_j.size()) throw ValidationError("mix_vectors: dimension mismatch");
  ++instrumentation::counters().mix_vectors;
  std::vector<double> out(e_i.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = lambda * e_i[k] + (1.0 - lambda) * e_j[k];
  return out;
}

/// Plans `counts.c_m` synthetic nodes for the positive edge (anchor, positive).
/// Each entry picks a kind among those available, a partner j and a fresh
/// lambda. PosPos needs a second positive, PosNeg a sampled negative and
/// PosDecay (MixDec only) a non-empty decay set.
inline std::vector<MixPlanEntry> plan_mix_pairs(const BipartiteGraph& g, std::uint32_t anchor,
                                                std::uint32_t positive,
                                                std::span<const std::uint32_t> negatives,
                                                const DecaySet* decay, const SamplerCounts& counts,
                                                MixMode mode, const BetaParams& beta, Rng& rng,
                                                const KindProportions& proportions = {}) {
  if (!g.has_edge(anchor, positive)) throw ValidationError("plan_mix_pairs: positive is not adjacent to anchor");
  ++instrumentation::counters().mix_plans;
  std::vector<MixPlanEntry> plan;
  if (counts.c_m == 0) return plan;

  auto positives = g.items_of(anchor);
  bool pos_pos = positives.size() >= 2;
  bool pos_neg = !negatives.empty();
  bool pos_decay = mode == MixMode::MixDec && decay != nullptr && !decay->empty();
  if (mode == MixMode::MixDec && !pos_decay) {
    // Falls back to the Mixup kinds; reported once per process.
    if (instrumentation::counters().decay_fallbacks++ == 0)
      log::info("plan_mix_pairs: empty decay set for user " + std::to_string(anchor) + ", using Mixup pair kinds");
  }

  double w_pp = pos_pos ? proportions.pos_pos : 0.0;
  double w_pn = pos_neg ? proportions.pos_neg : 0.0;
  double w_pd = pos_decay ? proportions.pos_decay : 0.0;
  double total = w_pp + w_pn + w_pd;
  if (total <= 0.0) return plan;

  plan.reserve(counts.c_m);
  for (std::size_t m = 0; m < counts.c_m; ++m) {
    MixPlanEntry e;
    e.anchor = anchor;
    e.i = positive;
    e.w_i = 1.0;
    double pick = uniform01(rng) * total;
    if (pick < w_pp) {
      e.kind = PairKind::PosPos;
      // Uniform over the other positives.
      auto self = static_cast<std::size_t>(std::lower_bound(positives.begin(), positives.end(), positive) -
                                           positives.begin());
      std::size_t k = uniform_index(rng, positives.size() - 1);
      if (k >= self) ++k;
      e.j = positives[k];
      e.w_j = 1.0;
    } else if (pick < w_pp + w_pn) {
      e.kind = PairKind::PosNeg;
      e.j = negatives[uniform_index(rng, negatives.size())];
      e.w_j = 0.0;
    } else {
      e.kind = PairKind::PosDecay;
      const auto& d = decay->entries[uniform_index(rng, decay->entries.size())];
      e.j = d.node.index;
      e.w_j = d.weight;
    }
    e.lambda = sample_beta(beta, rng);
    plan.push_back(e);
  }
  return plan;
}

}  // namespace mixdec
