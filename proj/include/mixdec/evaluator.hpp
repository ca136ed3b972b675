#pragma once

// Candidate-set ranking evaluation: each held-out (user, item) pair is ranked
// against n_neg sampled items the user never interacted with.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mixdec/error.hpp"
#include "mixdec/graph.hpp"
#include "mixdec/io.hpp"
#include "mixdec/model.hpp"
#include "mixdec/rng.hpp"

namespace mixdec {

struct CandidateSet {
  std::uint32_t user = 0;
  std::uint32_t ground_truth = 0;
  std::vector<std::uint32_t> negatives;

  friend bool operator==(const CandidateSet&, const CandidateSet&) = default;
};

enum class TieRule { Optimistic, Pessimistic };

struct CandidateOptions {
  std::size_t n_neg = 499;
  std::uint64_t seed = 0;
  bool per_user = false;  // one set per user (first held-out pair) instead of per pair
};

/// Negatives are drawn without replacement from items the user has not
/// interacted with in `observed` (all splits).
inline std::vector<CandidateSet> build_candidate_sets(std::span<const Interaction> held_out,
                                                      std::span<const Interaction> observed,
                                                      std::size_t n_users, std::size_t n_items,
                                                      const CandidateOptions& opt) {
  std::vector<std::vector<std::uint32_t>> seen(n_users);
  for (const auto& e : observed) {
    if (e.user >= n_users || e.item >= n_items) throw ValidationError("interaction outside the id range");
    seen[e.user].push_back(e.item);
  }
  for (auto& s : seen) {
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
  }

  std::vector<CandidateSet> out;
  std::vector<char> done(opt.per_user ? n_users : 0, 0);
  std::string deficits;
  std::vector<std::uint32_t> pool;
  for (std::size_t k = 0; k < held_out.size(); ++k) {
    const auto& e = held_out[k];
    if (opt.per_user) {
      if (done[e.user]) continue;
      done[e.user] = 1;
    }
    const auto& s = seen[e.user];
    pool.clear();
    for (std::uint32_t i = 0, p = 0; i < n_items; ++i) {
      while (p < s.size() && s[p] < i) ++p;
      if (p < s.size() && s[p] == i) continue;
      pool.push_back(i);
    }
    if (pool.size() < opt.n_neg) {
      deficits += " user " + std::to_string(e.user) + " (short by " + std::to_string(opt.n_neg - pool.size()) + ")";
      continue;
    }
    Rng rng = make_rng(opt.seed, "candidates", k);
    // Partial Fisher-Yates.
    for (std::size_t t = 0; t < opt.n_neg; ++t) std::swap(pool[t], pool[t + uniform_index(rng, pool.size() - t)]);
    out.push_back({e.user, e.item, {pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(opt.n_neg)}});
  }
  if (!deficits.empty()) throw ValidationError("too few non-interacted items:" + deficits);
  return out;
}

/// 1 + number of candidates scoring strictly higher than the ground truth
/// (optimistic), or higher-or-equal (pessimistic).
inline std::size_t rank_of(std::span<const double> scores, std::size_t truth, TieRule rule = TieRule::Optimistic) {
  if (truth >= scores.size()) throw ValidationError("rank_of: ground-truth position out of range");
  double s = scores[truth];
  std::size_t above = 0;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    if (k == truth) continue;
    if (scores[k] > s || (rule == TieRule::Pessimistic && scores[k] == s)) ++above;
  }
  return above + 1;
}

inline double mrr(std::span<const std::size_t> ranks) {
  if (ranks.empty()) throw ValidationError("mrr of an empty rank list");
  double sum = 0.0;
  for (auto r : ranks) sum += 1.0 / static_cast<double>(r);
  return sum / static_cast<double>(ranks.size());
}

inline double hit_at_k(std::span<const std::size_t> ranks, std::size_t k) {
  if (k < 1) throw ValidationError("Hit@K needs K >= 1");
  if (ranks.empty()) return 0.0;
  auto hits = std::count_if(ranks.begin(), ranks.end(), [k](std::size_t r) { return r <= k; });
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

struct MetricsReport {
  std::vector<std::size_t> ranks;
  double mrr = 0.0;
  double hit_at_k = 0.0;
  std::size_t k = 30;

  std::string to_json() const {
    std::ostringstream ss;
    ss << "{\"mrr\": " << io::format_double(mrr) << ", \"hit_at_k\": " << io::format_double(hit_at_k)
       << ", \"k\": " << k << ", \"n_sets\": " << ranks.size() << ", \"ranks\": [";
    for (std::size_t i = 0; i < ranks.size(); ++i) ss << (i ? ", " : "") << ranks[i];
    ss << "]}\n";
    return ss.str();
  }
};

inline MetricsReport report_from_ranks(std::vector<std::size_t> ranks, std::size_t k) {
  MetricsReport r;
  r.k = k;
  r.mrr = ranks.empty() ? 0.0 : mrr(ranks);
  r.hit_at_k = hit_at_k(ranks, k);
  r.ranks = std::move(ranks);
  return r;
}

/// Scores each set with final-embedding inner products. Ground truth sits at
/// position 0 of the scored list.
inline MetricsReport evaluate_embeddings(const Matrix& final_emb, std::size_t n_users,
                                         std::span<const CandidateSet> sets, std::size_t k,
                                         TieRule rule = TieRule::Optimistic) {
  std::vector<std::size_t> ranks;
  ranks.reserve(sets.size());
  std::vector<double> scores;
  for (const auto& s : sets) {
    auto eu = final_emb.row(s.user);
    scores.clear();
    scores.push_back(score(eu, final_emb.row(n_users + s.ground_truth)));
    for (auto n : s.negatives) scores.push_back(score(eu, final_emb.row(n_users + n)));
    ranks.push_back(rank_of(scores, 0, rule));
  }
  return report_from_ranks(std::move(ranks), k);
}

inline MetricsReport evaluate(const ModelParams& params, const ModelConfig& cfg, const BipartiteGraph& g,
                              std::span<const CandidateSet> sets, std::size_t k,
                              TieRule rule = TieRule::Optimistic) {
  auto st = forward(g, params, cfg);
  return evaluate_embeddings(final_embeddings(st, cfg), g.n_users(), sets, k, rule);
}

}  // namespace mixdec
