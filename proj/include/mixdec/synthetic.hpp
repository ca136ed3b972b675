#pragma once

// Planted-block benchmark graphs: users and items are split into blocks and
// each (user, item) edge appears independently with a higher probability
// inside a block than across blocks.

#include <cstdint>
#include <string>
#include <vector>

#include "mixdec/error.hpp"
#include "mixdec/graph.hpp"
#include "mixdec/rng.hpp"

namespace mixdec {

struct SyntheticGraphSpec {
  std::size_t n_users = 200;
  std::size_t n_items = 200;
  std::size_t n_blocks = 10;
  double in_block_edge_prob = 0.3;
  double cross_block_edge_prob = 0.01;
  std::size_t min_degree = 3;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_users == 0 || n_items == 0) throw ValidationError("synthetic graph needs users and items");
    if (n_blocks < 1 || n_blocks > n_users || n_blocks > n_items)
      throw ValidationError("n_blocks must be in [1, min(n_users, n_items)]");
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob(in_block_edge_prob) || !prob(cross_block_edge_prob))
      throw ValidationError("edge probabilities must be in [0, 1]");
    if (!(in_block_edge_prob > cross_block_edge_prob))
      throw ValidationError("in-block probability must exceed the cross-block probability");
  }

  std::size_t user_block(std::size_t u) const { return u * n_blocks / n_users; }
  std::size_t item_block(std::size_t i) const { return i * n_blocks / n_items; }
};

/// Samples the graph, then resamples the rows of under-degree users and the
/// columns of under-degree items until every node has at least `min_degree`
/// edges. Ids are "u<k>" / "i<k>", interned in user-major edge order so the
/// result equals what loading its own edge file yields.
inline InteractionDataset generate_synthetic(const SyntheticGraphSpec& spec) {
  spec.validate();
  const std::size_t nu = spec.n_users, ni = spec.n_items;
  if (spec.min_degree > ni || spec.min_degree > nu) throw ValidationError("min_degree exceeds the node count");
  Rng rng = make_rng(spec.seed, "synthetic");
  std::vector<std::vector<char>> adj(nu, std::vector<char>(ni, 0));
  auto prob = [&](std::size_t u, std::size_t i) {
    return spec.user_block(u) == spec.item_block(i) ? spec.in_block_edge_prob : spec.cross_block_edge_prob;
  };
  for (std::size_t u = 0; u < nu; ++u)
    for (std::size_t i = 0; i < ni; ++i) adj[u][i] = uniform01(rng) < prob(u, i);

  constexpr int kMaxRounds = 1000;
  bool ok = false;
  for (int round = 0; round < kMaxRounds && !ok; ++round) {
    ok = true;
    for (std::size_t u = 0; u < nu; ++u) {
      std::size_t deg = 0;
      for (std::size_t i = 0; i < ni; ++i) deg += adj[u][i];
      if (deg >= spec.min_degree) continue;
      ok = false;
      for (std::size_t i = 0; i < ni; ++i) adj[u][i] = uniform01(rng) < prob(u, i);
    }
    for (std::size_t i = 0; i < ni; ++i) {
      std::size_t deg = 0;
      for (std::size_t u = 0; u < nu; ++u) deg += adj[u][i];
      if (deg >= spec.min_degree) continue;
      ok = false;
      for (std::size_t u = 0; u < nu; ++u) adj[u][i] = uniform01(rng) < prob(u, i);
    }
  }
  if (!ok) throw ValidationError("synthetic graph infeasible: cannot reach the degree floor");

  InteractionDataset ds;
  for (std::size_t u = 0; u < nu; ++u)
    for (std::size_t i = 0; i < ni; ++i)
      if (adj[u][i])
        ds.interactions.push_back(
            {ds.users.intern("u" + std::to_string(u)), ds.items.intern("i" + std::to_string(i))});
  return ds;
}

}  // namespace mixdec
