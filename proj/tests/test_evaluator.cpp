#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "mixdec/evaluator.hpp"
#include "mixdec/study.hpp"
#include "mixdec/synthetic.hpp"
#include "oracles.hpp"
#include "stats.hpp"

using namespace mixdec;

namespace {

std::vector<Interaction> complete_minus(std::size_t nu, std::size_t ni, const std::set<std::pair<int, int>>& skip) {
  std::vector<Interaction> e;
  for (std::uint32_t u = 0; u < nu; ++u)
    for (std::uint32_t i = 0; i < ni; ++i)
      if (!skip.count({static_cast<int>(u), static_cast<int>(i)})) e.push_back({u, i});
  return e;
}

}  // namespace

TEST(CandidateSets, ForcedNegatives) {
  // User 0 has seen every item but 5 and 9, so both must be drawn.
  auto observed = complete_minus(1, 10, {{0, 5}, {0, 9}});
  std::vector<Interaction> held{{0, 3}};
  auto sets = build_candidate_sets(held, observed, 1, 10, {2, 7, false});
  ASSERT_EQ(sets.size(), 1u);
  auto neg = sets[0].negatives;
  std::sort(neg.begin(), neg.end());
  EXPECT_EQ(neg, (std::vector<std::uint32_t>{5, 9}));
  EXPECT_EQ(sets[0].user, 0u);
  EXPECT_EQ(sets[0].ground_truth, 3u);
}

TEST(CandidateSets, DeficitIsAnError) {
  auto observed = complete_minus(2, 10, {{0, 5}, {1, 1}, {1, 2}, {1, 3}});
  std::vector<Interaction> held{{0, 3}, {1, 4}};
  try {
    build_candidate_sets(held, observed, 2, 10, {2, 0, false});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("user 0 (short by 1)"), std::string::npos);
    EXPECT_EQ(std::string(e.what()).find("user 1"), std::string::npos);
  }
}

TEST(CandidateSets, DeterministicAndValid) {
  Rng rng = make_rng(1, "cand");
  auto observed = oracle::random_edges(30, 80, 0.1, rng);
  std::vector<Interaction> held(observed.begin(), observed.begin() + 20);
  CandidateOptions opt{25, 11, false};
  auto a = build_candidate_sets(held, observed, 30, 80, opt);
  auto b = build_candidate_sets(held, observed, 30, 80, opt);
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.size(), held.size());
  std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
  for (const auto& e : observed) seen.insert({e.user, e.item});
  for (const auto& s : a) {
    ASSERT_EQ(s.negatives.size(), 25u);
    std::set<std::uint32_t> uniq(s.negatives.begin(), s.negatives.end());
    EXPECT_EQ(uniq.size(), 25u);
    for (auto n : s.negatives) {
      EXPECT_LT(n, 80u);
      EXPECT_FALSE(seen.count({s.user, n}));
    }
  }
  opt.seed = 12;
  EXPECT_NE(build_candidate_sets(held, observed, 30, 80, opt), a);
}

TEST(CandidateSets, PerUserKeepsFirstPair) {
  std::vector<Interaction> observed{{0, 0}, {0, 1}, {1, 2}};
  std::vector<Interaction> held{{0, 0}, {0, 1}, {1, 2}};
  auto sets = build_candidate_sets(held, observed, 2, 10, {3, 0, true});
  ASSERT_EQ(sets.size(), 2u);
  EXPECT_EQ(sets[0].ground_truth, 0u);
  EXPECT_EQ(sets[1].user, 1u);
}

TEST(CandidateSets, NegativesAreUniform) {
  // 40 eligible items, 5 drawn per set, 4000 sets.
  std::vector<Interaction> observed;
  for (std::uint32_t i = 40; i < 50; ++i) observed.push_back({0, i});
  std::vector<Interaction> held(4000, Interaction{0, 40});
  auto sets = build_candidate_sets(held, observed, 1, 50, {5, 3, false});
  std::vector<double> counts(40, 0.0);
  for (const auto& s : sets)
    for (auto n : s.negatives) counts.at(n) += 1;
  std::vector<double> expected(40, 4000.0 * 5 / 40);
  EXPECT_LT(stats::chi_square(counts, expected), stats::chi_square_critical(39));
}

TEST(RankOf, Examples) {
  std::vector<double> s(500);
  for (std::size_t k = 0; k < 500; ++k) s[k] = static_cast<double>(k);
  EXPECT_EQ(rank_of(s, 499), 1u);
  EXPECT_EQ(rank_of(s, 0), 500u);
  std::vector<double> t{0.5, 0.9, 0.8, 0.7, 0.5, 0.5, 0.1};
  EXPECT_EQ(rank_of(t, 0), 4u);
  EXPECT_EQ(rank_of(t, 0, TieRule::Pessimistic), 6u);
  EXPECT_THROW(rank_of(t, 7), ValidationError);
}

TEST(Mrr, Examples) {
  EXPECT_EQ(mrr(std::vector<std::size_t>{1}), 1.0);
  EXPECT_EQ(mrr(std::vector<std::size_t>{4}), 0.25);
  EXPECT_NEAR(mrr(std::vector<std::size_t>{1, 2, 4}), 0.58333, 5e-6);
  EXPECT_THROW(mrr(std::vector<std::size_t>{}), ValidationError);
}

TEST(HitAtK, Examples) {
  std::vector<std::size_t> r{1, 2, 4, 31, 500};
  EXPECT_EQ(hit_at_k(r, 1), 0.2);
  EXPECT_EQ(hit_at_k(r, 4), 0.6);
  EXPECT_EQ(hit_at_k(r, 30), 0.6);
  EXPECT_EQ(hit_at_k(r, 500), 1.0);
  EXPECT_THROW(hit_at_k(r, 0), ValidationError);
}

TEST(EvaluateEmbeddings, HandBuiltFixture) {
  // 2 users, 4 items, dim 2.
  Matrix f(6, 2);
  f.data = {1, 0,  0, 1,     // users
            0.9, 0,  0.2, 0.1,  0, 1,  0.5, 0.5};
  std::vector<CandidateSet> sets{{0, 1, {0, 2, 3}}, {1, 2, {0, 1, 3}}};
  // User 0 scores 0.9, 0.2, 0, 0.5: item 1 is third. User 1: item 2 scores 1, rank 1.
  auto r = evaluate_embeddings(f, 2, sets, 1);
  EXPECT_EQ(r.ranks, (std::vector<std::size_t>{3, 1}));
  EXPECT_NEAR(r.mrr, (1.0 / 3 + 1.0) / 2, 1e-15);
  EXPECT_EQ(r.hit_at_k, 0.5);
  auto j = r.to_json();
  EXPECT_NE(j.find("\"ranks\": [3, 1]"), std::string::npos);
}

TEST(EvaluateEmbeddings, MatchesSortOracle) {
  Rng rng = make_rng(2, "eval");
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(1 + uniform_index(rng, 40));
    // Coarse values so ties happen.
    for (auto& v : s) v = static_cast<double>(uniform_index(rng, 6));
    EXPECT_EQ(rank_of(s, 0), oracle::sort_rank(s, true));
    EXPECT_EQ(rank_of(s, 0, TieRule::Pessimistic), oracle::sort_rank(s, false));
  }
}

TEST(EvaluateEmbeddings, InvariantUnderPermutationAndMonotoneTransform) {
  Rng rng = make_rng(3, "eval");
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(50);
    for (auto& v : s) v = uniform01(rng) * 4 - 2;
    s[7] = s[3];
    std::size_t truth = 3;
    auto r = rank_of(s, truth);
    std::vector<std::size_t> perm(s.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> p(s.size()), e(s.size());
    std::size_t where = 0;
    for (std::size_t k = 0; k < s.size(); ++k) {
      p[k] = s[perm[k]];
      if (perm[k] == truth) where = k;
      e[k] = std::exp(3 * s[k]) + 1;
    }
    EXPECT_EQ(rank_of(p, where), r);
    EXPECT_EQ(rank_of(e, truth), r);
  }
}

TEST(Metrics, OrderingProperties) {
  Rng rng = make_rng(4, "eval");
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::size_t> ranks(1 + uniform_index(rng, 30));
    for (auto& r : ranks) r = 1 + uniform_index(rng, 500);
    double m = mrr(ranks);
    EXPECT_GE(m, hit_at_k(ranks, 1));
    EXPECT_GT(m, 0.0);
    EXPECT_LE(m, 1.0);
    double prev = 0;
    for (std::size_t k = 1; k <= 500; k += 7) {
      double h = hit_at_k(ranks, k);
      EXPECT_GE(h, prev);
      prev = h;
    }
    EXPECT_EQ(hit_at_k(ranks, 500), 1.0);
  }
}

TEST(Synthetic, BlocksWithoutCrossEdges) {
  SyntheticGraphSpec s;
  s.n_users = 40;
  s.n_items = 30;
  s.n_blocks = 5;
  s.in_block_edge_prob = 0.6;
  s.cross_block_edge_prob = 0.0;
  s.min_degree = 2;
  s.seed = 8;
  auto ds = generate_synthetic(s);
  std::vector<std::size_t> udeg(40), ideg(30);
  for (const auto& e : ds.interactions) {
    auto u = std::stoul(ds.users.name(e.user).substr(1));
    auto i = std::stoul(ds.items.name(e.item).substr(1));
    EXPECT_EQ(s.user_block(u), s.item_block(i));
    ++udeg[u];
    ++ideg[i];
  }
  for (auto d : udeg) EXPECT_GE(d, 2u);
  for (auto d : ideg) EXPECT_GE(d, 2u);
}

TEST(Synthetic, EdgeCountNearExpectation) {
  SyntheticGraphSpec s;
  s.min_degree = 0;
  s.seed = 9;
  auto ds = generate_synthetic(s);
  // 10 blocks of 20x20 in-block pairs; the rest are cross-block.
  double in = 10 * 400, cross = 200.0 * 200 - in;
  double mean = in * 0.3 + cross * 0.01;
  double var = in * 0.3 * 0.7 + cross * 0.01 * 0.99;
  EXPECT_NEAR(static_cast<double>(ds.interactions.size()), mean, 3 * std::sqrt(var));
}

TEST(Synthetic, DeterministicAndValidated) {
  SyntheticGraphSpec s;
  s.seed = 10;
  auto a = generate_synthetic(s);
  auto b = generate_synthetic(s);
  EXPECT_EQ(a.interactions, b.interactions);
  s.seed = 11;
  EXPECT_NE(generate_synthetic(s).interactions, a.interactions);

  SyntheticGraphSpec bad;
  bad.in_block_edge_prob = 0.01;
  EXPECT_THROW(generate_synthetic(bad), ValidationError);
  bad = {};
  bad.n_blocks = 0;
  EXPECT_THROW(generate_synthetic(bad), ValidationError);
  bad = {};
  bad.min_degree = 201;
  EXPECT_THROW(generate_synthetic(bad), ValidationError);
  // Blocks of one node with p_in 0.5 and no cross edges cannot reach degree 2.
  bad = {};
  bad.n_users = bad.n_items = bad.n_blocks = 4;
  bad.in_block_edge_prob = 0.5;
  bad.cross_block_edge_prob = 0.0;
  bad.min_degree = 2;
  EXPECT_THROW(generate_synthetic(bad), ValidationError);
}

namespace {

PreparedData tiny_prepared() {
  SyntheticGraphSpec s;
  s.n_users = s.n_items = 40;
  s.n_blocks = 4;
  s.seed = 1;
  auto ds = generate_synthetic(s);
  auto split = split_dataset(ds, {}, 2);
  return prepare(std::move(ds), std::move(split), {10, 3, false});
}

PipelineConfig tiny_pipeline() {
  PipelineConfig p;
  p.model.dim = 8;
  p.model.layers = 1;
  p.train.epochs = 3;
  p.train.batch_size = 64;
  p.train.learning_rate = 0.01;
  p.train.counts = {3, 2, 2};
  return p;
}

}  // namespace

TEST(Sparsity, TableShapeAndBaselineColumn) {
  auto data = tiny_prepared();
  auto cfg = tiny_pipeline();
  std::vector<SamplingMode> modes{SamplingMode::UniformOnly, SamplingMode::MixDec};
  auto t = sparsity_study(data, {0.0, 0.5}, modes, {4, 5}, cfg);
  ASSERT_EQ(t.mrr.size(), 2u);
  for (const auto& m : t.mrr) {
    ASSERT_EQ(m.size(), 2u);
    for (const auto& r : m) EXPECT_EQ(r.size(), 2u);
  }
  // Ratio 0 is a plain run with the seed applied.
  auto plain = cfg;
  plain.model.seed = plain.train.seed = plain.decay.seed = 4;
  EXPECT_EQ(t.mrr[1][0][0], run_mode(data, data.train_graph, plain, SamplingMode::MixDec).test.mrr);

  auto text = t.to_text();
  EXPECT_NE(text.find("Dropping Ratio"), std::string::npos);
  EXPECT_NE(text.find("50%"), std::string::npos);
  EXPECT_NE(text.find("Improvement"), std::string::npos);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);
}

TEST(Prepare, SetsCoverHeldOutPairs) {
  auto data = tiny_prepared();
  EXPECT_EQ(data.test_sets.size(), data.split.test.size());
  EXPECT_EQ(data.valid_sets.size(), data.split.valid.size());
  EXPECT_EQ(data.train_graph.n_edges(), data.split.train.size());
  for (const auto& s : data.test_sets) EXPECT_FALSE(data.train_graph.has_edge(s.user, s.ground_truth));
}
