#include <gtest/gtest.h>

#include <cmath>

#include <boost/math/special_functions/beta.hpp>
#include <map>

#include "mixdec/mixup.hpp"
#include "oracles.hpp"
#include "stats.hpp"

using namespace mixdec;

namespace {

// Users 0..1; user 0 has items 0, 1, 2; user 1 has item 3 only; 10 items total.
BipartiteGraph small_graph() {
  return build_graph(2, 10, std::vector<Interaction>{{0, 0}, {0, 1}, {0, 2}, {1, 3}});
}

DecaySet some_decay(std::uint32_t anchor) {
  return {NodeId::user(anchor), {{NodeId::item(7), 3, 1.0}, {NodeId::item(8), 1, 0.6}}};
}

}  // namespace

TEST(UniformNegatives, ForcedWhenOneItemLeft) {
  auto g = build_graph(1, 2, std::vector<Interaction>{{0, 0}});
  Rng rng = make_rng(1, "t");
  for (auto i : sample_uniform_negatives(g, 0, 50, rng)) EXPECT_EQ(i, 1u);
}

TEST(UniformNegatives, NoneAvailable) {
  auto g = build_graph(1, 2, std::vector<Interaction>{{0, 0}, {0, 1}});
  Rng rng = make_rng(1, "t");
  try {
    sample_uniform_negatives(g, 0, 1, rng);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("no negatives available"), std::string::npos);
  }
}

TEST(UniformNegatives, Deterministic) {
  auto g = small_graph();
  Rng a = make_rng(5, "neg"), b = make_rng(5, "neg");
  EXPECT_EQ(sample_uniform_negatives(g, 0, 100, a), sample_uniform_negatives(g, 0, 100, b));
}

TEST(UniformNegatives, ChiSquareUniformOverNonNeighbors) {
  // Exercise both the rejection path (sparse user) and the pool path (dense).
  for (std::size_t deg : {3u, 16u}) {
    std::vector<Interaction> e;
    for (std::uint32_t i = 0; i < deg; ++i) e.push_back({0, i * 1});
    auto g = build_graph(1, 20, e);
    Rng rng = make_rng(deg, "chi");
    constexpr std::size_t n = 100000;
    auto draws = sample_uniform_negatives(g, 0, n, rng);
    std::vector<double> obs(20, 0.0);
    for (auto i : draws) {
      ASSERT_FALSE(g.has_edge(0, i));
      obs[i] += 1.0;
    }
    std::vector<double> o, ex;
    for (std::uint32_t i = deg; i < 20; ++i) {
      o.push_back(obs[i]);
      ex.push_back(static_cast<double>(n) / static_cast<double>(20 - deg));
    }
    EXPECT_LT(stats::chi_square(o, ex), stats::chi_square_critical(static_cast<double>(o.size() - 1)));
  }
}

TEST(Beta, UniformCaseKs) {
  Rng rng = make_rng(10, "beta");
  std::vector<double> xs(100000);
  for (auto& x : xs) x = sample_beta({1.0, 1.0}, rng);
  EXPECT_LT(stats::ks_statistic(xs, [](double x) { return x; }), stats::ks_critical(xs.size()));
}

TEST(Beta, GoodnessOfFitAcrossShapes) {
  for (auto p : {BetaParams{0.2, 0.5}, BetaParams{5, 5}, BetaParams{8, 0.2}, BetaParams{0.5, 0.5}}) {
    Rng rng = make_rng(11, "beta-ks", static_cast<std::uint64_t>(p.alpha * 100 + p.beta));
    std::vector<double> xs(100000);
    for (auto& x : xs) {
      x = sample_beta(p, rng);
      ASSERT_GE(x, 0.0);
      ASSERT_LE(x, 1.0);
    }
    auto cdf = [&](double x) { return boost::math::ibeta(p.alpha, p.beta, x); };
    EXPECT_LT(stats::ks_statistic(xs, cdf), stats::ks_critical(xs.size())) << p.alpha << "," << p.beta;
  }
}

TEST(Beta, DefaultMeanWithinThreeStandardErrors) {
  Rng rng = make_rng(12, "beta-mean");
  BetaParams p{0.2, 0.5};
  std::vector<double> xs(100000);
  for (auto& x : xs) x = sample_beta(p, rng);
  double mu = p.alpha / (p.alpha + p.beta);
  double var = p.alpha * p.beta / ((p.alpha + p.beta) * (p.alpha + p.beta) * (p.alpha + p.beta + 1));
  EXPECT_NEAR(mu, 0.2857, 1e-4);
  EXPECT_LT(std::abs(stats::mean(xs) - mu), 3 * std::sqrt(var / static_cast<double>(xs.size())));
}

TEST(Beta, SymmetricFiveFiveIsCentral) {
  Rng rng = make_rng(13, "beta-55");
  std::size_t central = 0;
  std::vector<double> xs(100000);
  for (auto& x : xs) {
    x = sample_beta({5, 5}, rng);
    if (x > 0.2 && x < 0.8) ++central;
  }
  EXPECT_NEAR(stats::mean(xs), 0.5, 0.005);
  EXPECT_GT(static_cast<double>(central) / 1e5, 0.9);
}

TEST(Beta, RejectsNonPositive) {
  EXPECT_THROW((BetaParams{0.0, 1.0}.validate()), ValidationError);
  EXPECT_THROW((BetaParams{1.0, -1.0}.validate()), ValidationError);
}

TEST(MixedWeight, Examples) {
  EXPECT_DOUBLE_EQ(mixed_weight(0.5, 1.0, 0.0), 0.5);
  EXPECT_EQ(mixed_weight(1.0, 0.37, 0.9), 0.37);
  EXPECT_EQ(mixed_weight(0.0, 0.37, 0.9), 0.9);
  for (double l : {0.0, 0.1, 0.33, 0.999, 1.0}) EXPECT_EQ(mixed_weight(l, 1.0, 1.0), 1.0);
}

TEST(MixedWeight, ConvexOverRandomDraws) {
  Rng rng = make_rng(14, "mw");
  for (int t = 0; t < 100000; ++t) {
    double l = sample_beta({0.2, 0.5}, rng), a = uniform01(rng), b = uniform01(rng);
    double w = mixed_weight(l, a, b);
    ASSERT_GE(w, std::min(a, b) - 1e-15);
    ASSERT_LE(w, std::max(a, b) + 1e-15);
  }
}

TEST(MixVectors, Endpoints) {
  std::vector<double> a{1.5, -2.0, 0.1}, b{0.3, 4.0, -7.0};
  EXPECT_EQ(mix_vectors(0.0, a, b), b);
  EXPECT_EQ(mix_vectors(1.0, a, b), a);
  for (double l : {0.0, 0.2, 0.77, 1.0}) {
    auto m = mix_vectors(l, a, a);
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(m[k], a[k], 1e-15 * std::abs(a[k]) * 4);
  }
}

TEST(MixVectors, ElementwiseOracle) {
  Rng rng = make_rng(15, "mv");
  std::vector<double> a(8), b(8);
  for (auto& x : a) x = uniform01(rng) * 2 - 1;
  for (auto& x : b) x = uniform01(rng) * 2 - 1;
  auto s = mix_vectors(0.3, a, b);
  for (int k = 0; k < 8; ++k) EXPECT_DOUBLE_EQ(s[k], 0.3 * a[k] + 0.7 * b[k]);
}

TEST(MixVectors, DimensionMismatch) {
  std::vector<double> a(3), b(4);
  EXPECT_THROW(mix_vectors(0.5, a, b), ValidationError);
}

TEST(PlanMixPairs, ZeroCountGivesEmptyPlan) {
  auto g = small_graph();
  Rng rng = make_rng(1, "plan");
  std::vector<std::uint32_t> neg{5, 6};
  EXPECT_TRUE(plan_mix_pairs(g, 0, 0, neg, nullptr, {20, 0, 5}, MixMode::Mixup, {}, rng).empty());
}

TEST(PlanMixPairs, SinglePositiveOnlyPairsWithNegatives) {
  auto g = small_graph();
  Rng rng = make_rng(2, "plan");
  std::vector<std::uint32_t> neg{5, 6, 9};
  auto plan = plan_mix_pairs(g, 1, 3, neg, nullptr, {20, 200, 5}, MixMode::Mixup, {}, rng);
  ASSERT_EQ(plan.size(), 200u);
  for (const auto& e : plan) {
    EXPECT_EQ(e.kind, PairKind::PosNeg);
    EXPECT_EQ(e.i, 3u);
    EXPECT_EQ(e.w_i, 1.0);
    EXPECT_EQ(e.w_j, 0.0);
    EXPECT_NE(std::find(neg.begin(), neg.end(), e.j), neg.end());
  }
}

TEST(PlanMixPairs, MixupKindsAndInvariants) {
  auto g = small_graph();
  Rng rng = make_rng(3, "plan");
  std::vector<std::uint32_t> neg{5, 6};
  auto ds = some_decay(0);
  auto plan = plan_mix_pairs(g, 0, 1, neg, &ds, {20, 3000, 5}, MixMode::Mixup, {}, rng);
  std::map<PairKind, int> kinds;
  for (const auto& e : plan) {
    ++kinds[e.kind];
    EXPECT_EQ(e.i, 1u);
    EXPECT_EQ(e.w_i, 1.0);
    double ws = mixed_weight(e.lambda, e.w_i, e.w_j);
    EXPECT_GE(ws, 0.0);
    EXPECT_LE(ws, 1.0);
    if (e.kind == PairKind::PosPos) {
      EXPECT_TRUE(g.has_edge(0, e.j));
      EXPECT_NE(e.j, 1u);  // another positive
      EXPECT_EQ(ws, 1.0);
    }
  }
  EXPECT_EQ(kinds.count(PairKind::PosDecay), 0u);  // Mixup mode never uses decay nodes
  // Uniform choice between the two available kinds.
  EXPECT_NEAR(kinds[PairKind::PosPos] / 3000.0, 0.5, 0.05);
}

TEST(PlanMixPairs, MixDecAddsDecayPairs) {
  auto g = small_graph();
  Rng rng = make_rng(4, "plan");
  std::vector<std::uint32_t> neg{5, 6};
  auto ds = some_decay(0);
  auto plan = plan_mix_pairs(g, 0, 0, neg, &ds, {20, 3000, 5}, MixMode::MixDec, {}, rng);
  std::map<PairKind, int> kinds;
  for (const auto& e : plan) {
    ++kinds[e.kind];
    if (e.kind == PairKind::PosDecay) {
      EXPECT_TRUE(e.j == 7 || e.j == 8);
      EXPECT_EQ(e.w_j, e.j == 7 ? 1.0 : 0.6);
    }
  }
  for (auto k : {PairKind::PosPos, PairKind::PosNeg, PairKind::PosDecay})
    EXPECT_NEAR(kinds[k] / 3000.0, 1.0 / 3.0, 0.05);
}

TEST(PlanMixPairs, EmptyDecaySetFallsBackToMixupKinds) {
  auto g = small_graph();
  Rng rng = make_rng(5, "plan");
  std::vector<std::uint32_t> neg{5};
  DecaySet empty{NodeId::user(0), {}};
  instrumentation::counters().reset();
  auto plan = plan_mix_pairs(g, 0, 0, neg, &empty, {20, 50, 5}, MixMode::MixDec, {}, rng);
  EXPECT_EQ(plan.size(), 50u);
  for (const auto& e : plan) EXPECT_NE(e.kind, PairKind::PosDecay);
  EXPECT_EQ(instrumentation::counters().decay_fallbacks, 1u);
}

TEST(PlanMixPairs, ProportionsAreConfigurable) {
  auto g = small_graph();
  Rng rng = make_rng(6, "plan");
  std::vector<std::uint32_t> neg{5};
  auto plan = plan_mix_pairs(g, 0, 0, neg, nullptr, {20, 500, 5}, MixMode::Mixup, {}, rng, {0.0, 1.0, 1.0});
  for (const auto& e : plan) EXPECT_EQ(e.kind, PairKind::PosNeg);
  EXPECT_THROW((KindProportions{0, 0, 0}.validate()), ValidationError);
}

TEST(PlanMixPairs, DeterministicAndRejectsNonPositive) {
  auto g = small_graph();
  std::vector<std::uint32_t> neg{5, 6};
  auto ds = some_decay(0);
  Rng a = make_rng(7, "plan"), b = make_rng(7, "plan");
  EXPECT_EQ(plan_mix_pairs(g, 0, 2, neg, &ds, {}, MixMode::MixDec, {}, a),
            plan_mix_pairs(g, 0, 2, neg, &ds, {}, MixMode::MixDec, {}, b));
  EXPECT_THROW(plan_mix_pairs(g, 0, 5, neg, &ds, {}, MixMode::MixDec, {}, a), ValidationError);
}

TEST(PlanMixPairs, LambdaFollowsBeta) {
  auto g = small_graph();
  Rng rng = make_rng(8, "plan-ks");
  std::vector<std::uint32_t> neg{5, 6};
  BetaParams p{0.2, 0.5};
  std::vector<double> lambdas;
  for (int t = 0; t < 4000; ++t)
    for (const auto& e : plan_mix_pairs(g, 0, 0, neg, nullptr, {20, 5, 5}, MixMode::Mixup, p, rng))
      lambdas.push_back(e.lambda);
  auto cdf = [&](double x) { return boost::math::ibeta(p.alpha, p.beta, x); };
  EXPECT_LT(stats::ks_statistic(lambdas, cdf), stats::ks_critical(lambdas.size()));
}
