#include "bergorb/weights.hpp"
#include "random_weights.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>

using namespace bergorb;
using bergorb::testing::random_admissible;
using bergorb::testing::random_weights;

namespace {

WeightSystem w_121() { return WeightSystem::from_integers(2, {{2, 1}, {3, 2}, {4, 1}}); }
WeightSystem w_11() { return WeightSystem::from_integers(2, {{1, 1}, {2, 1}}); }

// Brute-force convolution against which the library routine is checked.
std::map<std::int64_t, rational> brute_convolve(const WeightSystem &a, const WeightSystem &b)
{
  std::map<std::int64_t, rational> out;
  for (std::int64_t j = 0; j <= a.max_index() + b.max_index(); ++j) {
    rational s = 0;
    for (const auto &t : a.terms())
      for (const auto &u : b.terms())
        if (t.index + u.index == j)
          s += t.coefficient * u.coefficient;
    if (s != 0)
      out[j] = s;
  }
  return out;
}

} // namespace

TEST(ResidueMoment, Examples)
{
  EXPECT_EQ(residue_moment(w_121(), 0, 0), rational(2));
  EXPECT_EQ(residue_moment(WeightSystem::unit(1), 5, 0), rational(0));
  EXPECT_EQ(residue_moment(w_11(), 1, 1), rational(1));
  EXPECT_THROW(residue_moment(w_11(), 0, 2), std::invalid_argument);
}

TEST(CheckAdmissible, Examples)
{
  EXPECT_TRUE(check_admissible(WeightSystem::unit(1), 10));
  EXPECT_TRUE(check_admissible(w_121(), 1));
  EXPECT_FALSE(check_admissible(w_11(), 1));
  EXPECT_TRUE(check_admissible(WeightSystem::from_integers(2, {{1, 1}, {2, 4}, {3, 5}, {4, 2}}), 1));
}

TEST(CheckAdmissible, OrderIsConsistent)
{
  EXPECT_EQ(w_121().order(), 1);
  EXPECT_EQ(w_11().order(), 0);
  EXPECT_EQ(WeightSystem::unit(2).order(), kOrderNone);
  EXPECT_EQ(WeightSystem::unit(1).order(), kOrderUnbounded);
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    auto w = random_admissible(rng, 2 + trial % 3, 2, 2, 8);
    ASSERT_GE(w.order(), 1);
    EXPECT_TRUE(check_admissible(w, w.order()));
    EXPECT_FALSE(check_admissible(w, w.order() + 1));
  }
}

TEST(CheckAdmissible, ScalingInvariance)
{
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    auto w = trial % 2 ? random_admissible(rng, 3, 2, 2, 9) : random_weights(rng, 3, 6, 12);
    const rational q(7 + trial, 3);
    std::vector<WeightTerm> scaled = w.terms();
    for (auto &t : scaled)
      t.coefficient *= q;
    EXPECT_EQ(WeightSystem(w.m(), scaled).order(), w.order());
  }
}

TEST(CheckAdmissible, PermutationInvariance)
{
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto w = random_weights(rng, 4, 8, 15);
    auto terms = w.terms();
    std::shuffle(terms.begin(), terms.end(), rng);
    WeightSystem shuffled(4, terms);
    EXPECT_EQ(shuffled, w);
    EXPECT_EQ(shuffled.order(), w.order());
    EXPECT_EQ(residue_moment(shuffled, 2, 1), residue_moment(w, 2, 1));
  }
}

TEST(WeightSystemType, RejectsBadInput)
{
  EXPECT_THROW(WeightSystem(2, {}), InvalidWeightSystem);
  EXPECT_THROW(WeightSystem::from_integers(2, {{1, 0}}), InvalidWeightSystem);
  EXPECT_THROW(WeightSystem::from_integers(2, {{1, 1}, {1, 2}}), InvalidWeightSystem);
  EXPECT_THROW(WeightSystem::from_integers(0, {{1, 1}}), InvalidWeightSystem);
  EXPECT_THROW(WeightSystem::from_integers(2, {{-1, 1}}), InvalidWeightSystem);
}

TEST(SolveWeights, Examples)
{
  EXPECT_EQ(solve_weights(2, 1, {2, 4}), w_121());
  EXPECT_EQ(solve_weights(1, 3, {0, 0}), WeightSystem::unit(1));
  EXPECT_EQ(solve_weights(3, 0, {1, 3}), WeightSystem::from_integers(3, {{1, 1}, {2, 1}, {3, 1}}));
}

TEST(SolveWeights, LexicographicTieBreak)
{
  // c0 = c1 is the first feasible support for m = 2, K = 0.
  EXPECT_EQ(solve_weights(2, 0, {0, 5}), WeightSystem::from_integers(2, {{0, 1}, {1, 1}}));
  // (1, 2, 1) on {0, 1, 2} for K = 1.
  EXPECT_EQ(solve_weights(2, 1, {0, 6}),
            WeightSystem::from_integers(2, {{0, 1}, {1, 2}, {2, 1}}));
}

TEST(SolveWeights, Infeasible)
{
  EXPECT_THROW(solve_weights(2, 1, {2, 3}), Infeasible);
  EXPECT_THROW(solve_weights(3, 1, {0, 3}), Infeasible);
}

TEST(SolveWeights, ResultsAreAdmissibleAndNormalized)
{
  for (int m = 2; m <= 4; ++m) {
    for (int k = 0; k <= 2; ++k) {
      const std::int64_t width = static_cast<std::int64_t>((m - 1) * (k + 1) + 1);
      auto w = solve_weights(m, k, {1, 1 + width + 2});
      EXPECT_TRUE(check_admissible(w, k)) << "m=" << m << " K=" << k;
      rational smallest = w.terms().front().coefficient;
      for (const auto &t : w.terms())
        smallest = std::min(smallest, t.coefficient);
      EXPECT_EQ(smallest, rational(1));
    }
  }
}

TEST(Convolve, Examples)
{
  EXPECT_EQ(convolve(w_11(), w_11()), w_121());
  auto w = WeightSystem::from_integers(2, {{1, 3}, {4, 5}});
  EXPECT_EQ(convolve(w, WeightSystem::unit(2)), w);
  EXPECT_THROW(convolve(w_11(), WeightSystem::unit(3)), MismatchedOrder);
}

TEST(Convolve, MatchesBruteForceAndCommutes)
{
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    auto a = random_weights(rng, 3, 5, 10);
    auto b = random_weights(rng, 3, 5, 10);
    auto ab = convolve(a, b);
    EXPECT_EQ(ab, convolve(b, a));
    auto expected = brute_convolve(a, b);
    ASSERT_EQ(ab.size(), expected.size());
    for (const auto &t : ab.terms())
      EXPECT_EQ(t.coefficient, expected.at(t.index));
  }
}

TEST(Convolve, OrderLaw)
{
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 60; ++trial) {
    const int m = 2 + trial % 4;
    auto a = random_admissible(rng, m, 1 + trial % 2, 2, 10);
    auto b = random_admissible(rng, m, 1, 2, 10);
    EXPECT_GE(convolve(a, b).order(), a.order() + b.order() + 1);
  }
}

TEST(RootOrder, Examples)
{
  EXPECT_EQ(root_order_at_one(w_121(), 0, 1, 1), 2);
  EXPECT_EQ(root_order_at_one(w_121(), 1, 1, 1), 1);
  EXPECT_THROW(root_order_at_one(WeightSystem::unit(1), 0, 1, 1), NoNontrivialCharacter);
  EXPECT_THROW(root_order_at_one(w_121(), 0, 2, 1), std::invalid_argument);
  EXPECT_THROW(root_order_at_one(WeightSystem::from_integers(4, {{1, 1}}), 0, 1, 2),
               std::invalid_argument);
}

TEST(RootOrder, IdenticallyZeroPolynomial)
{
  // i^l kills the only term at i = 0 when l >= 1.
  EXPECT_EQ(root_order_at_one(WeightSystem::unit(3), 1, 1, 1), kInfiniteRootOrder);
  EXPECT_EQ(root_order_at_one(WeightSystem::unit(3), 0, 1, 1), 0);
}

TEST(RootOrder, NonPrimitivePowerOfLambda)
{
  // m = 4, u = 2: lambda^u = -1, so only the parity of indices matters.
  auto w = WeightSystem::from_integers(4, {{0, 1}, {1, 1}});
  EXPECT_EQ(root_order_at_one(w, 0, 2, 1), 1); // 1 - eta vanishes once
  EXPECT_EQ(root_order_at_one(w, 0, 1, 1), 0); // 1 + i != 0
}

TEST(RootOrder, EquivalentToAdmissibility)
{
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 120; ++trial) {
    const int m = 2 + trial % 4;
    auto w = trial % 3 == 0 ? random_weights(rng, m, 8, 14) : random_admissible(rng, m, 1 + trial % 2, 2, 8);
    for (int k = 0; k <= 3; ++k) {
      bool by_roots = true;
      for (int l = 0; l <= k; ++l)
        for (int u = 1; u < m; ++u) {
          const long r = root_order_at_one(w, l, u, 1);
          if (r != kInfiniteRootOrder && r < k - l + 1)
            by_roots = false;
        }
      EXPECT_EQ(check_admissible(w, k), by_roots) << w.label() << " m=" << m << " K=" << k;
    }
  }
}

TEST(RootOrder, LowerBoundForAdmissible)
{
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 30; ++trial) {
    const int m = 3 + trial % 3;
    auto w = random_admissible(rng, m, 2, 2, 9);
    for (int l = 0; l <= w.order(); ++l)
      for (int u = 1; u < m; ++u)
        for (int lam = 1; lam < m; ++lam)
          if (std::gcd(lam, m) == 1) {
            EXPECT_GE(root_order_at_one(w, l, u, lam), w.order() - l + 1);
          }
  }
}

TEST(Serialization, RoundTrip)
{
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    auto w = random_admissible(rng, 3, 1 + trial % 3, 2, 9);
    const auto text = to_json(w).dump();
    auto back = weights_from_json(nlohmann::json::parse(text));
    EXPECT_EQ(back, w);
    EXPECT_EQ(to_json(back).dump(), text);
  }
}

TEST(Serialization, FormatAndSentinels)
{
  EXPECT_EQ(to_json(w_121()).dump(), R"({"K":1,"m":2,"pairs":[[2,1,1],[3,2,1],[4,1,1]]})");
  EXPECT_EQ(to_json(WeightSystem::unit(1))["K"], "unbounded");
  EXPECT_TRUE(to_json(WeightSystem::unit(2))["K"].is_null());

  // Coefficients beyond int64 travel as decimal strings.
  rational big(integer("123456789012345678901234567890"), integer(7));
  WeightSystem w(1, {{3, big}});
  auto j = to_json(w);
  EXPECT_TRUE(j["pairs"][0][1].is_string());
  EXPECT_EQ(weights_from_json(j), w);
}

TEST(Serialization, RejectsInconsistentOrder)
{
  auto j = to_json(w_121());
  j["K"] = 2;
  EXPECT_THROW(weights_from_json(j), InvalidWeightSystem);
  j = to_json(w_121());
  j["pairs"][0][2] = 0;
  EXPECT_THROW(weights_from_json(j), InvalidWeightSystem);
}
