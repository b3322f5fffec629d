// Copyright 2026 The dval Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <atomic>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "dval/oracles.hpp"
#include "test_util.hpp"

namespace dval {
namespace {

MaskFunctionOracle additive(std::vector<double> w) {
  const std::size_t n = w.size();
  return MaskFunctionOracle(n, [w](std::uint64_t m) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (m >> i & 1U) s += w[i];
    }
    return s;
  });
}

MaskFunctionOracle random_game(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto table = std::make_shared<std::vector<double>>(std::size_t{1} << n);
  for (auto& x : *table) x = u(gen);
  return MaskFunctionOracle(n, [table](std::uint64_t m) { return (*table)[m]; });
}

TEST(ExactLoo, ConstantAndAdditive) {
  const MaskFunctionOracle constant(6, [](std::uint64_t) { return 0.7; });
  for (double x : exact_loo(constant)) EXPECT_EQ(x, 0.0);
  const std::vector<double> w{0.5, -1.25, 2.0, 0.0};
  const auto v = exact_loo(additive(w));
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(v[i], w[i], 1e-15);
}

TEST(ExactLoo, CallsOraclePlusOne) {
  std::atomic<int> calls{0};
  const MaskFunctionOracle counting(7, [&](std::uint64_t m) {
    ++calls;
    return static_cast<double>(m % 5);
  });
  exact_loo(counting);
  EXPECT_EQ(calls.load(), 8);
}

TEST(ExactLoo, KnnFixture) {
  const auto inst = testing::pattern_instance({1, 0, 1});
  const KnnUtilityOracle oracle(inst.train, inst.val, {2});
  EXPECT_EQ(exact_loo(oracle), (std::vector<double>{0.0, -0.5, 0.0}));
}

TEST(ExactShapley, ConstantAndAdditive) {
  const MaskFunctionOracle constant(5, [](std::uint64_t) { return 3.0; });
  double sum = 0.0;
  for (double x : exact_shapley(constant)) {
    EXPECT_EQ(x, 0.0);
    sum += x;
  }
  EXPECT_EQ(sum, 0.0);
  const std::vector<double> w{0.5, -1.25, 2.0, 0.0, 1e-3};
  const auto v = exact_shapley(additive(w));
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(v[i], w[i], 1e-14);
}

TEST(ExactShapley, KnnFixture) {
  const auto inst = testing::pattern_instance({1, 0, 1});
  const auto v = exact_shapley(KnnUtilityOracle(inst.train, inst.val, {2}));
  EXPECT_NEAR(v[0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(v[1], -1.0 / 6.0, 1e-15);
  EXPECT_NEAR(v[2], 1.0 / 3.0, 1e-15);
}

TEST(ExactShapley, MatchesSubsetWeightFormulaOnRandomGames) {
  for (std::size_t n = 1; n <= 10; ++n) {
    const auto game = random_game(n, 100 + n);
    const auto fast = exact_shapley(game);
    const auto slow = testing::brute_shapley(n, [&](std::uint64_t m) {
      std::vector<std::uint8_t> mem(n);
      for (std::size_t b = 0; b < n; ++b) mem[b] = m >> b & 1U;
      return game.evaluate(mem);
    });
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(fast[i], slow[i], 1e-12);
  }
}

TEST(ExactShapley, Axioms) {
  std::mt19937_64 gen(31);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + trial % 9;
    const auto a = random_game(n, gen());
    const auto b = random_game(n, gen());
    const auto va = exact_shapley(a);
    const auto vb = exact_shapley(b);

    // Group rationality.
    const std::vector<std::uint8_t> full(n, 1), none(n, 0);
    double sum = 0.0;
    for (double x : va) sum += x;
    EXPECT_LE(std::abs(sum - (a.evaluate(full) - a.evaluate(none))), 1e-9);

    // Additivity.
    const MaskFunctionOracle ab(n, [&](std::uint64_t m) {
      std::vector<std::uint8_t> mem(n);
      for (std::size_t t = 0; t < n; ++t) mem[t] = m >> t & 1U;
      return a.evaluate(mem) + b.evaluate(mem);
    });
    const auto vab = exact_shapley(ab);
    for (std::size_t i = 0; i < n; ++i) EXPECT_LE(std::abs(vab[i] - va[i] - vb[i]), 1e-9);

    // Symmetry: make point n-1 a duplicate of point 0 by defining utility on a
    // multiset where the two are interchangeable.
    const MaskFunctionOracle sym(n, [&](std::uint64_t m) {
      const std::uint64_t hi = std::uint64_t{1} << (n - 1);
      const bool has0 = m & 1U, hasd = m & hi;
      std::uint64_t canon = m & ~hi & ~std::uint64_t{1};
      if (has0 && hasd) canon |= 1U | hi;
      else if (has0 || hasd) canon |= 1U;
      std::vector<std::uint8_t> mem(n);
      for (std::size_t t = 0; t < n; ++t) mem[t] = canon >> t & 1U;
      return a.evaluate(mem);
    });
    const auto vs = exact_shapley(sym);
    EXPECT_LE(std::abs(vs[0] - vs[n - 1]), 1e-12);
  }
}

TEST(ExactShapley, MemoizationAndThreadsAreBitIdentical) {
  std::mt19937_64 gen(3);
  const auto train = testing::random_dataset(gen, 11, 2, 3);
  const auto val = testing::random_dataset(gen, 4, 2, 3);
  const KnnUtilityOracle oracle(train, val, {3});
  const auto memo = exact_shapley(oracle, {kExactShapleyCap, true, 1});
  EXPECT_EQ(exact_shapley(oracle, {kExactShapleyCap, false, 1}), memo);
  EXPECT_EQ(exact_shapley(oracle, {kExactShapleyCap, true, 4}), memo);
  const auto game = random_game(9, 1);
  EXPECT_EQ(exact_shapley(game, {20, false, 1}), exact_shapley(game, {20, true, 3}));
}

TEST(ExactShapley, EachSubsetEvaluatedOnceWhenMemoized) {
  std::atomic<int> calls{0};
  const MaskFunctionOracle counting(8, [&](std::uint64_t m) {
    ++calls;
    return static_cast<double>(m);
  });
  exact_shapley(counting);
  EXPECT_EQ(calls.load(), 256);
}

TEST(ExactShapley, RefusesAboveCap) {
  const MaskFunctionOracle big(25, [](std::uint64_t) { return 0.0; });
  try {
    exact_shapley(big);
    FAIL() << "expected refusal";
  } catch (const SubsetCapExceeded& e) {
    EXPECT_NE(std::string(e.what()).find("20"), std::string::npos) << e.what();
  }
  const MaskFunctionOracle small(6, [](std::uint64_t) { return 0.0; });
  EXPECT_THROW(exact_shapley(small, {5, true, 1}), SubsetCapExceeded);
}

TEST(Oracles, FailureNamesTheSubset) {
  const MaskFunctionOracle bad(4, [](std::uint64_t m) {
    if (m == 0b0101) throw std::runtime_error("boom");
    return 0.0;
  });
  try {
    exact_shapley(bad);
    FAIL() << "expected OracleError";
  } catch (const OracleError& e) {
    EXPECT_NE(std::string(e.what()).find("{0,2}"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("boom"), std::string::npos) << e.what();
  }
  const MaskFunctionOracle nan(3, [](std::uint64_t m) { return m == 7 ? std::nan("") : 0.0; });
  EXPECT_THROW(exact_loo(nan), OracleError);
}

TEST(TabulatedOracle, ParsesAndRejects) {
  const auto t = TabulatedOracle::parse("# game\n0 0\n1 0.5\n0x2 0.25\n3 1\n\n", 2);
  const auto v = exact_shapley(t);
  EXPECT_NEAR(v[0], 0.625, 1e-15);
  EXPECT_NEAR(v[1], 0.375, 1e-15);
  const auto partial = TabulatedOracle::parse("0 0\n3 1\n", 2);
  EXPECT_NO_THROW(exact_loo(TabulatedOracle::parse("3 1\n1 0\n2 0\n", 2)));
  EXPECT_THROW(exact_shapley(partial), OracleError);
  EXPECT_THROW(TabulatedOracle::parse("zz 1\n", 2), DataError);
  EXPECT_THROW(TabulatedOracle::parse("4 1\n", 2), DataError);
  EXPECT_THROW(TabulatedOracle::parse("1 x\n", 2), DataError);
  EXPECT_THROW(TabulatedOracle::parse("1 1\n1 2\n", 2), DataError);
}

TEST(SamplePermutation, IsPermutationAndDeterministic) {
  for (std::uint64_t idx = 0; idx < 20; ++idx) {
    auto p = sample_permutation(13, 42, idx);
    EXPECT_EQ(p, sample_permutation(13, 42, idx));
    std::set<std::size_t> s(p.begin(), p.end());
    EXPECT_EQ(s.size(), 13u);
  }
  EXPECT_NE(sample_permutation(13, 42, 0), sample_permutation(13, 43, 0));
}

TEST(SamplePermutation, PositionsAreUniformChiSquare) {
  const std::size_t n = 6, draws = 60000;
  std::vector<std::vector<double>> counts(n, std::vector<double>(n, 0.0));
  for (std::size_t d = 0; d < draws; ++d) {
    const auto p = sample_permutation(n, 7, d);
    for (std::size_t pos = 0; pos < n; ++pos) counts[p[pos]][pos] += 1.0;
  }
  // Each row is a multinomial over n positions: chi-square with n-1 dof.
  // 30.0 exceeds the 0.99999 quantile for 5 dof (about 25.7).
  const double expected = static_cast<double>(draws) / n;
  for (std::size_t i = 0; i < n; ++i) {
    double chi = 0.0;
    for (double c : counts[i]) chi += (c - expected) * (c - expected) / expected;
    EXPECT_LT(chi, 30.0) << "point " << i;
  }
}

TEST(McShapley, DeterministicAcrossThreadCounts) {
  std::mt19937_64 gen(5);
  const auto train = testing::random_dataset(gen, 9, 2, 2);
  const auto val = testing::random_dataset(gen, 3, 2, 2);
  const KnnUtilityOracle oracle(train, val, {3});
  McConfig c;
  c.permutations = 1000;
  c.seed = 11;
  const auto a = mc_shapley(oracle, c);
  c.threads = 3;
  const auto b = mc_shapley(oracle, c);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.std_error, b.std_error);
  EXPECT_EQ(a.permutations_used, 1000u);
  EXPECT_EQ(a.mean_truncation_position, 9.0);
}

TEST(McShapley, ConvergesToExact) {
  std::mt19937_64 gen(21);
  const auto train = testing::random_dataset(gen, 8, 2, 2);
  const auto val = testing::random_dataset(gen, 5, 2, 2);
  const KnnUtilityOracle oracle(train, val, {3});
  const auto exact = exact_shapley(oracle);
  McConfig c;
  c.permutations = 20000;
  for (std::uint64_t seed : {0ULL, 1ULL}) {
    c.seed = seed;
    const auto est = mc_shapley(oracle, c);
    for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(est.values[i], exact[i], 0.015);
  }
  c.seed = 0;
  const auto s0 = mc_shapley(oracle, c);
  c.seed = 1;
  EXPECT_NE(mc_shapley(oracle, c).values, s0.values);
}

TEST(McShapley, EfficiencyHoldsPerPermutation) {
  // Without truncation each permutation's contributions telescope to U(D) - U(empty).
  const auto game = random_game(7, 9);
  McConfig c;
  c.permutations = 37;
  const auto est = mc_shapley(game, c);
  double sum = 0.0;
  for (double x : est.values) sum += x;
  EXPECT_NEAR(sum, game.evaluate(std::vector<std::uint8_t>(7, 1)) - game.evaluate(std::vector<std::uint8_t>(7, 0)),
              1e-12);
}

TEST(McShapley, InfiniteToleranceKeepsOnlyFirstPoint) {
  const std::vector<double> w{1.0, 2.0, 3.0, 4.0};
  McConfig c;
  c.permutations = 4000;
  c.truncation_tolerance = std::numeric_limits<double>::infinity();
  const auto est = mc_shapley(additive(w), c);
  EXPECT_EQ(est.mean_truncation_position, 1.0);
  // Point i is first with probability 1/4 and then contributes U({i}) - U(empty) = w_i.
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(est.values[i], w[i] / 4.0, 0.1 * w[i]);
}

TEST(McShapley, TruncationShortensScans) {
  // Utility saturates after two points.
  const MaskFunctionOracle sat(10, [](std::uint64_t m) { return std::min(2, __builtin_popcountll(m)) / 2.0; });
  McConfig c;
  c.permutations = 200;
  c.truncation_tolerance = 1e-9;
  const auto est = mc_shapley(sat, c);
  EXPECT_EQ(est.mean_truncation_position, 2.0);
  double sum = 0.0;
  for (double x : est.values) sum += x;
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(McShapley, EarlyStop) {
  const std::vector<double> w{1.0, 1.0, 1.0};
  McConfig c;
  c.permutations = 100000;
  c.early_stop_threshold = 1e-6;
  const auto est = mc_shapley(additive(w), c);
  EXPECT_TRUE(est.early_stopped);
  EXPECT_EQ(est.permutations_used, 101u);
  McConfig bad;
  bad.permutations = 0;
  EXPECT_THROW(mc_shapley(additive(w), bad), std::invalid_argument);
}

TEST(RankCorrelation, IdentityAndReverse) {
  const std::vector<double> a{0.3, -1.0, 2.5, 7.0, 0.0};
  const std::vector<double> r{-0.3, 1.0, -2.5, -7.0, 0.0};
  EXPECT_EQ(rank_correlation(a, a).rho, 1.0);
  EXPECT_EQ(rank_correlation(a, a).p_value, 0.0);
  EXPECT_EQ(rank_correlation(a, r).rho, -1.0);
}

TEST(RankCorrelation, ReferenceValues) {
  // Reference values from scipy.stats.spearmanr.
  const auto r1 = rank_correlation(std::vector<double>{1, 2, 3, 4, 5}, std::vector<double>{2, 1, 4, 3, 5});
  EXPECT_NEAR(r1.rho, 0.8, 1e-14);
  EXPECT_NEAR(r1.p_value, 0.10408803866182788, 1e-12);
  const auto r3 = rank_correlation(std::vector<double>{3, 1, 4, 1, 5, 9, 2, 6}, std::vector<double>{2, 7, 1, 8, 2, 8, 1, 8});
  EXPECT_NEAR(r3.rho, 0.19885368120992467, 1e-14);
  EXPECT_NEAR(r3.p_value, 0.6368617833253285, 1e-12);
}

TEST(RankCorrelation, HandComputedTie) {
  // Ranks (1, 2.5, 2.5, 4, 5) vs (1, 3, 2, 4, 5): sab = 9.5, saa = 9.5, sbb = 10.
  const std::vector<double> a{1, 2, 2, 4, 5}, b{1, 3, 2, 4, 5};
  EXPECT_EQ(average_ranks(a), (std::vector<double>{1, 2.5, 2.5, 4, 5}));
  const auto r = rank_correlation(a, b);
  EXPECT_NEAR(r.rho, 9.5 / std::sqrt(95.0), 1e-15);
  EXPECT_NEAR(r.p_value, 0.004818230468198566, 1e-12);
}

TEST(RankCorrelation, Errors) {
  EXPECT_THROW(rank_correlation(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2}), std::invalid_argument);
  EXPECT_THROW(rank_correlation(std::vector<double>{1, 2}, std::vector<double>{1, 2}), std::invalid_argument);
  EXPECT_THROW(rank_correlation(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), std::invalid_argument);
}

}  // namespace
}  // namespace dval
