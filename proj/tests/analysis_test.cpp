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

#include <algorithm>
#include <cmath>
#include <random>
#include <tuple>
#include <vector>

#include <gtest/gtest.h>

#include "dval/analysis.hpp"
#include "dval/synthetic.hpp"
#include "test_util.hpp"

namespace dval {
namespace {

TEST(Classify, Verdicts) {
  EXPECT_EQ(classify(0.5, 0.1, 0.2), Verdict::Agrees);
  EXPECT_EQ(classify(-0.5, -0.3, -0.2), Verdict::Agrees);
  EXPECT_EQ(classify(0.5, -0.3, -0.2), Verdict::Disagrees);
  EXPECT_EQ(classify(0.0, 0.1, 0.2), Verdict::Disagrees);
  EXPECT_EQ(classify(0.5, -0.1, 0.2), Verdict::Inconclusive);
  EXPECT_EQ(classify(0.5, 0.0, 0.2), Verdict::Inconclusive);
  EXPECT_EQ(classify(0.0, 0.0, 0.0), Verdict::Inconclusive);
}

// Training points on a line at 1..n around a validation point at 0; pool spread over [0.5, 20].
struct LineSetup {
  LabeledDataset train;
  LabeledDataset pool;
  std::vector<double> val{0.0};
  Label val_label = 1;
};

LineSetup line_setup(const std::vector<Label>& train_labels, std::size_t pool_size, std::uint64_t seed) {
  std::vector<double> f;
  for (std::size_t i = 0; i < train_labels.size(); ++i) f.push_back(static_cast<double>(i + 1));
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> pos(0.5, 20.0);
  std::bernoulli_distribution coin(0.5);
  std::vector<double> pf;
  std::vector<Label> pl;
  for (std::size_t p = 0; p < pool_size; ++p) {
    pf.push_back(pos(gen));
    pl.push_back(coin(gen) ? 1U : 0U);
  }
  return {LabeledDataset(f, train_labels, 1), LabeledDataset(pf, pl, 1)};
}

TEST(OrderPreserving, DuplicatedPointIsInconclusiveWithZeroGap) {
  auto setup = line_setup({1, 0, 1, 1}, 50, 2);
  auto f = setup.train.features();
  auto l = setup.train.labels();
  f.push_back(f[1]);
  l.push_back(l[1]);
  const LabeledDataset train(f, l, 1);
  OrderPreservingConfig cfg;
  cfg.knn.k = 2;
  cfg.samples = 1000;
  const auto r = order_preserving_test(train, setup.val, 1, {setup.pool, 0, std::nullopt}, ValueMeasure::KnnShapley,
                                       cfg, {1, 4});
  EXPECT_EQ(r.value_gap, 0.0);
  EXPECT_EQ(r.mean_difference, 0.0);
  EXPECT_EQ(r.verdict, Verdict::Inconclusive);
}

TEST(OrderPreserving, MeanMatchesExactExpectationOverSmallPool) {
  const auto setup = line_setup({1, 0, 0, 1, 0, 1}, 8, 3);
  const std::size_t k = 3;
  OrderPreservingConfig cfg;
  cfg.knn.k = k;
  cfg.samples = 20000;
  cfg.seed = 17;
  const SubsetSampler sampler{setup.pool, 0, std::nullopt};
  const std::vector<std::pair<std::size_t, std::size_t>> pairs{{0, 1}, {2, 5}, {3, 4}};
  const auto reports = order_preserving_scan(setup.train, setup.val, 1, sampler, ValueMeasure::KnnShapley, cfg, pairs);

  // Exact E[U(T + z_i) - U(T + z_j)]: size uniform on 0..8, then T uniform of that size.
  // A training point precedes a pool point at equal distance.
  const std::size_t pool = setup.pool.rows();
  auto utility = [&](std::uint32_t mask, std::size_t z) {
    std::vector<std::tuple<double, int, Label>> pts;  // distance, tie rank, label
    pts.emplace_back(setup.train.features()[z] * setup.train.features()[z], 0, setup.train.label(z));
    for (std::size_t p = 0; p < pool; ++p) {
      if (mask >> p & 1U) pts.emplace_back(setup.pool.features()[p] * setup.pool.features()[p], 1, setup.pool.label(p));
    }
    std::sort(pts.begin(), pts.end());
    double hits = 0;
    for (std::size_t t = 0; t < std::min(k, pts.size()); ++t) hits += std::get<2>(pts[t]) == 1;
    return hits / static_cast<double>(k);
  };
  std::vector<double> by_size_count(pool + 1, 0.0);
  for (std::uint32_t m = 0; m < (1U << pool); ++m) by_size_count[__builtin_popcount(m)] += 1.0;
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    double expect = 0.0;
    for (std::uint32_t m = 0; m < (1U << pool); ++m) {
      const double w = 1.0 / static_cast<double>(pool + 1) / by_size_count[__builtin_popcount(m)];
      expect += w * (utility(m, pairs[r].first) - utility(m, pairs[r].second));
    }
    EXPECT_NEAR(reports[r].mean_difference, expect, 4.0 * reports[r].std_error + 1e-12) << "pair " << r;
    EXPECT_NEAR(reports[r].ci_high - reports[r].ci_low, 2 * kZ99 * reports[r].std_error, 1e-12);
  }
}

TEST(OrderPreserving, InsideTopKBothMeasuresAgree) {
  // Points 0 (match) and 1 (mismatch) are the two nearest training points.
  const auto setup = line_setup({1, 0, 1, 0, 1, 0, 1, 1}, 300, 4);
  OrderPreservingConfig cfg;
  cfg.knn.k = 3;
  cfg.samples = 5000;
  const SubsetSampler sampler{setup.pool, 0, std::nullopt};
  for (auto m : {ValueMeasure::KnnShapley, ValueMeasure::KnnLoo}) {
    const auto r = order_preserving_test(setup.train, setup.val, 1, sampler, m, cfg, {0, 1});
    EXPECT_GT(r.value_gap, 0.0);
    EXPECT_EQ(r.verdict, Verdict::Agrees) << to_string(m);
  }
}

TEST(OrderPreserving, LooGapVanishesBeyondKWhileUtilityDiffers) {
  // Points 5 (match) and 6 (mismatch) lie beyond K = 2; the pool is sparse near the
  // validation point so T often leaves room for them in the top K.
  const auto setup = line_setup({0, 0, 0, 0, 0, 1, 0}, 200, 5);
  OrderPreservingConfig cfg;
  cfg.knn.k = 2;
  cfg.samples = 10000;
  const SubsetSampler sampler{setup.pool, 0, std::nullopt};
  const auto loo = order_preserving_test(setup.train, setup.val, 1, sampler, ValueMeasure::KnnLoo, cfg, {5, 6});
  EXPECT_EQ(loo.value_gap, 0.0);
  EXPECT_GT(loo.ci_low, 0.0);
  EXPECT_EQ(loo.verdict, Verdict::Disagrees);
  const auto shap = order_preserving_test(setup.train, setup.val, 1, sampler, ValueMeasure::KnnShapley, cfg, {5, 6});
  EXPECT_GT(shap.value_gap, 0.0);
  EXPECT_EQ(shap.verdict, Verdict::Agrees);
}

TEST(OrderPreserving, ReproducibleThreadInvariantAndShrinking) {
  const auto setup = line_setup({1, 0, 1, 0, 0, 1}, 100, 6);
  OrderPreservingConfig cfg;
  cfg.knn.k = 2;
  cfg.samples = 2000;
  cfg.seed = 5;
  const SubsetSampler sampler{setup.pool, 0, std::nullopt};
  const auto pairs = all_pairs(6);
  EXPECT_EQ(pairs.size(), 15u);
  const auto a = order_preserving_scan(setup.train, setup.val, 1, sampler, ValueMeasure::KnnShapley, cfg, pairs);
  cfg.threads = 3;
  const auto b = order_preserving_scan(setup.train, setup.val, 1, sampler, ValueMeasure::KnnShapley, cfg, pairs);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    EXPECT_EQ(a[p].mean_difference, b[p].mean_difference);
    EXPECT_EQ(a[p].ci_low, b[p].ci_low);
  }
  cfg.samples = 32000;
  const auto big = order_preserving_scan(setup.train, setup.val, 1, sampler, ValueMeasure::KnnShapley, cfg, pairs);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    if (a[p].std_error == 0.0) continue;
    const double ratio = big[p].std_error / a[p].std_error;
    EXPECT_NEAR(ratio, 0.25, 0.06) << "pair " << p;
  }
}

TEST(OrderPreserving, Errors) {
  const auto setup = line_setup({1, 0, 1}, 20, 7);
  OrderPreservingConfig cfg;
  cfg.samples = 99;
  const SubsetSampler sampler{setup.pool, 0, std::nullopt};
  EXPECT_THROW(order_preserving_test(setup.train, setup.val, 1, sampler, ValueMeasure::KnnShapley, cfg, {0, 1}),
               std::invalid_argument);
  cfg.samples = 100;
  EXPECT_THROW(order_preserving_test(setup.train, setup.val, 1, sampler, ValueMeasure::KnnShapley, cfg, {1, 1}),
               std::invalid_argument);
  const SubsetSampler empty{DatasetView{}, 0, std::nullopt};
  try {
    order_preserving_test(setup.train, setup.val, 1, empty, ValueMeasure::KnnShapley, cfg, {0, 1});
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("empty pool"), std::string::npos);
  }
  EXPECT_THROW(order_preserving_test(setup.train, setup.val, 1, {setup.pool, 5, 30}, ValueMeasure::KnnShapley, cfg,
                                     {0, 1}),
               std::invalid_argument);
  EXPECT_THROW(parse_value_measure("banzhaf"), std::invalid_argument);
}

TEST(DpBounds, Examples) {
  const PrivacySchedule zero{std::vector<double>(9, 0.0), std::vector<double>(9, 0.0)};
  const auto z = dp_value_gap_bounds(zero, 10);
  EXPECT_EQ(z.loo, 0.0);
  EXPECT_EQ(z.shapley, 0.0);

  const PrivacySchedule ln2{{std::log(2.0)}, {0.0}};
  const auto one = dp_value_gap_bounds(ln2, 2);
  EXPECT_NEAR(one.loo, 1.0, 1e-15);
  EXPECT_NEAR(one.shapley, 1.0, 1e-15);

  PrivacySchedule dec;
  for (int n = 1; n <= 20; ++n) {
    dec.epsilon.push_back(1.0 / n);
    dec.delta.push_back(1e-3 / n);
  }
  const auto d = dp_value_gap_bounds(dec, 21);
  EXPECT_LT(d.loo, d.shapley);
  EXPECT_NEAR(d.loo, privacy_slack(1.0 / 20, 1e-3 / 20, 1.0), 1e-15);
}

TEST(DpBounds, MonotoneInParameters) {
  PrivacySchedule base{{0.5, 0.4, 0.3}, {0.01, 0.01, 0.01}};
  const auto b = dp_value_gap_bounds(base, 4, 1);
  auto more_eps = base;
  for (auto& e : more_eps.epsilon) e += 0.1;
  auto more_delta = base;
  for (auto& x : more_delta.delta) x += 0.1;
  for (const auto& r : {dp_value_gap_bounds(more_eps, 4, 1), dp_value_gap_bounds(more_delta, 4, 1),
                        dp_value_gap_bounds(base, 4, 2)}) {
    EXPECT_GE(r.loo, b.loo);
    EXPECT_GE(r.shapley, b.shapley);
  }
}

TEST(DpBounds, Errors) {
  const PrivacySchedule s{{0.1, 0.1}, {0.0, 0.0}};
  EXPECT_THROW(dp_value_gap_bounds(s, 4), std::invalid_argument);
  EXPECT_THROW(dp_value_gap_bounds(s, 1), std::invalid_argument);
  EXPECT_THROW(dp_value_gap_bounds({{0.1}, {1.5}}, 2), std::invalid_argument);
  EXPECT_THROW(dp_value_gap_bounds({{-0.1}, {0.0}}, 2), std::invalid_argument);
}

TEST(StabilityBounds, Examples) {
  const auto a = stability_value_gap_bounds(1.0, 2);
  EXPECT_EQ(a.loo, 1.0);
  EXPECT_EQ(a.shapley, 1.0);
  const auto b = stability_value_gap_bounds(2.0, 11);
  EXPECT_NEAR(b.loo, 0.2, 1e-15);
  EXPECT_NEAR(b.shapley, 0.2 * (1.0 + std::log(10.0)), 1e-15);
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> c(0.01, 10.0);
  for (int t = 0; t < 100; ++t) {
    const double cs = c(gen);
    const std::size_t n = 2 + t * 7;
    const auto r = stability_value_gap_bounds(cs, n);
    EXPECT_GE(r.shapley, r.loo);
    const auto bigger = stability_value_gap_bounds(cs * 1.5, n);
    EXPECT_GE(bigger.loo, r.loo);
    EXPECT_GE(bigger.shapley, r.shapley);
  }
  EXPECT_THROW(stability_value_gap_bounds(1.0, 1), std::invalid_argument);
  EXPECT_THROW(stability_value_gap_bounds(0.0, 5), std::invalid_argument);
}

TEST(ScheduleCsv, Parses) {
  EXPECT_EQ(parse_schedule_csv("n,eps\n2,0.2\n1,0.1\n3,0.3\n"), (std::vector<double>{0.1, 0.2, 0.3}));
  EXPECT_EQ(parse_schedule_csv("1,0.5"), (std::vector<double>{0.5}));
  EXPECT_THROW(parse_schedule_csv("1,0.1\n3,0.3\n"), DataError);
  EXPECT_THROW(parse_schedule_csv("1,0.1\n1,0.3\n"), DataError);
  EXPECT_THROW(parse_schedule_csv("1,abc\n"), DataError);
}

}  // namespace
}  // namespace dval
