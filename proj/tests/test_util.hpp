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

// Reference oracles for the test suites. Nothing here calls into the
// library's valuation code: distances are recomputed from raw features and
// Shapley values come from the subset-weight formula directly.

#ifndef DVAL_TESTS_TEST_UTIL_HPP
#define DVAL_TESTS_TEST_UTIL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "dval/dataset.hpp"

namespace dval::testing {

struct Instance {
  LabeledDataset train;
  LabeledDataset val;
};

/// Isotropic Gaussian features with class labels drawn uniformly from [0, classes).
inline LabeledDataset random_dataset(std::mt19937_64& gen, std::size_t n, std::size_t d, std::size_t classes) {
  std::normal_distribution<double> feat(0.0, 1.0);
  std::uniform_int_distribution<Label> lab(0, static_cast<Label>(classes - 1));
  std::vector<double> f(n * d);
  std::vector<Label> l(n);
  for (auto& x : f) x = feat(gen);
  for (auto& y : l) y = lab(gen);
  return LabeledDataset(std::move(f), std::move(l), d);
}

/// 1-D training set whose sorted match pattern against validation point 0 (label 1) is `pattern`.
/// Training point i sits at x = i + 1, so file order equals sorted order.
inline Instance pattern_instance(const std::vector<int>& pattern) {
  std::vector<double> f;
  std::vector<Label> l;
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    f.push_back(static_cast<double>(i + 1));
    l.push_back(pattern[i] ? 1U : 0U);
  }
  return {LabeledDataset(std::move(f), std::move(l), 1), LabeledDataset({0.0}, {1U}, 1)};
}

inline double sq_dist(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t c = 0; c < d; ++c) s += (a[c] - b[c]) * (a[c] - b[c]);
  return s;
}

/// Argsort of explicitly tabulated squared distances, ties by index.
inline std::vector<std::size_t> brute_ordering(const LabeledDataset& train, const double* query) {
  const std::size_t n = train.rows(), d = train.dim();
  std::vector<std::pair<double, std::size_t>> table;
  for (std::size_t i = 0; i < n; ++i) table.emplace_back(sq_dist(&train.features()[i * d], query, d), i);
  std::sort(table.begin(), table.end());
  std::vector<std::size_t> out;
  for (auto& [dist, i] : table) out.push_back(i);
  return out;
}

/// Number of label matches among the K nearest members of `mask`, for validation row v.
inline std::size_t brute_matches(const LabeledDataset& train, const LabeledDataset& val, std::size_t v,
                                 std::uint64_t mask, std::size_t k) {
  const std::size_t d = train.dim();
  std::vector<std::pair<double, std::size_t>> members;
  for (std::size_t i = 0; i < train.rows(); ++i) {
    if (mask >> i & 1U) members.emplace_back(sq_dist(&train.features()[i * d], &val.features()[v * d], d), i);
  }
  std::sort(members.begin(), members.end());
  std::size_t hits = 0;
  for (std::size_t t = 0; t < std::min(k, members.size()); ++t) hits += train.labels()[members[t].second] == val.labels()[v];
  return hits;
}

/// Validation-averaged KNN utility of the subset `mask`.
inline double brute_utility(const LabeledDataset& train, const LabeledDataset& val, std::uint64_t mask, std::size_t k) {
  double sum = 0.0;
  for (std::size_t v = 0; v < val.rows(); ++v) sum += static_cast<double>(brute_matches(train, val, v, mask, k)) / k;
  return sum / static_cast<double>(val.rows());
}

inline double factorial(std::size_t n) {
  double f = 1.0;
  for (std::size_t i = 2; i <= n; ++i) f *= static_cast<double>(i);
  return f;
}

/// Shapley values by the weighted-subset formula over an arbitrary game.
inline std::vector<double> brute_shapley(std::size_t n, const std::function<double(std::uint64_t)>& u) {
  std::vector<double> table(std::size_t{1} << n);
  for (std::uint64_t m = 0; m < table.size(); ++m) table[m] = u(m);
  std::vector<double> out(n, 0.0);
  const double nf = factorial(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::uint64_t m = 0; m < table.size(); ++m) {
      if (m >> i & 1U) continue;
      const auto s = static_cast<std::size_t>(__builtin_popcountll(m));
      out[i] += factorial(s) * factorial(n - s - 1) / nf * (table[m | (std::uint64_t{1} << i)] - table[m]);
    }
  }
  return out;
}

/// LOO values by direct differencing.
inline std::vector<double> brute_loo(std::size_t n, const std::function<double(std::uint64_t)>& u) {
  const std::uint64_t full = (std::uint64_t{1} << n) - 1;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = u(full) - u(full & ~(std::uint64_t{1} << i));
  return out;
}

/// Exact rational p/q with q > 0.
struct Rational {
  std::int64_t p = 0;
  std::int64_t q = 1;
  bool operator==(const Rational& o) const { return p * o.q == o.p * q; }
};

/// Shapley values of the single-validation KNN utility as exact rationals.
/// Numerators are integer sums of s!(n-s-1)! * (match difference); the common denominator is K * n!.
inline std::vector<Rational> rational_knn_shapley(const LabeledDataset& train, const LabeledDataset& val,
                                                  std::size_t k) {
  const std::size_t n = train.rows();
  auto ifact = [](std::size_t m) {
    std::int64_t f = 1;
    for (std::size_t i = 2; i <= m; ++i) f *= static_cast<std::int64_t>(i);
    return f;
  };
  std::vector<Rational> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::int64_t num = 0;
    for (std::uint64_t m = 0; m < (std::uint64_t{1} << n); ++m) {
      if (m >> i & 1U) continue;
      const auto s = static_cast<std::size_t>(__builtin_popcountll(m));
      const auto with = static_cast<std::int64_t>(brute_matches(train, val, 0, m | (std::uint64_t{1} << i), k));
      const auto without = static_cast<std::int64_t>(brute_matches(train, val, 0, m, k));
      num += ifact(s) * ifact(n - s - 1) * (with - without);
    }
    out[i] = {num, static_cast<std::int64_t>(k) * ifact(n)};
  }
  return out;
}

inline std::vector<Rational> rational_knn_loo(const LabeledDataset& train, const LabeledDataset& val, std::size_t k) {
  const std::size_t n = train.rows();
  const std::uint64_t full = (std::uint64_t{1} << n) - 1;
  std::vector<Rational> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto with = static_cast<std::int64_t>(brute_matches(train, val, 0, full, k));
    const auto without = static_cast<std::int64_t>(brute_matches(train, val, 0, full & ~(std::uint64_t{1} << i), k));
    out[i] = {with - without, static_cast<std::int64_t>(k)};
  }
  return out;
}

inline std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("dval_" + name)).string();
}

}  // namespace dval::testing

#endif  // DVAL_TESTS_TEST_UTIL_HPP
