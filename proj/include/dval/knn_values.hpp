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

#ifndef DVAL_KNN_VALUES_HPP
#define DVAL_KNN_VALUES_HPP

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dval/common.hpp"
#include "dval/dataset.hpp"

/**
 * @file knn_values.hpp
 * @brief Closed-form data values under the unweighted KNN utility.
 *
 * For one validation point (x_val, y_val) and a training subset S, the
 * utility is the fraction of the K nearest members of S that carry y_val:
 *
 *     U(S) = (1/K) * sum_{k=1}^{min(K,|S|)} 1[y_{a_k(S)} = y_val]
 *
 * where a_k(S) is the k-th closest member of S. Both the Shapley value and
 * the leave-one-out value of this game have closed forms over the full
 * distance ordering a_1..a_N, computed here in O(N) after the sort.
 */

namespace dval {

inline constexpr std::size_t kDefaultK = 5;

struct KnnConfig {
  std::size_t k = kDefaultK;
  DistanceMetric metric = DistanceMetric::SquaredEuclidean;

  void validate() const {
    if (k == 0) throw std::invalid_argument("K must be at least 1");
  }
};

enum class Aggregation { Mean, Max, PerValidation };

inline std::string_view to_string(Aggregation a) {
  switch (a) {
    case Aggregation::Mean: return "mean";
    case Aggregation::Max: return "max";
    case Aggregation::PerValidation: return "per-val";
  }
  return "mean";
}

inline Aggregation parse_aggregation(std::string_view name) {
  if (name == "mean") return Aggregation::Mean;
  if (name == "max") return Aggregation::Max;
  if (name == "per-val" || name == "per-validation") return Aggregation::PerValidation;
  throw std::invalid_argument("unknown aggregation '" + std::string(name) + "' (expected mean, max or per-val)");
}

/**
 * @brief One value per training point, plus provenance.
 *
 * `values` holds the aggregate. With `Aggregation::PerValidation` (or when
 * retention is requested) `per_validation` is the N x M row-major matrix of
 * single-validation-point values and `values` is its row mean.
 */
struct ValueVector {
  std::vector<double> values;
  std::vector<double> per_validation;
  std::size_t num_validation = 0;
  Aggregation aggregation = Aggregation::Mean;
  std::string measure;
  std::size_t k = 0;
  DistanceMetric metric = DistanceMetric::SquaredEuclidean;
  std::optional<std::uint64_t> seed;

  std::size_t size() const { return values.size(); }
  bool has_per_validation() const { return !per_validation.empty(); }
  double per_validation_at(std::size_t point, std::size_t val) const {
    return per_validation[point * num_validation + val];
  }
};

struct ValuationOptions {
  Aggregation aggregation = Aggregation::Mean;
  bool retain_per_validation = false;
  std::size_t threads = 1;
};

// ---------------------------------------------------------------------------
// Single validation point
// ---------------------------------------------------------------------------

/// U(S) for the index set `subset` given the full ordering for one validation point.
inline double knn_utility(std::span<const std::size_t> subset, std::span<const std::size_t> ordering,
                          std::span<const Label> labels, Label val_label, std::size_t k) {
  if (k == 0) throw std::invalid_argument("K must be at least 1");
  std::vector<std::uint8_t> member(ordering.size(), 0);
  for (std::size_t i : subset) {
    if (i >= member.size()) throw std::out_of_range("subset index " + std::to_string(i) + " out of range");
    member[i] = 1;
  }
  std::size_t taken = 0;
  std::size_t matches = 0;
  for (std::size_t idx : ordering) {
    if (taken == k) break;
    if (!member[idx]) continue;
    ++taken;
    matches += labels[idx] == val_label;
  }
  return static_cast<double>(matches) / static_cast<double>(k);
}

/**
 * Exact Shapley values of the KNN utility for one validation point.
 *
 * Runs the recursion from the farthest point inward:
 *   v(a_N) = 1[y_{a_N} = y_val] / max(N, K)
 *   v(a_i) = v(a_{i+1}) + (1[y_{a_i} = y_val] - 1[y_{a_{i+1}} = y_val]) / K * min(K, i) / i
 * Output is indexed by original training index. With N <= K every point is
 * always a neighbor, the utility is additive and each value is its own
 * match indicator over K.
 */
inline std::vector<double> knn_shapley_single(std::span<const std::size_t> ordering, std::span<const Label> labels,
                                              Label val_label, std::size_t k) {
  if (k == 0) throw std::invalid_argument("K must be at least 1");
  const std::size_t n = ordering.size();
  std::vector<double> values(labels.size(), 0.0);
  if (n == 0) return values;
  auto match = [&](std::size_t pos) { return labels[ordering[pos]] == val_label ? 1.0 : 0.0; };

  double current = match(n - 1) / static_cast<double>(std::max(n, k));
  values[ordering[n - 1]] = current;
  for (std::size_t pos = n - 1; pos-- > 0;) {
    const double rank = static_cast<double>(pos + 1);  // 1-based position i
    const double diff = match(pos) - match(pos + 1);
    if (diff != 0.0) {
      current += diff * static_cast<double>(std::min<std::size_t>(k, pos + 1)) / (static_cast<double>(k) * rank);
    }
    values[ordering[pos]] = current;
  }
  return values;
}

/**
 * Exact leave-one-out values of the KNN utility for one validation point:
 * v(a_i) = (1[y_{a_i} = y_val] - 1[y_{a_{K+1}} = y_val]) / K for i <= K, else 0.
 * With N <= K no neighbor is displaced and the second indicator is 0.
 */
inline std::vector<double> knn_loo_single(std::span<const std::size_t> ordering, std::span<const Label> labels,
                                          Label val_label, std::size_t k) {
  if (k == 0) throw std::invalid_argument("K must be at least 1");
  const std::size_t n = ordering.size();
  std::vector<double> values(labels.size(), 0.0);
  const double displaced = (n > k && labels[ordering[k]] == val_label) ? 1.0 : 0.0;
  const double kd = static_cast<double>(k);
  for (std::size_t pos = 0; pos < std::min(n, k); ++pos) {
    const double m = labels[ordering[pos]] == val_label ? 1.0 : 0.0;
    values[ordering[pos]] = (m - displaced) / kd;
  }
  return values;
}

// ---------------------------------------------------------------------------
// Multiple validation points
// ---------------------------------------------------------------------------

namespace detail {

template <typename SingleFn>
ValueVector value_over_validation(DatasetView train, DatasetView val, const KnnConfig& config,
                                  const ValuationOptions& options, std::string measure, SingleFn&& single) {
  config.validate();
  check_compatible(train, val);
  const NeighborSorter sorter(train, config.metric);
  const std::size_t n = train.rows();
  const std::size_t m = val.rows();

  ValueVector out;
  out.measure = std::move(measure);
  out.k = config.k;
  out.metric = config.metric;
  out.aggregation = options.aggregation;
  out.num_validation = m;
  const bool retain = options.retain_per_validation || options.aggregation == Aggregation::PerValidation;
  if (retain) out.per_validation.assign(n * m, 0.0);

  const bool use_max = options.aggregation == Aggregation::Max;
  std::vector<double> acc(n, use_max ? -std::numeric_limits<double>::infinity() : 0.0);

  // Rows of a block are computed concurrently, then folded in validation order.
  const std::size_t threads = std::max<std::size_t>(1, options.threads);
  const std::size_t block = 8 * threads;
  std::vector<std::vector<double>> rows(std::min(block, m));
  for (std::size_t start = 0; start < m; start += block) {
    const std::size_t count = std::min(block, m - start);
    parallel_for(count, threads, [&](std::size_t b) {
      const std::size_t v = start + b;
      const auto ordering = sorter.order(val.row(v));
      rows[b] = single(ordering, train.labels(), val.label(v), config.k);
    });
    for (std::size_t b = 0; b < count; ++b) {
      const auto& row = rows[b];
      for (std::size_t i = 0; i < n; ++i) {
        acc[i] = use_max ? std::max(acc[i], row[i]) : acc[i] + row[i];
        if (retain) out.per_validation[i * m + start + b] = row[i];
      }
    }
  }
  if (!use_max) {
    for (double& a : acc) a /= static_cast<double>(m);
  }
  out.values = std::move(acc);
  return out;
}

}  // namespace detail

/// KNN-Shapley values over all validation points (mean across points by additivity, or max).
inline ValueVector knn_shapley(DatasetView train, DatasetView val, const KnnConfig& config,
                               const ValuationOptions& options = {}) {
  return detail::value_over_validation(train, val, config, options, "knn-shapley",
                                       [](auto ord, auto labels, Label y, std::size_t k) {
                                         return knn_shapley_single(ord, labels, y, k);
                                       });
}

inline ValueVector knn_loo(DatasetView train, DatasetView val, const KnnConfig& config,
                           const ValuationOptions& options = {}) {
  return detail::value_over_validation(train, val, config, options, "knn-loo",
                                       [](auto ord, auto labels, Label y, std::size_t k) {
                                         return knn_loo_single(ord, labels, y, k);
                                       });
}

// ---------------------------------------------------------------------------
// KNN classification and K calibration
// ---------------------------------------------------------------------------

/// Majority label among the first min(K, N) entries of `ordering`; ties go to the smallest label id.
inline Label knn_predict(std::span<const std::size_t> ordering, std::span<const Label> labels, std::size_t k,
                         std::size_t num_classes) {
  std::vector<std::size_t> votes(num_classes, 0);
  const std::size_t take = std::min(k, ordering.size());
  for (std::size_t pos = 0; pos < take; ++pos) ++votes[labels[ordering[pos]]];
  return static_cast<Label>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

/// Fraction of `eval` rows whose KNN prediction over `train` equals their label.
inline double knn_accuracy(DatasetView train, DatasetView eval, const KnnConfig& config, std::size_t threads = 1) {
  config.validate();
  check_compatible(train, eval);
  const NeighborSorter sorter(train, config.metric);
  const std::size_t classes = std::max(train.num_classes(), eval.num_classes());
  std::vector<std::uint8_t> correct(eval.rows(), 0);
  parallel_for(eval.rows(), threads, [&](std::size_t v) {
    const auto ordering = sorter.order(eval.row(v));
    correct[v] = knn_predict(ordering, train.labels(), config.k, classes) == eval.label(v);
  });
  std::size_t hits = 0;
  for (auto c : correct) hits += c;
  return static_cast<double>(hits) / static_cast<double>(eval.rows());
}

struct CalibrationResult {
  std::size_t best_k = 0;
  /// (K, validation accuracy) in ascending K.
  std::vector<std::pair<std::size_t, double>> table;
};

/// Evaluates KNN validation accuracy for every K in the grid; picks the smallest K attaining the maximum.
inline CalibrationResult calibrate_k(DatasetView train, DatasetView val, std::span<const std::size_t> k_grid,
                                     DistanceMetric metric = DistanceMetric::SquaredEuclidean,
                                     std::size_t threads = 1) {
  if (k_grid.empty()) throw std::invalid_argument("calibration grid is empty");
  const std::set<std::size_t> grid(k_grid.begin(), k_grid.end());
  if (*grid.begin() == 0) throw std::invalid_argument("calibration grid contains K = 0");
  check_compatible(train, val);
  const NeighborSorter sorter(train, metric);
  const std::size_t classes = std::max(train.num_classes(), val.num_classes());
  const std::vector<std::size_t> ks(grid.begin(), grid.end());

  // hits[v][g]: whether validation point v is classified correctly with K = ks[g].
  std::vector<std::vector<std::uint8_t>> hits(val.rows(), std::vector<std::uint8_t>(ks.size(), 0));
  parallel_for(val.rows(), threads, [&](std::size_t v) {
    const auto ordering = sorter.order(val.row(v));
    std::vector<std::size_t> votes(classes, 0);
    std::size_t pos = 0;
    for (std::size_t g = 0; g < ks.size(); ++g) {
      const std::size_t take = std::min(ks[g], ordering.size());
      for (; pos < take; ++pos) ++votes[train.label(ordering[pos])];
      const auto pred = static_cast<Label>(std::max_element(votes.begin(), votes.end()) - votes.begin());
      hits[v][g] = pred == val.label(v);
    }
  });

  CalibrationResult result;
  double best = -1.0;
  for (std::size_t g = 0; g < ks.size(); ++g) {
    std::size_t count = 0;
    for (const auto& h : hits) count += h[g];
    const double acc = static_cast<double>(count) / static_cast<double>(val.rows());
    result.table.emplace_back(ks[g], acc);
    if (acc > best) {
      best = acc;
      result.best_k = ks[g];
    }
  }
  return result;
}

}  // namespace dval

#endif  // DVAL_KNN_VALUES_HPP
