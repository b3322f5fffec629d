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

#ifndef DVAL_ANALYSIS_HPP
#define DVAL_ANALYSIS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dval/common.hpp"
#include "dval/dataset.hpp"
#include "dval/knn_values.hpp"

namespace dval {

// ---------------------------------------------------------------------------
// Order-preservingness
// ---------------------------------------------------------------------------

enum class ValueMeasure { KnnShapley, KnnLoo };

inline std::string_view to_string(ValueMeasure m) { return m == ValueMeasure::KnnLoo ? "knn-loo" : "knn-shapley"; }

inline ValueMeasure parse_value_measure(std::string_view name) {
  if (name == "knn-shapley") return ValueMeasure::KnnShapley;
  if (name == "knn-loo") return ValueMeasure::KnnLoo;
  throw std::invalid_argument("unknown value measure '" + std::string(name) + "' (expected knn-shapley or knn-loo)");
}

enum class Verdict { Agrees, Disagrees, Inconclusive };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Agrees: return "agrees";
    case Verdict::Disagrees: return "disagrees";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

/// Two-sided 99% normal quantile.
inline constexpr double kZ99 = 2.5758293035489004;

struct OrderPreservingReport {
  std::size_t i = 0;
  std::size_t j = 0;
  ValueMeasure measure = ValueMeasure::KnnShapley;
  double value_gap = 0.0;  // v(z_i) - v(z_j)
  double mean_difference = 0.0;  // estimate of E[U(T + z_i) - U(T + z_j)]
  double std_error = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t samples = 0;
  Verdict verdict = Verdict::Inconclusive;
};

/// Verdict from a value gap and a confidence interval.
inline Verdict classify(double gap, double ci_low, double ci_high) {
  if (ci_low <= 0.0 && 0.0 <= ci_high) return Verdict::Inconclusive;
  if ((gap > 0.0 && ci_low > 0.0) || (gap < 0.0 && ci_high < 0.0)) return Verdict::Agrees;
  return Verdict::Disagrees;
}

/**
 * @brief Distribution of the random companion set T.
 *
 * T is a uniformly random subset of `pool` whose size is uniform on
 * [min_size, max_size] (max_size defaults to the pool size). The pool should
 * be disjoint from the training points being compared.
 */
struct SubsetSampler {
  DatasetView pool;
  std::size_t min_size = 0;
  std::optional<std::size_t> max_size;
};

struct OrderPreservingConfig {
  KnnConfig knn;
  std::size_t samples = 10000;
  std::uint64_t seed = 0;
  double z = kZ99;
  std::size_t threads = 1;
};

/// All unordered pairs (i, j), i < j, over n points.
inline std::vector<std::pair<std::size_t, std::size_t>> all_pairs(std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) out.emplace_back(i, j);
  }
  return out;
}

/**
 * Empirical order-preservingness check for many pairs at once.
 *
 * For a single validation point, each sample draws T from the sampler and
 * evaluates U(T + z) under the KNN utility for every training point z named in
 * `pairs`; the same T is shared by all pairs. A training point wins distance
 * ties against pool points. Sample s uses random stream s, so results do not
 * depend on the thread count.
 */
inline std::vector<OrderPreservingReport> order_preserving_scan(
    DatasetView train, std::span<const double> val_features, Label val_label, const SubsetSampler& sampler,
    ValueMeasure measure, const OrderPreservingConfig& config,
    std::span<const std::pair<std::size_t, std::size_t>> pairs) {
  config.knn.validate();
  if (config.samples < 100) throw std::invalid_argument("order-preserving test needs at least 100 samples");
  if (sampler.pool.rows() == 0) throw std::invalid_argument("degenerate sampler: empty pool");
  if (sampler.pool.dim() != train.dim()) throw DataError("dimension mismatch between pool and training set");
  const std::size_t pool_size = sampler.pool.rows();
  const std::size_t max_size = sampler.max_size.value_or(pool_size);
  if (max_size > pool_size || sampler.min_size > max_size) {
    throw std::invalid_argument("degenerate sampler: subset size range [" + std::to_string(sampler.min_size) + ", " +
                                std::to_string(max_size) + "] does not fit a pool of " + std::to_string(pool_size));
  }
  const std::size_t k = config.knn.k;

  // Training side: distances, ordering and values for this validation point.
  const NeighborSorter train_sorter(train, config.knn.metric);
  const auto train_dist = train_sorter.distances(val_features);
  const auto ordering = train_sorter.order(val_features);
  const auto values = measure == ValueMeasure::KnnShapley
                          ? knn_shapley_single(ordering, train.labels(), val_label, k)
                          : knn_loo_single(ordering, train.labels(), val_label, k);

  std::map<std::size_t, std::size_t> slot_of;
  for (const auto& [i, j] : pairs) {
    if (i == j) throw std::invalid_argument("order-preserving pair needs two distinct points");
    if (i >= train.rows() || j >= train.rows()) throw std::out_of_range("pair index out of range");
    slot_of.emplace(i, 0);
    slot_of.emplace(j, 0);
  }
  std::vector<std::size_t> points;
  for (auto& [idx, slot] : slot_of) {
    slot = points.size();
    points.push_back(idx);
  }

  // Pool side, sorted by (distance, pool index).
  const NeighborSorter pool_sorter(sampler.pool, config.knn.metric);
  const auto pool_dist = pool_sorter.distances(val_features);
  const auto pool_order = pool_sorter.order(val_features);
  std::vector<double> sorted_dist(pool_size);
  std::vector<std::uint8_t> sorted_match(pool_size);
  for (std::size_t p = 0; p < pool_size; ++p) {
    sorted_dist[p] = pool_dist[pool_order[p]];
    sorted_match[p] = sampler.pool.label(pool_order[p]) == val_label;
  }

  const std::size_t width = points.size();
  std::vector<double> utility(config.samples * width);
  const double kd = static_cast<double>(k);
  parallel_for(config.samples, std::max<std::size_t>(1, config.threads), [&](std::size_t s) {
    auto gen = rng::make_engine(config.seed, s);
    const std::size_t size = sampler.min_size + rng::uniform_index(gen, max_size - sampler.min_size + 1);
    // Partial Fisher-Yates over sorted pool positions; the K smallest chosen positions are T's top K.
    std::vector<std::uint32_t> positions(pool_size);
    std::iota(positions.begin(), positions.end(), 0U);
    for (std::size_t t = 0; t < size; ++t) {
      const auto pick = t + rng::uniform_index(gen, pool_size - t);
      std::swap(positions[t], positions[pick]);
    }
    const std::size_t top = std::min(k, size);
    std::partial_sort(positions.begin(), positions.begin() + static_cast<std::ptrdiff_t>(top),
                      positions.begin() + static_cast<std::ptrdiff_t>(size));
    std::vector<std::size_t> prefix(top + 1, 0);  // matches among the first t members of T
    for (std::size_t t = 0; t < top; ++t) prefix[t + 1] = prefix[t] + sorted_match[positions[t]];

    for (std::size_t c = 0; c < width; ++c) {
      const std::size_t z = points[c];
      std::size_t closer = 0;  // members of T strictly closer than z
      while (closer < top && sorted_dist[positions[closer]] < train_dist[z]) ++closer;
      double hits;
      if (closer >= k) {
        hits = static_cast<double>(prefix[top]);
      } else {
        hits = static_cast<double>(prefix[std::min(top, k - 1)]) + (train.label(z) == val_label ? 1.0 : 0.0);
      }
      utility[s * width + c] = hits / kd;
    }
  });

  std::vector<OrderPreservingReport> reports;
  reports.reserve(pairs.size());
  const double count = static_cast<double>(config.samples);
  for (const auto& [i, j] : pairs) {
    const std::size_t ci = slot_of.at(i);
    const std::size_t cj = slot_of.at(j);
    double mean = 0.0, m2 = 0.0;
    for (std::size_t s = 0; s < config.samples; ++s) {
      const double d = utility[s * width + ci] - utility[s * width + cj];
      const double delta = d - mean;
      mean += delta / static_cast<double>(s + 1);
      m2 += delta * (d - mean);
    }
    OrderPreservingReport r;
    r.i = i;
    r.j = j;
    r.measure = measure;
    r.value_gap = values[i] - values[j];
    r.mean_difference = mean;
    r.std_error = std::sqrt(m2 / (count - 1.0) / count);
    r.ci_low = mean - config.z * r.std_error;
    r.ci_high = mean + config.z * r.std_error;
    r.samples = config.samples;
    r.verdict = classify(r.value_gap, r.ci_low, r.ci_high);
    reports.push_back(r);
  }
  return reports;
}

inline OrderPreservingReport order_preserving_test(DatasetView train, std::span<const double> val_features,
                                                   Label val_label, const SubsetSampler& sampler,
                                                   ValueMeasure measure, const OrderPreservingConfig& config,
                                                   std::pair<std::size_t, std::size_t> pair) {
  const std::pair<std::size_t, std::size_t> one[] = {pair};
  return order_preserving_scan(train, val_features, val_label, sampler, measure, config, one).front();
}

// ---------------------------------------------------------------------------
// Value-gap bounds for private and stable learners
// ---------------------------------------------------------------------------

struct ValueGapBounds {
  double loo = 0.0;
  double shapley = 0.0;
};

/// eps'(n) = e^{c eps} - 1 + c e^{c eps} delta
inline double privacy_slack(double epsilon, double delta, double c) {
  const double g = std::exp(c * epsilon);
  return g - 1.0 + c * g * delta;
}

/// Tabulated privacy schedules; entry n-1 holds the parameter at training size n.
struct PrivacySchedule {
  std::vector<double> epsilon;
  std::vector<double> delta;
};

/**
 * Bounds on the value of any point above a dummy point for an (eps(n), delta(n))-DP
 * learner on N points: LOO <= eps'(N-1), Shapley <= (1/(N-1)) sum_{i=1}^{N-1} eps'(i).
 */
inline ValueGapBounds dp_value_gap_bounds(const PrivacySchedule& schedule, std::size_t n, std::size_t c = 1) {
  if (n < 2) throw std::invalid_argument("DP bounds need N >= 2");
  if (c == 0) throw std::invalid_argument("group size c must be a positive integer");
  const std::size_t needed = n - 1;
  if (schedule.epsilon.size() < needed || schedule.delta.size() < needed) {
    throw std::invalid_argument("privacy schedule covers sizes up to " +
                                std::to_string(std::min(schedule.epsilon.size(), schedule.delta.size())) +
                                ", need 1.." + std::to_string(needed));
  }
  const double cd = static_cast<double>(c);
  double sum = 0.0;
  double last = 0.0;
  for (std::size_t i = 0; i < needed; ++i) {
    const double eps = schedule.epsilon[i];
    const double delta = schedule.delta[i];
    if (!(eps >= 0.0) || !std::isfinite(eps)) throw std::invalid_argument("epsilon must be finite and nonnegative");
    if (!(delta >= 0.0 && delta <= 1.0)) throw std::invalid_argument("delta must lie in [0, 1]");
    last = privacy_slack(eps, delta, cd);
    sum += last;
  }
  return {last, sum / static_cast<double>(needed)};
}

/// Uniform stability C/|S|: LOO <= C/(N-1), Shapley <= C (1 + ln(N-1)) / (N-1).
inline ValueGapBounds stability_value_gap_bounds(double c_stab, std::size_t n) {
  if (n < 2) throw std::invalid_argument("stability bounds need N >= 2");
  if (!(c_stab > 0.0) || !std::isfinite(c_stab)) throw std::invalid_argument("C_stab must be positive");
  const double m = static_cast<double>(n - 1);
  return {c_stab / m, c_stab * (1.0 + std::log(m)) / m};
}

/**
 * Two-column CSV `n,value` (optional header). Sizes must cover 1..L exactly
 * once; returns the values indexed by n-1.
 */
inline std::vector<double> parse_schedule_csv(std::string_view text) {
  std::map<std::size_t, double> entries;
  std::size_t line_no = 0;
  std::size_t start = 0;
  bool first_content = true;
  while (start <= text.size()) {
    auto pos = text.find('\n', start);
    if (pos == std::string_view::npos) pos = text.size();
    const auto line = detail::trim(text.substr(start, pos - start));
    start = pos + 1;
    ++line_no;
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    const bool header = first_content && (cells.empty() || !detail::parse_int<std::size_t>(cells[0]));
    first_content = false;
    if (header) continue;
    if (cells.size() != 2) throw DataError("schedule line " + std::to_string(line_no) + ": expected 'n,value'");
    const auto n = detail::parse_int<std::size_t>(cells[0]);
    const auto v = detail::parse_double(cells[1]);
    if (!n || *n == 0) throw DataError("schedule line " + std::to_string(line_no) + ": bad size '" +
                                       std::string(cells[0]) + "'");
    if (!v || !std::isfinite(*v)) throw DataError("schedule line " + std::to_string(line_no) + ": bad value '" +
                                                  std::string(cells[1]) + "'");
    if (!entries.emplace(*n, *v).second) {
      throw DataError("schedule line " + std::to_string(line_no) + ": duplicate size " + std::to_string(*n));
    }
  }
  std::vector<double> out;
  for (const auto& [n, v] : entries) {
    if (n != out.size() + 1) throw DataError("schedule is missing size " + std::to_string(out.size() + 1));
    out.push_back(v);
  }
  return out;
}

}  // namespace dval

#endif  // DVAL_ANALYSIS_HPP
