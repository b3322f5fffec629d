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

#ifndef DVAL_HARNESS_HPP
#define DVAL_HARNESS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dval/common.hpp"
#include "dval/dataset.hpp"
#include "dval/knn_values.hpp"
#include "dval/synthetic.hpp"

/**
 * @file harness.hpp
 * @brief Application pipelines driven by data values: corrupted-point
 * detection, data summarization, positive-value selection and value-guided
 * acquisition.
 */

namespace dval {

/// Indices sorted by ascending value; ties by ascending index.
inline std::vector<std::size_t> ascending_ranking(std::span<const double> values) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  return idx;
}

/// Indices sorted by descending value; ties by ascending index.
inline std::vector<std::size_t> descending_ranking(std::span<const double> values) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  return idx;
}

/// Number of leading points covered by `fraction` of n (rounded down).
inline std::size_t prefix_count(double fraction, std::size_t n) {
  return std::min(n, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9)));
}

// ---------------------------------------------------------------------------
// Detection
// ---------------------------------------------------------------------------

struct CurvePoint {
  double fraction_checked = 0.0;
  double fraction_detected = 0.0;
};

inline constexpr std::array<double, 4> kRecallLandmarks = {0.05, 0.10, 0.20, 0.50};

struct DetectionCurve {
  /// Starts at (0, 0); one point per inspected prefix; ends at (1, 1).
  std::vector<CurvePoint> points;
  /// (fraction checked, recall) at the standard landmarks.
  std::vector<CurvePoint> landmarks;
  std::size_t num_flagged = 0;

  /// Recall after inspecting the lowest `fraction` of points.
  double recall_at(double fraction) const {
    const std::size_t n = points.size() - 1;
    return points[prefix_count(fraction, n)].fraction_detected;
  }
};

/// Inspects points from lowest to highest value and records the share of flagged points found.
inline DetectionCurve detection_curve(std::span<const double> values, const FlagSet& flags) {
  if (values.size() != flags.size()) {
    throw std::invalid_argument("values and flags differ in length (" + std::to_string(values.size()) + " vs " +
                                std::to_string(flags.size()) + ")");
  }
  const std::size_t n = values.size();
  const auto flagged = static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true));
  if (flagged == 0) throw std::invalid_argument("detection curve needs at least one flagged point");
  if (flagged == n) throw std::invalid_argument("detection curve needs at least one unflagged point");

  DetectionCurve curve;
  curve.num_flagged = flagged;
  curve.points.reserve(n + 1);
  curve.points.push_back({0.0, 0.0});
  std::size_t found = 0;
  const auto ranking = ascending_ranking(values);
  for (std::size_t m = 0; m < n; ++m) {
    found += flags[ranking[m]];
    curve.points.push_back({static_cast<double>(m + 1) / static_cast<double>(n),
                            static_cast<double>(found) / static_cast<double>(flagged)});
  }
  for (double f : kRecallLandmarks) curve.landmarks.push_back({f, curve.recall_at(f)});
  return curve;
}

// ---------------------------------------------------------------------------
// Summarization
// ---------------------------------------------------------------------------

enum class RemovalOrder { LowFirst, HighFirst };

struct SummarizationConfig {
  /// A single entry fixes K; more entries calibrate K on the validation set.
  std::vector<std::size_t> k_grid = {kDefaultK};
  DistanceMetric metric = DistanceMetric::SquaredEuclidean;
  RemovalOrder order = RemovalOrder::LowFirst;
  std::size_t threads = 1;
};

struct SummarizationPoint {
  double fraction = 0.0;
  std::size_t removed = 0;
  double accuracy = 0.0;
};

struct SummarizationResult {
  std::size_t k = 0;
  std::vector<SummarizationPoint> points;
};

/**
 * Drops the given fraction of training points from one end of the value
 * ranking and measures KNN accuracy of the remainder on `heldout`. Remaining
 * points keep their original order, so fraction 0 reproduces direct
 * evaluation on the full training set.
 */
inline SummarizationResult summarization_curve(DatasetView train, DatasetView val, DatasetView heldout,
                                               std::span<const double> values, std::span<const double> fractions,
                                               const SummarizationConfig& config = {}) {
  if (values.size() != train.rows()) throw std::invalid_argument("one value per training point is required");
  for (double f : fractions) {
    if (!(f >= 0.0 && f < 1.0)) throw std::invalid_argument("drop fractions must lie in [0, 1)");
  }
  SummarizationResult result;
  result.k = config.k_grid.size() == 1 ? config.k_grid.front()
                                       : calibrate_k(train, val, config.k_grid, config.metric, config.threads).best_k;
  const KnnConfig knn{result.k, config.metric};
  const auto ranking = config.order == RemovalOrder::LowFirst ? ascending_ranking(values) : descending_ranking(values);
  const LabeledDataset full(std::vector<double>(train.features().begin(), train.features().end()),
                            std::vector<Label>(train.labels().begin(), train.labels().end()), train.dim());
  for (double f : fractions) {
    const std::size_t removed = prefix_count(f, train.rows());
    if (removed >= train.rows()) throw std::invalid_argument("drop fraction removes every training point");
    std::vector<std::size_t> keep(ranking.begin() + static_cast<std::ptrdiff_t>(removed), ranking.end());
    std::sort(keep.begin(), keep.end());
    const auto kept = full.subset(keep);
    result.points.push_back({f, removed, knn_accuracy(kept, heldout, knn, config.threads)});
  }
  return result;
}

// ---------------------------------------------------------------------------
// Selection
// ---------------------------------------------------------------------------

struct Selection {
  std::vector<std::size_t> indices;
  /// Set when nothing has positive value.
  bool empty = true;
};

inline Selection select_positive(std::span<const double> values) {
  Selection s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] > 0.0) s.indices.push_back(i);
  }
  s.empty = s.indices.empty();
  return s;
}

// ---------------------------------------------------------------------------
// Acquisition
// ---------------------------------------------------------------------------

/// Predicts the value a new point would have from its features.
class ValuePredictor {
 public:
  virtual ~ValuePredictor() = default;
  virtual double predict(std::span<const double> features) const = 0;
};

/// Mean value of the r nearest seed points (ties by seed index).
class KnnValueRegressor final : public ValuePredictor {
 public:
  KnnValueRegressor(const LabeledDataset& seed, std::vector<double> seed_values, std::size_t r,
                    DistanceMetric metric = DistanceMetric::SquaredEuclidean)
      : seed_(seed), values_(std::move(seed_values)), r_(r), sorter_(seed_, metric) {
    if (values_.size() != seed_.rows()) throw std::invalid_argument("one value per seed point is required");
    if (r_ == 0) throw std::invalid_argument("neighbor count r must be at least 1");
    if (r_ > seed_.rows()) {
      throw std::invalid_argument("neighbor count r = " + std::to_string(r_) + " exceeds seed size " +
                                  std::to_string(seed_.rows()));
    }
  }

  KnnValueRegressor(const KnnValueRegressor&) = delete;
  KnnValueRegressor& operator=(const KnnValueRegressor&) = delete;

  double predict(std::span<const double> features) const override {
    const auto order = sorter_.order(features);
    double sum = 0.0;
    for (std::size_t t = 0; t < r_; ++t) sum += values_[order[t]];
    return sum / static_cast<double>(r_);
  }

 private:
  LabeledDataset seed_;
  std::vector<double> values_;
  std::size_t r_;
  NeighborSorter sorter_;
};

struct AcquisitionEntry {
  std::size_t candidate = 0;
  double predicted_value = 0.0;
};

/// Candidates sorted by predicted value, highest first; ties by candidate index.
inline std::vector<AcquisitionEntry> acquisition_rank(DatasetView candidates, const ValuePredictor& predictor,
                                                      std::size_t threads = 1) {
  std::vector<double> predicted(candidates.rows());
  parallel_for(candidates.rows(), threads, [&](std::size_t c) { predicted[c] = predictor.predict(candidates.row(c)); });
  std::vector<AcquisitionEntry> out;
  out.reserve(candidates.rows());
  for (std::size_t c : descending_ranking(predicted)) out.push_back({c, predicted[c]});
  return out;
}

inline std::vector<AcquisitionEntry> acquisition_rank(const LabeledDataset& seed, std::span<const double> seed_values,
                                                      DatasetView candidates, std::size_t r,
                                                      DistanceMetric metric = DistanceMetric::SquaredEuclidean,
                                                      std::size_t threads = 1) {
  if (candidates.dim() != seed.dim()) throw DataError("dimension mismatch between candidates and seed set");
  const KnnValueRegressor predictor(seed, std::vector<double>(seed_values.begin(), seed_values.end()), r, metric);
  return acquisition_rank(candidates, predictor, threads);
}

}  // namespace dval

#endif  // DVAL_HARNESS_HPP
