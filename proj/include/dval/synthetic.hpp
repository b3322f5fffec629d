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

#ifndef DVAL_SYNTHETIC_HPP
#define DVAL_SYNTHETIC_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <vector>

#include "dval/common.hpp"
#include "dval/dataset.hpp"

// Synthetic data and corruption generators for the application pipelines.
// All draws go through dval::rng, so outputs are reproducible from the seed.

namespace dval {

/// true = corrupted (flipped label, injected noise, watermark).
using FlagSet = std::vector<bool>;

struct Corrupted {
  LabeledDataset data;
  FlagSet flags;
};

/// Isotropic Gaussian classes. Class c is centered at
/// separation * (cos(2 pi c / C), sin(2 pi c / C), 0, ...); with d = 1 at c * separation.
struct BlobModel {
  std::size_t num_classes = 2;
  std::size_t dim = 2;
  double stddev = 1.0;
  std::vector<double> centers;  // num_classes x dim

  std::span<const double> center(std::size_t c) const {
    return std::span<const double>(centers).subspan(c * dim, dim);
  }
};

inline BlobModel make_blob_model(std::size_t num_classes, std::size_t dim, double separation, double stddev) {
  if (num_classes == 0 || dim == 0) throw std::invalid_argument("blob model needs at least one class and dimension");
  if (!(stddev >= 0.0)) throw std::invalid_argument("stddev must be nonnegative");
  BlobModel m;
  m.num_classes = num_classes;
  m.dim = dim;
  m.stddev = stddev;
  m.centers.assign(num_classes * dim, 0.0);
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (dim == 1) {
      m.centers[c] = static_cast<double>(c) * separation;
    } else {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(num_classes);
      m.centers[c * dim] = separation * std::cos(angle);
      m.centers[c * dim + 1] = separation * std::sin(angle);
    }
  }
  return m;
}

/// n rows; row i has label i % C.
inline LabeledDataset sample_blobs(const BlobModel& model, std::size_t n, std::uint64_t seed) {
  std::vector<double> features(n * model.dim);
  std::vector<Label> labels(n);
  auto gen = rng::make_engine(seed, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<Label>(i % model.num_classes);
    labels[i] = c;
    const auto center = model.center(c);
    for (std::size_t j = 0; j < model.dim; ++j) features[i * model.dim + j] = center[j] + model.stddev * rng::normal(gen);
  }
  return LabeledDataset(std::move(features), std::move(labels), model.dim);
}

namespace detail {

inline std::vector<std::size_t> choose_indices(std::size_t n, double fraction, rng::Engine& gen) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw std::invalid_argument("corruption fraction must lie in [0, 1]");
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  rng::shuffle(gen, std::span<std::size_t>(idx));
  idx.resize(count);
  return idx;
}

}  // namespace detail

/// Reassigns round(rate * N) randomly chosen points to a uniformly chosen different class.
inline Corrupted flip_labels(const LabeledDataset& data, double rate, std::uint64_t seed, std::size_t num_classes = 0) {
  if (num_classes == 0) num_classes = data.num_classes();
  if (num_classes < 2) throw std::invalid_argument("label flipping needs at least two classes");
  auto gen = rng::make_engine(seed, 1);
  auto labels = data.labels();
  FlagSet flags(data.rows(), false);
  for (std::size_t i : detail::choose_indices(data.rows(), rate, gen)) {
    const auto shift = 1 + rng::uniform_index(gen, num_classes - 1);
    labels[i] = static_cast<Label>((labels[i] + shift) % num_classes);
    flags[i] = true;
  }
  return {LabeledDataset(data.features(), std::move(labels), data.dim()), std::move(flags)};
}

/// Adds N(0, sigma^2) noise to every feature of round(fraction * N) randomly chosen points.
inline Corrupted add_feature_noise(const LabeledDataset& data, double fraction, double sigma, std::uint64_t seed) {
  auto gen = rng::make_engine(seed, 2);
  auto features = data.features();
  FlagSet flags(data.rows(), false);
  for (std::size_t i : detail::choose_indices(data.rows(), fraction, gen)) {
    for (std::size_t j = 0; j < data.dim(); ++j) features[i * data.dim() + j] += sigma * rng::normal(gen);
    flags[i] = true;
  }
  return {LabeledDataset(std::move(features), data.labels(), data.dim()), std::move(flags)};
}

/**
 * Replaces round(fraction * N) randomly chosen points by out-of-distribution
 * samples: features drawn around (offset, offset, ...) with the given spread,
 * label forced to `forced_label`.
 */
inline Corrupted inject_watermarks(const LabeledDataset& data, double fraction, double offset, double spread,
                                   Label forced_label, std::uint64_t seed) {
  auto gen = rng::make_engine(seed, 3);
  auto features = data.features();
  auto labels = data.labels();
  FlagSet flags(data.rows(), false);
  for (std::size_t i : detail::choose_indices(data.rows(), fraction, gen)) {
    for (std::size_t j = 0; j < data.dim(); ++j) features[i * data.dim() + j] = offset + spread * rng::normal(gen);
    labels[i] = forced_label;
    flags[i] = true;
  }
  return {LabeledDataset(std::move(features), std::move(labels), data.dim()), std::move(flags)};
}

}  // namespace dval

#endif  // DVAL_SYNTHETIC_HPP
