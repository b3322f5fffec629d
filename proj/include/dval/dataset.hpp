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

#ifndef DVAL_DATASET_HPP
#define DVAL_DATASET_HPP

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dval/common.hpp"

/**
 * @file dataset.hpp
 * @brief Labeled feature matrices, file formats, distances and neighbor orderings.
 */

namespace dval {

using Label = std::uint32_t;

/**
 * @brief Non-owning view of a labeled feature matrix.
 *
 * Features are row-major, `rows * dim` doubles; one label per row.
 * All algorithms take views, so callers holding their own contiguous
 * buffers (e.g. language bindings) can avoid a copy.
 */
class DatasetView {
 public:
  DatasetView() = default;

  /// Validates shape and contents; throws DataError on any violation.
  DatasetView(std::span<const double> features, std::span<const Label> labels,
              std::size_t rows, std::size_t dim)
      : features_(features), labels_(labels), rows_(rows), dim_(dim) {
    if (rows == 0) throw DataError("dataset has no rows");
    if (dim == 0) throw DataError("dataset has zero feature columns");
    if (features.size() != rows * dim) {
      throw DataError("feature buffer holds " + std::to_string(features.size()) +
                      " values, expected rows*dim = " + std::to_string(rows * dim));
    }
    if (labels.size() != rows) {
      throw DataError("label count " + std::to_string(labels.size()) +
                      " does not match row count " + std::to_string(rows));
    }
    for (std::size_t i = 0; i < features.size(); ++i) {
      if (!std::isfinite(features[i])) {
        throw DataError("non-finite feature at row " + std::to_string(i / dim) +
                        ", column " + std::to_string(i % dim));
      }
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t dim() const { return dim_; }
  std::span<const double> features() const { return features_; }
  std::span<const Label> labels() const { return labels_; }
  std::span<const double> row(std::size_t i) const { return features_.subspan(i * dim_, dim_); }
  Label label(std::size_t i) const { return labels_[i]; }

  /// One more than the largest label id.
  std::size_t num_classes() const {
    return labels_.empty() ? 0 : static_cast<std::size_t>(*std::max_element(labels_.begin(), labels_.end())) + 1;
  }

 private:
  std::span<const double> features_;
  std::span<const Label> labels_;
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
};

/// Owning labeled dataset. Holds the training set or a validation set.
class LabeledDataset {
 public:
  LabeledDataset(std::vector<double> features, std::vector<Label> labels, std::size_t dim)
      : features_(std::move(features)), labels_(std::move(labels)), dim_(dim) {
    // Constructing the view runs every invariant check.
    (void)view();
  }

  std::size_t rows() const { return labels_.size(); }
  std::size_t dim() const { return dim_; }
  const std::vector<double>& features() const { return features_; }
  const std::vector<Label>& labels() const { return labels_; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features_).subspan(i * dim_, dim_);
  }
  Label label(std::size_t i) const { return labels_[i]; }
  std::size_t num_classes() const { return view().num_classes(); }

  DatasetView view() const { return DatasetView(features_, labels_, labels_.size(), dim_); }
  operator DatasetView() const { return view(); }  // NOLINT(google-explicit-constructor)

  /// Rows `indices` in the given order.
  LabeledDataset subset(std::span<const std::size_t> indices) const {
    std::vector<double> f;
    std::vector<Label> l;
    f.reserve(indices.size() * dim_);
    l.reserve(indices.size());
    for (std::size_t i : indices) {
      if (i >= rows()) throw std::out_of_range("subset index " + std::to_string(i) + " out of range");
      auto r = row(i);
      f.insert(f.end(), r.begin(), r.end());
      l.push_back(labels_[i]);
    }
    return LabeledDataset(std::move(f), std::move(l), dim_);
  }

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;

 private:
  std::vector<double> features_;
  std::vector<Label> labels_;
  std::size_t dim_;
};

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

enum class DatasetFormat { Auto, Csv, Binary };

inline constexpr std::string_view kBinaryMagic = "DVAL1";

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return cells;
}

inline std::optional<double> parse_double(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

template <typename Int>
std::optional<Int> parse_int(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  Int v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

inline void put_u64le(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

inline void put_u32le(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

inline std::uint64_t get_uint_le(std::string_view bytes, std::size_t offset, int width) {
  std::uint64_t v = 0;
  for (int b = 0; b < width; ++b) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[offset + b])) << (8 * b);
  }
  return v;
}

}  // namespace detail

/**
 * Parses CSV text: a header row with one column named `label` (integer class
 * id) and numeric feature columns in file order. Blank lines are skipped.
 * Errors name the 1-based file line and the column.
 */
inline LabeledDataset parse_csv_dataset(std::string_view text) {
  std::vector<std::string_view> lines;
  {
    std::size_t start = 0;
    while (start <= text.size()) {
      auto pos = text.find('\n', start);
      if (pos == std::string_view::npos) pos = text.size();
      lines.push_back(text.substr(start, pos - start));
      start = pos + 1;
    }
  }
  std::size_t line_no = 0;
  auto next_nonblank = [&]() -> std::optional<std::string_view> {
    while (line_no < lines.size()) {
      auto l = detail::trim(lines[line_no++]);
      if (!l.empty()) return l;
    }
    return std::nullopt;
  };

  auto header_line = next_nonblank();
  if (!header_line) throw DataError("no data rows");
  if (header_line->starts_with("\xEF\xBB\xBF")) header_line->remove_prefix(3);
  const auto header = detail::split_csv_line(*header_line);
  std::optional<std::size_t> label_col;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c].empty()) {
      throw DataError("malformed header: column " + std::to_string(c + 1) + " has an empty name");
    }
    if (header[c] == "label") {
      if (label_col) throw DataError("malformed header: duplicate 'label' column");
      label_col = c;
    }
  }
  if (!label_col) throw DataError("missing label column: header has no column named 'label'");
  const std::size_t dim = header.size() - 1;
  if (dim == 0) throw DataError("malformed header: no feature columns");

  std::vector<double> features;
  std::vector<Label> labels;
  while (auto line = next_nonblank()) {
    const std::size_t file_line = line_no;  // 1-based line of `line`
    const auto cells = detail::split_csv_line(*line);
    if (cells.size() != header.size()) {
      throw DataError("row at line " + std::to_string(file_line) + " has " + std::to_string(cells.size()) +
                      " cells, header has " + std::to_string(header.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string where = "line " + std::to_string(file_line) + ", column " + std::to_string(c + 1) +
                                " ('" + std::string(header[c]) + "')";
      if (c == *label_col) {
        auto v = detail::parse_int<std::int64_t>(cells[c]);
        if (!v) throw DataError("non-integer label '" + std::string(cells[c]) + "' at " + where);
        if (*v < 0 || *v > std::numeric_limits<Label>::max()) {
          throw DataError("label " + std::to_string(*v) + " out of range at " + where);
        }
        labels.push_back(static_cast<Label>(*v));
      } else {
        auto v = detail::parse_double(cells[c]);
        if (!v) throw DataError("non-numeric feature '" + std::string(cells[c]) + "' at " + where);
        if (!std::isfinite(*v)) throw DataError("non-finite feature '" + std::string(cells[c]) + "' at " + where);
        features.push_back(*v);
      }
    }
  }
  if (labels.empty()) throw DataError("no data rows");
  return LabeledDataset(std::move(features), std::move(labels), dim);
}

/// Column names are f0..f{d-1} followed by `label`; reals use 17 significant digits.
inline std::string to_csv(const LabeledDataset& data) {
  std::string out;
  for (std::size_t c = 0; c < data.dim(); ++c) out += "f" + std::to_string(c) + ",";
  out += "label\n";
  char buf[32];
  for (std::size_t i = 0; i < data.rows(); ++i) {
    for (double v : data.row(i)) {
      std::snprintf(buf, sizeof buf, "%.17g,", v);
      out += buf;
    }
    out += std::to_string(data.label(i));
    out += '\n';
  }
  return out;
}

/// `DVAL1`, u64 N, u64 d, N*d f64 row-major, N u32 labels; all little-endian.
inline std::string to_binary(const LabeledDataset& data) {
  std::string out(kBinaryMagic);
  detail::put_u64le(out, data.rows());
  detail::put_u64le(out, data.dim());
  for (double v : data.features()) detail::put_u64le(out, std::bit_cast<std::uint64_t>(v));
  for (Label l : data.labels()) detail::put_u32le(out, l);
  return out;
}

inline LabeledDataset parse_binary_dataset(std::string_view bytes) {
  constexpr std::size_t kHeader = 5 + 8 + 8;
  if (bytes.size() < kHeader || bytes.substr(0, 5) != kBinaryMagic) {
    throw DataError("binary dataset: missing DVAL1 magic or truncated header");
  }
  const std::uint64_t n = detail::get_uint_le(bytes, 5, 8);
  const std::uint64_t d = detail::get_uint_le(bytes, 13, 8);
  if (n == 0) throw DataError("no data rows");
  if (d == 0) throw DataError("binary dataset: zero feature columns");
  if (d > (bytes.size() - kHeader) / 8 || n > (bytes.size() - kHeader) / (8 * d + 4) ||
      bytes.size() != kHeader + n * d * 8 + n * 4) {
    throw DataError("binary dataset: payload size " + std::to_string(bytes.size()) +
                    " does not match N=" + std::to_string(n) + ", d=" + std::to_string(d));
  }
  std::vector<double> features(n * d);
  std::size_t off = kHeader;
  for (std::size_t i = 0; i < n * d; ++i, off += 8) {
    features[i] = std::bit_cast<double>(detail::get_uint_le(bytes, off, 8));
    if (!std::isfinite(features[i])) {
      throw DataError("non-finite feature at row " + std::to_string(i / d + 1) + ", column " +
                      std::to_string(i % d + 1));
    }
  }
  std::vector<Label> labels(n);
  for (std::size_t i = 0; i < n; ++i, off += 4) {
    labels[i] = static_cast<Label>(detail::get_uint_le(bytes, off, 4));
  }
  return LabeledDataset(std::move(features), std::move(labels), d);
}

/// Loads a dataset; `Auto` picks binary when the file starts with the magic bytes.
inline LabeledDataset load_dataset(const std::string& path, DatasetFormat format = DatasetFormat::Auto) {
  const std::string bytes = detail::read_file(path);
  if (format == DatasetFormat::Auto) {
    format = std::string_view(bytes).starts_with(kBinaryMagic) ? DatasetFormat::Binary : DatasetFormat::Csv;
  }
  try {
    return format == DatasetFormat::Binary ? parse_binary_dataset(bytes) : parse_csv_dataset(bytes);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline void save_dataset(const LabeledDataset& data, const std::string& path, DatasetFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  const std::string payload = format == DatasetFormat::Binary ? to_binary(data) : to_csv(data);
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw DataError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Distances and orderings
// ---------------------------------------------------------------------------

enum class DistanceMetric { SquaredEuclidean, Cosine };

inline std::string_view to_string(DistanceMetric m) {
  return m == DistanceMetric::Cosine ? "cosine" : "sqeuclidean";
}

inline DistanceMetric parse_metric(std::string_view name) {
  if (name == "sqeuclidean" || name == "squared-euclidean") return DistanceMetric::SquaredEuclidean;
  if (name == "cosine" || name == "cosine-distance") return DistanceMetric::Cosine;
  throw std::invalid_argument("unknown metric '" + std::string(name) + "' (expected sqeuclidean or cosine)");
}

inline double squared_norm(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return s;
}

inline double squared_euclidean(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    s += diff * diff;
  }
  return s;
}

/// 1 - cos(a, b), clamped to [0, 2]. Undefined for zero vectors.
inline double cosine_distance(std::span<const double> a, std::span<const double> b, double norm_a, double norm_b) {
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return std::clamp(1.0 - dot / (norm_a * norm_b), 0.0, 2.0);
}

inline double distance(std::span<const double> a, std::span<const double> b, DistanceMetric metric) {
  if (a.size() != b.size()) throw std::invalid_argument("distance: dimension mismatch");
  if (metric == DistanceMetric::SquaredEuclidean) return squared_euclidean(a, b);
  const double na = std::sqrt(squared_norm(a));
  const double nb = std::sqrt(squared_norm(b));
  if (na == 0.0 || nb == 0.0) throw DataError("cosine distance undefined for a zero vector");
  return cosine_distance(a, b, na, nb);
}

/**
 * @brief Sorts a fixed reference set by distance to query points.
 *
 * Construction validates the reference set for the metric (no zero rows under
 * cosine) and caches row norms. Orderings break distance ties by ascending
 * reference index, so results are deterministic.
 */
class NeighborSorter {
 public:
  NeighborSorter(DatasetView reference, DistanceMetric metric) : reference_(reference), metric_(metric) {
    if (metric_ == DistanceMetric::Cosine) {
      norms_.resize(reference_.rows());
      for (std::size_t i = 0; i < reference_.rows(); ++i) {
        norms_[i] = std::sqrt(squared_norm(reference_.row(i)));
        if (norms_[i] == 0.0) {
          throw DataError("cosine distance undefined: reference row " + std::to_string(i) + " is a zero vector");
        }
      }
    }
  }

  DatasetView reference() const { return reference_; }
  DistanceMetric metric() const { return metric_; }

  /// Distances from `query` to every reference row, in reference order.
  std::vector<double> distances(std::span<const double> query) const {
    if (query.size() != reference_.dim()) {
      throw DataError("dimension mismatch: query has " + std::to_string(query.size()) + " features, reference has " +
                      std::to_string(reference_.dim()));
    }
    std::vector<double> out(reference_.rows());
    if (metric_ == DistanceMetric::SquaredEuclidean) {
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = squared_euclidean(reference_.row(i), query);
    } else {
      const double qn = std::sqrt(squared_norm(query));
      if (qn == 0.0) throw DataError("cosine distance undefined: query is a zero vector");
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = cosine_distance(reference_.row(i), query, norms_[i], qn);
    }
    return out;
  }

  /// Full permutation of reference indices by (distance, index).
  std::vector<std::size_t> order(std::span<const double> query) const {
    const auto dist = distances(query);
    struct Keyed {
      double d;
      std::uint32_t idx;
    };
    std::vector<Keyed> keyed(dist.size());
    for (std::size_t i = 0; i < dist.size(); ++i) keyed[i] = {dist[i], static_cast<std::uint32_t>(i)};
    std::sort(keyed.begin(), keyed.end(),
              [](const Keyed& a, const Keyed& b) { return a.d < b.d || (a.d == b.d && a.idx < b.idx); });
    std::vector<std::size_t> out(keyed.size());
    for (std::size_t i = 0; i < keyed.size(); ++i) out[i] = keyed[i].idx;
    return out;
  }

 private:
  DatasetView reference_;
  DistanceMetric metric_;
  std::vector<double> norms_;
};

/// Per validation point, training indices sorted by increasing distance.
struct NeighborOrdering {
  std::vector<std::vector<std::size_t>> per_point;

  std::size_t num_points() const { return per_point.size(); }
  std::span<const std::size_t> operator[](std::size_t v) const { return per_point[v]; }
};

inline void check_compatible(DatasetView train, DatasetView val) {
  if (train.dim() != val.dim()) {
    throw DataError("dimension mismatch: train has " + std::to_string(train.dim()) + " features, validation has " +
                    std::to_string(val.dim()));
  }
  if (train.rows() > std::numeric_limits<std::uint32_t>::max()) {
    throw DataError("training set too large for 32-bit neighbor indices");
  }
}

inline NeighborOrdering compute_ordering(DatasetView train, DatasetView val,
                                         DistanceMetric metric = DistanceMetric::SquaredEuclidean,
                                         std::size_t threads = 1) {
  check_compatible(train, val);
  const NeighborSorter sorter(train, metric);
  NeighborOrdering out;
  out.per_point.resize(val.rows());
  parallel_for(val.rows(), threads, [&](std::size_t v) { out.per_point[v] = sorter.order(val.row(v)); });
  return out;
}

}  // namespace dval

#endif  // DVAL_DATASET_HPP
