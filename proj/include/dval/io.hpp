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

#ifndef DVAL_IO_HPP
#define DVAL_IO_HPP

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dval/dataset.hpp"
#include "dval/harness.hpp"
#include "dval/knn_values.hpp"

// Result-file formats shared by the command-line tool and its tests.

namespace dval {

inline constexpr int kValuesSchema = 1;

/// %.17g: enough digits to round-trip any double.
inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// 64-bit FNV-1a content hash.
inline std::uint64_t content_hash(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw DataError("write failed for '" + path + "'");
}

/**
 * Values file:
 *   {"schema": 1, "measure", "n", "k", "metric", "aggregation", "seed"?,
 *    "values": [N], "per_validation"?: [N][M], ...extra}
 * Reals are written with 17 significant digits; key order is fixed.
 * `extra` members (e.g. Monte Carlo diagnostics) are appended verbatim.
 */
inline std::string values_to_json(const ValueVector& v, const nlohmann::ordered_json& extra = {}) {
  std::string out = "{\"schema\": " + std::to_string(kValuesSchema);
  out += ", \"measure\": " + nlohmann::json(v.measure).dump();
  out += ", \"n\": " + std::to_string(v.values.size());
  out += ", \"k\": " + std::to_string(v.k);
  out += ", \"metric\": \"" + std::string(to_string(v.metric)) + "\"";
  out += ", \"aggregation\": \"" + std::string(to_string(v.aggregation)) + "\"";
  if (v.seed) out += ", \"seed\": " + std::to_string(*v.seed);
  out += ",\n \"values\": [";
  for (std::size_t i = 0; i < v.values.size(); ++i) out += (i ? ", " : "") + format_real(v.values[i]);
  out += "]";
  if (v.has_per_validation()) {
    out += ",\n \"per_validation\": [";
    for (std::size_t i = 0; i < v.values.size(); ++i) {
      out += i ? ",\n  [" : "\n  [";
      for (std::size_t j = 0; j < v.num_validation; ++j) out += (j ? ", " : "") + format_real(v.per_validation_at(i, j));
      out += "]";
    }
    out += "]";
  }
  if (extra.is_object()) {
    for (const auto& [key, value] : extra.items()) out += ",\n " + nlohmann::json(key).dump() + ": " + value.dump();
  }
  out += "}\n";
  return out;
}

inline ValueVector values_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("values file is not valid JSON: ") + e.what());
  }
  try {
    if (j.value("schema", 0) != kValuesSchema) throw DataError("values file: unsupported or missing schema");
    ValueVector v;
    v.values = j.at("values").get<std::vector<double>>();
    v.measure = j.value("measure", std::string("unknown"));
    v.k = j.value("k", std::size_t{0});
    v.metric = parse_metric(j.value("metric", std::string("sqeuclidean")));
    v.aggregation = parse_aggregation(j.value("aggregation", std::string("mean")));
    if (j.contains("seed")) v.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("n") && j.at("n").get<std::size_t>() != v.values.size()) {
      throw DataError("values file: 'n' does not match the length of 'values'");
    }
    if (j.contains("per_validation")) {
      const auto rows = j.at("per_validation").get<std::vector<std::vector<double>>>();
      if (rows.size() != v.values.size()) throw DataError("values file: per_validation row count mismatch");
      v.num_validation = rows.empty() ? 0 : rows.front().size();
      for (const auto& r : rows) {
        if (r.size() != v.num_validation) throw DataError("values file: ragged per_validation matrix");
        v.per_validation.insert(v.per_validation.end(), r.begin(), r.end());
      }
    }
    for (double x : v.values) {
      if (!std::isfinite(x)) throw DataError("values file: non-finite value");
    }
    return v;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("values file: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("values file: ") + e.what());
  }
}

inline ValueVector load_values(const std::string& path) {
  try {
    return values_from_json(detail::read_file(path));
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

/// Single column of 0/1, one row per training point; an optional non-numeric header line is skipped.
inline FlagSet parse_flags_csv(std::string_view text) {
  FlagSet flags;
  std::size_t start = 0;
  std::size_t line_no = 0;
  bool first = true;
  while (start <= text.size()) {
    auto pos = text.find('\n', start);
    if (pos == std::string_view::npos) pos = text.size();
    const auto cell = detail::trim(text.substr(start, pos - start));
    start = pos + 1;
    ++line_no;
    if (cell.empty()) continue;
    if (cell == "0" || cell == "1") {
      flags.push_back(cell == "1");
    } else if (!first) {
      throw DataError("flags line " + std::to_string(line_no) + ": expected 0 or 1, got '" + std::string(cell) + "'");
    }
    first = false;
  }
  if (flags.empty()) throw DataError("flags file has no rows");
  return flags;
}

inline std::string flags_to_csv(const FlagSet& flags) {
  std::string out = "flag\n";
  for (bool f : flags) out += f ? "1\n" : "0\n";
  return out;
}

inline std::string curve_to_csv(const DetectionCurve& curve) {
  std::string out = "fraction_checked,fraction_detected\n";
  for (const auto& p : curve.points) out += format_real(p.fraction_checked) + "," + format_real(p.fraction_detected) + "\n";
  return out;
}

inline nlohmann::ordered_json curve_summary(const DetectionCurve& curve) {
  nlohmann::ordered_json j;
  j["num_points"] = curve.points.size() - 1;
  j["num_flagged"] = curve.num_flagged;
  auto& marks = j["recall_at"];
  marks = nlohmann::ordered_json::array();
  for (const auto& m : curve.landmarks) marks.push_back({{"fraction_checked", m.fraction_checked}, {"recall", m.fraction_detected}});
  return j;
}

}  // namespace dval

#endif  // DVAL_IO_HPP
