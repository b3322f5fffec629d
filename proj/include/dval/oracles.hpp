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

#ifndef DVAL_ORACLES_HPP
#define DVAL_ORACLES_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "dval/common.hpp"
#include "dval/dataset.hpp"
#include "dval/knn_values.hpp"

/**
 * @file oracles.hpp
 * @brief Model-agnostic valuation over an abstract utility: exact LOO,
 * brute-force Shapley, permutation Monte Carlo, and Spearman comparison.
 */

namespace dval {

/// Subset membership: one byte per training point, nonzero = present.
using Membership = std::span<const std::uint8_t>;

inline std::string describe_subset(Membership members) {
  std::ostringstream ss;
  ss << '{';
  bool first = true;
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (!members[i]) continue;
    ss << (first ? "" : ",") << i;
    first = false;
  }
  ss << '}';
  return ss.str();
}

inline std::uint64_t membership_mask(Membership members) {
  if (members.size() > 64) throw std::invalid_argument("bitmask subsets support at most 64 points");
  std::uint64_t mask = 0;
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (members[i]) mask |= std::uint64_t{1} << i;
  }
  return mask;
}

/// Raised when a utility evaluation fails; carries the subset that failed.
class OracleError : public std::runtime_error {
 public:
  OracleError(std::string subset, const std::string& reason)
      : std::runtime_error("utility evaluation failed on subset " + subset + ": " + reason),
        subset_(std::move(subset)) {}
  const std::string& subset() const { return subset_; }

 private:
  std::string subset_;
};

/**
 * @brief U(S): maps a subset of the n training points to a real utility.
 *
 * Implementations must be deterministic and must accept the empty set.
 * `evaluate` is called concurrently from worker threads when a routine runs
 * with threads > 1, so it must not mutate shared state.
 */
class UtilityOracle {
 public:
  virtual ~UtilityOracle() = default;
  virtual std::size_t size() const = 0;
  virtual double evaluate(Membership members) const = 0;
};

namespace detail {

inline double checked_eval(const UtilityOracle& oracle, Membership members) {
  double u;
  try {
    u = oracle.evaluate(members);
  } catch (const OracleError&) {
    throw;
  } catch (const std::exception& e) {
    throw OracleError(describe_subset(members), e.what());
  }
  if (!std::isfinite(u)) throw OracleError(describe_subset(members), "non-finite utility");
  return u;
}

}  // namespace detail

/// KNN utility averaged over validation points.
class KnnUtilityOracle final : public UtilityOracle {
 public:
  KnnUtilityOracle(DatasetView train, DatasetView val, const KnnConfig& config) : n_(train.rows()), k_(config.k) {
    config.validate();
    const auto ordering = compute_ordering(train, val, config.metric);
    orderings_ = ordering.per_point;
    matches_.resize(val.rows());
    for (std::size_t v = 0; v < val.rows(); ++v) {
      matches_[v].resize(n_);
      for (std::size_t pos = 0; pos < n_; ++pos) {
        matches_[v][pos] = train.label(orderings_[v][pos]) == val.label(v);
      }
    }
  }

  std::size_t size() const override { return n_; }

  double evaluate(Membership members) const override {
    if (members.size() != n_) throw std::invalid_argument("membership size does not match training size");
    double total = 0.0;
    for (std::size_t v = 0; v < orderings_.size(); ++v) {
      std::size_t taken = 0;
      std::size_t hits = 0;
      for (std::size_t pos = 0; pos < n_ && taken < k_; ++pos) {
        if (!members[orderings_[v][pos]]) continue;
        ++taken;
        hits += matches_[v][pos];
      }
      total += static_cast<double>(hits) / static_cast<double>(k_);
    }
    return total / static_cast<double>(orderings_.size());
  }

 private:
  std::size_t n_;
  std::size_t k_;
  std::vector<std::vector<std::size_t>> orderings_;
  std::vector<std::vector<std::uint8_t>> matches_;
};

/// Utility given as a function of a bitmask (n <= 64).
class MaskFunctionOracle final : public UtilityOracle {
 public:
  MaskFunctionOracle(std::size_t n, std::function<double(std::uint64_t)> fn) : n_(n), fn_(std::move(fn)) {
    if (n > 64) throw std::invalid_argument("MaskFunctionOracle supports at most 64 points");
  }
  std::size_t size() const override { return n_; }
  double evaluate(Membership members) const override { return fn_(membership_mask(members)); }

 private:
  std::size_t n_;
  std::function<double(std::uint64_t)> fn_;
};

/**
 * @brief Utility tabulated per subset bitmask.
 *
 * Text format: one `<hex mask> <decimal utility>` pair per line, bit i set
 * meaning training point i is present; blank lines and lines starting with
 * '#' are ignored. A `0x` prefix on the mask is optional. Evaluating a subset
 * missing from the table is an error.
 */
class TabulatedOracle final : public UtilityOracle {
 public:
  TabulatedOracle(std::size_t n, std::unordered_map<std::uint64_t, double> table) : n_(n), table_(std::move(table)) {
    if (n > 64) throw std::invalid_argument("TabulatedOracle supports at most 64 points");
  }

  static TabulatedOracle parse(std::string_view text, std::size_t n) {
    std::unordered_map<std::uint64_t, double> table;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
      auto pos = text.find('\n', start);
      if (pos == std::string_view::npos) pos = text.size();
      auto line = detail::trim(text.substr(start, pos - start));
      start = pos + 1;
      ++line_no;
      if (line.empty() || line.front() == '#') continue;
      const auto sep = line.find_first_of(" \t,");
      if (sep == std::string_view::npos) {
        throw DataError("utility table line " + std::to_string(line_no) + ": expected '<hex mask> <utility>'");
      }
      auto mask_text = detail::trim(line.substr(0, sep));
      auto value_text = detail::trim(line.substr(sep + 1));
      if (!value_text.empty() && value_text.front() == ',') value_text = detail::trim(value_text.substr(1));
      if (mask_text.starts_with("0x") || mask_text.starts_with("0X")) mask_text.remove_prefix(2);
      std::uint64_t mask = 0;
      auto [ptr, ec] = std::from_chars(mask_text.data(), mask_text.data() + mask_text.size(), mask, 16);
      if (mask_text.empty() || ec != std::errc() || ptr != mask_text.data() + mask_text.size()) {
        throw DataError("utility table line " + std::to_string(line_no) + ": bad hex mask '" +
                        std::string(mask_text) + "'");
      }
      if (n < 64 && (mask >> n) != 0) {
        throw DataError("utility table line " + std::to_string(line_no) + ": mask has bits beyond n = " +
                        std::to_string(n));
      }
      const auto value = detail::parse_double(value_text);
      if (!value || !std::isfinite(*value)) {
        throw DataError("utility table line " + std::to_string(line_no) + ": bad utility '" +
                        std::string(value_text) + "'");
      }
      if (!table.emplace(mask, *value).second) {
        throw DataError("utility table line " + std::to_string(line_no) + ": duplicate mask");
      }
    }
    return TabulatedOracle(n, std::move(table));
  }

  std::size_t size() const override { return n_; }

  double evaluate(Membership members) const override {
    const auto it = table_.find(membership_mask(members));
    if (it == table_.end()) throw std::out_of_range("subset not present in utility table");
    return it->second;
  }

  const std::unordered_map<std::uint64_t, double>& table() const { return table_; }

 private:
  std::size_t n_;
  std::unordered_map<std::uint64_t, double> table_;
};

// ---------------------------------------------------------------------------
// Exact values
// ---------------------------------------------------------------------------

/// v(i) = U(D) - U(D \ {i}); exactly n + 1 oracle calls.
inline std::vector<double> exact_loo(const UtilityOracle& oracle) {
  const std::size_t n = oracle.size();
  std::vector<std::uint8_t> members(n, 1);
  const double full = detail::checked_eval(oracle, members);
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    members[i] = 0;
    values[i] = full - detail::checked_eval(oracle, members);
    members[i] = 1;
  }
  return values;
}

inline constexpr std::size_t kExactShapleyCap = 20;

class SubsetCapExceeded : public std::length_error {
 public:
  SubsetCapExceeded(std::size_t n, std::size_t cap)
      : std::length_error("exact Shapley enumerates 2^n subsets; n = " + std::to_string(n) +
                          " exceeds the cap of " + std::to_string(cap) +
                          " (use knn-shapley or mc-shapley for larger sets)") {}
};

struct ExactShapleyOptions {
  std::size_t cap = kExactShapleyCap;
  /// Evaluate each of the 2^n subsets once and reuse it; off = evaluate per marginal.
  bool memoize = true;
  std::size_t threads = 1;
};

/**
 * Brute-force Shapley value by enumerating every subset:
 *   v(i) = (1/n) * sum_{S subset of D\{i}} [U(S + i) - U(S)] / C(n-1, |S|)
 * Marginals are accumulated per coalition size in ascending mask order, then
 * weighted; memoized and direct evaluation yield bit-identical results.
 */
inline std::vector<double> exact_shapley(const UtilityOracle& oracle, const ExactShapleyOptions& options = {}) {
  const std::size_t n = oracle.size();
  if (n > options.cap || n > 30) throw SubsetCapExceeded(n, std::min<std::size_t>(options.cap, 30));
  if (n == 0) return {};
  const std::uint64_t count = std::uint64_t{1} << n;

  auto members_of = [n](std::uint64_t mask, std::vector<std::uint8_t>& buf) {
    for (std::size_t b = 0; b < n; ++b) buf[b] = (mask >> b) & 1U;
  };

  std::vector<double> table;
  if (options.memoize) {
    table.resize(count);
    const std::size_t threads = std::max<std::size_t>(1, options.threads);
    const std::uint64_t chunk = (count + threads - 1) / threads;
    parallel_for(threads, threads, [&](std::size_t w) {
      std::vector<std::uint8_t> buf(n);
      const std::uint64_t end = std::min(count, (w + 1) * chunk);
      for (std::uint64_t mask = w * chunk; mask < end; ++mask) {
        members_of(mask, buf);
        table[mask] = detail::checked_eval(oracle, buf);
      }
    });
  }

  // binom[s] = C(n-1, s), exact in double for n <= 30.
  std::vector<double> binom(n, 1.0);
  for (std::size_t s = 1; s < n; ++s) binom[s] = binom[s - 1] * static_cast<double>(n - s) / static_cast<double>(s);

  std::vector<double> values(n, 0.0);
  parallel_for(n, options.memoize ? std::max<std::size_t>(1, options.threads) : 1, [&](std::size_t i) {
    std::vector<std::uint8_t> buf(n);
    auto utility = [&](std::uint64_t mask) {
      if (options.memoize) return table[mask];
      members_of(mask, buf);
      return detail::checked_eval(oracle, buf);
    };
    const std::uint64_t bit = std::uint64_t{1} << i;
    std::vector<double> by_size(n, 0.0);
    for (std::uint64_t mask = 0; mask < count; ++mask) {
      if (mask & bit) continue;
      const double with = utility(mask | bit);
      const double without = utility(mask);
      by_size[static_cast<std::size_t>(std::popcount(mask))] += with - without;
    }
    double total = 0.0;
    for (std::size_t s = 0; s < n; ++s) total += by_size[s] / binom[s];
    values[i] = total / static_cast<double>(n);
  });
  return values;
}

// ---------------------------------------------------------------------------
// Permutation Monte Carlo
// ---------------------------------------------------------------------------

struct McConfig {
  std::size_t permutations = 1000;
  /// Stop scanning a permutation once |U(D) - U(prefix)| < tolerance; 0 disables truncation.
  double truncation_tolerance = 0.0;
  std::uint64_t seed = 0;
  /// When set, stop once the running estimate moved by less than this (max abs over points)
  /// across the last `early_stop_window` permutations.
  std::optional<double> early_stop_threshold;
  std::size_t early_stop_window = 100;
  std::size_t threads = 1;

  void validate() const {
    if (permutations == 0) throw std::invalid_argument("permutation count must be at least 1");
    if (!(truncation_tolerance >= 0.0)) throw std::invalid_argument("truncation tolerance must be nonnegative");
    if (early_stop_window == 0) throw std::invalid_argument("early-stop window must be at least 1");
  }
};

struct McResult {
  std::vector<double> values;
  /// Per-point standard error of the mean marginal contribution.
  std::vector<double> std_error;
  std::size_t permutations_used = 0;
  /// Mean number of points whose marginal contribution was evaluated per permutation.
  double mean_truncation_position = 0.0;
  bool early_stopped = false;
};

/// Permutation `index` of the sampler: Fisher-Yates over 0..n-1 with stream `index`.
inline std::vector<std::size_t> sample_permutation(std::size_t n, std::uint64_t seed, std::uint64_t index) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  auto gen = rng::make_engine(seed, index);
  rng::shuffle(gen, std::span<std::size_t>(perm));
  return perm;
}

/**
 * Monte Carlo Shapley estimate from sampled permutations with optional
 * truncation. Each permutation is scanned from the front; the first point is
 * always evaluated, and before every later point the scan stops if the prefix
 * utility is within `truncation_tolerance` of U(D), leaving zero marginal
 * contribution to the rest. Permutations are computed in blocks (in parallel
 * when threads > 1) and folded in permutation order, so the output depends
 * only on the seed.
 */
inline McResult mc_shapley(const UtilityOracle& oracle, const McConfig& config) {
  config.validate();
  const std::size_t n = oracle.size();
  McResult result;
  result.values.assign(n, 0.0);
  result.std_error.assign(n, 0.0);
  if (n == 0) return result;

  const double full = detail::checked_eval(oracle, std::vector<std::uint8_t>(n, 1));
  const double empty = detail::checked_eval(oracle, std::vector<std::uint8_t>(n, 0));
  const double tol = config.truncation_tolerance;

  struct Sample {
    std::vector<double> contribution;
    std::size_t scanned = 0;
  };
  auto run_one = [&](std::uint64_t index, Sample& out) {
    const auto perm = sample_permutation(n, config.seed, index);
    std::vector<std::uint8_t> members(n, 0);
    out.contribution.assign(n, 0.0);
    double prev = empty;
    std::size_t pos = 0;
    for (; pos < n; ++pos) {
      if (pos > 0 && std::abs(full - prev) < tol) break;
      members[perm[pos]] = 1;
      const double cur = detail::checked_eval(oracle, members);
      out.contribution[perm[pos]] = cur - prev;
      prev = cur;
    }
    out.scanned = pos;
  };

  const std::size_t threads = std::max<std::size_t>(1, config.threads);
  const std::size_t block = std::max<std::size_t>(64, 16 * threads);
  std::vector<Sample> samples(std::min(block, config.permutations));
  std::vector<double> sum(n, 0.0), sum_sq(n, 0.0);
  std::size_t scanned_total = 0;
  std::size_t used = 0;

  const std::size_t window = config.early_stop_window;
  std::vector<std::vector<double>> history;  // running estimates, ring buffer of window + 1
  if (config.early_stop_threshold) history.resize(window + 1);

  bool stop = false;
  for (std::size_t start = 0; start < config.permutations && !stop; start += block) {
    const std::size_t count = std::min(block, config.permutations - start);
    parallel_for(count, threads, [&](std::size_t b) { run_one(start + b, samples[b]); });
    for (std::size_t b = 0; b < count; ++b) {
      const auto& s = samples[b];
      for (std::size_t i = 0; i < n; ++i) {
        sum[i] += s.contribution[i];
        sum_sq[i] += s.contribution[i] * s.contribution[i];
      }
      scanned_total += s.scanned;
      ++used;
      if (config.early_stop_threshold) {
        auto& slot = history[used % (window + 1)];
        slot.resize(n);
        for (std::size_t i = 0; i < n; ++i) slot[i] = sum[i] / static_cast<double>(used);
        if (used > window) {
          const auto& past = history[(used - window) % (window + 1)];
          double change = 0.0;
          for (std::size_t i = 0; i < n; ++i) change = std::max(change, std::abs(slot[i] - past[i]));
          if (change < *config.early_stop_threshold) {
            stop = true;
            result.early_stopped = true;
            break;
          }
        }
      }
    }
  }

  const double t = static_cast<double>(used);
  for (std::size_t i = 0; i < n; ++i) {
    const double mean = sum[i] / t;
    result.values[i] = mean;
    if (used > 1) {
      const double var = std::max(0.0, (sum_sq[i] - t * mean * mean) / (t - 1.0));
      result.std_error[i] = std::sqrt(var / t);
    }
  }
  result.permutations_used = used;
  result.mean_truncation_position = static_cast<double>(scanned_total) / t;
  return result;
}

// ---------------------------------------------------------------------------
// Rank correlation
// ---------------------------------------------------------------------------

/// 1-based ranks; tied entries share the average of their positions.
inline std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

struct RankCorrelation {
  double rho = 0.0;
  /// Two-sided, from t = rho * sqrt((n-2) / (1-rho^2)) with n-2 degrees of freedom.
  double p_value = 1.0;
};

/// Spearman rho: Pearson correlation of average ranks.
inline RankCorrelation rank_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("rank correlation: lengths differ (" + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
  }
  const std::size_t n = a.size();
  if (n < 3) throw std::invalid_argument("rank correlation needs at least 3 points");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double mean = (static_cast<double>(n) + 1.0) / 2.0;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (ra[i] - mean) * (rb[i] - mean);
    saa += (ra[i] - mean) * (ra[i] - mean);
    sbb += (rb[i] - mean) * (rb[i] - mean);
  }
  if (saa == 0.0 || sbb == 0.0) throw std::invalid_argument("rank correlation undefined for a constant vector");
  RankCorrelation out;
  out.rho = std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
  const double df = static_cast<double>(n - 2);
  if (std::abs(out.rho) >= 1.0) {
    out.p_value = 0.0;
  } else {
    const double t = out.rho * std::sqrt(df / (1.0 - out.rho * out.rho));
    const boost::math::students_t dist(df);
    out.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
  }
  return out;
}

}  // namespace dval

#endif  // DVAL_ORACLES_HPP
