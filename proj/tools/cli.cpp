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

#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "dval/dval.hpp"

namespace dval::cli {
namespace {

using ordered_json = nlohmann::ordered_json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

// Records what produced a result file. Written next to the payload as
// <out>.manifest.json so the payload itself stays byte-reproducible.
class Manifest {
 public:
  explicit Manifest(std::string command) : command_(std::move(command)), start_(std::chrono::steady_clock::now()) {}

  void add_input(const std::string& role, const std::string& path) {
    inputs_.push_back({{"role", role}, {"path", path}, {"fnv1a64", hex64(content_hash(detail::read_file(path)))}});
  }

  ordered_json& config() { return config_; }

  void write(const std::string& result_path) const {
    ordered_json j;
    j["tool"] = "dval";
    j["version"] = kVersion;
    j["command"] = command_;
    j["inputs"] = inputs_;
    j["config"] = config_;
    j["duration_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    write_text_file(result_path + ".manifest.json", j.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::chrono::steady_clock::time_point start_;
  ordered_json inputs_ = ordered_json::array();
  ordered_json config_ = ordered_json::object();
};

/// "lo:hi" (inclusive range) or "a,b,c".
std::vector<std::size_t> parse_grid(const std::string& text) {
  std::vector<std::size_t> grid;
  const auto colon = text.find(':');
  if (colon != std::string::npos) {
    const auto lo = detail::parse_int<std::size_t>(detail::trim(std::string_view(text).substr(0, colon)));
    const auto hi = detail::parse_int<std::size_t>(detail::trim(std::string_view(text).substr(colon + 1)));
    if (!lo || !hi || *lo == 0 || *lo > *hi) throw UsageError("--grid expects lo:hi with 1 <= lo <= hi, got '" + text + "'");
    for (std::size_t k = *lo; k <= *hi; ++k) grid.push_back(k);
    return grid;
  }
  for (auto cell : detail::split_csv_line(text)) {
    const auto k = detail::parse_int<std::size_t>(cell);
    if (!k || *k == 0) throw UsageError("--grid entry '" + std::string(cell) + "' is not a positive integer");
    grid.push_back(*k);
  }
  if (grid.empty()) throw UsageError("--grid is empty");
  return grid;
}

std::vector<double> parse_real_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  for (auto cell : detail::split_csv_line(text)) {
    const auto v = detail::parse_double(cell);
    if (!v) throw UsageError(flag + " entry '" + std::string(cell) + "' is not a number");
    out.push_back(*v);
  }
  return out;
}

std::pair<std::size_t, std::size_t> parse_pair(const std::string& text) {
  const auto cells = detail::split_csv_line(text);
  if (cells.size() == 2) {
    const auto i = detail::parse_int<std::size_t>(cells[0]);
    const auto j = detail::parse_int<std::size_t>(cells[1]);
    if (i && j) return {*i, *j};
  }
  throw UsageError("--pair expects i,j with nonnegative integers, got '" + text + "'");
}

// ---------------------------------------------------------------------------
// value
// ---------------------------------------------------------------------------

struct ValueArgs {
  std::string measure;
  std::string train, val, out;
  std::optional<std::size_t> k;
  bool calibrate = false;
  std::string grid = "1:15";
  std::string metric = "sqeuclidean";
  std::string agg = "mean";
  bool per_validation = false;
  std::size_t threads = 1;
  std::optional<std::size_t> permutations;
  std::optional<std::uint64_t> seed;
  double tolerance = 0.0;
  std::optional<double> early_stop;
  std::size_t cap = kExactShapleyCap;
};

void run_value(const ValueArgs& a, std::ostream& out) {
  const bool is_mc = a.measure == "mc-shapley";
  const bool is_exact = a.measure == "exact-shapley" || a.measure == "exact-loo";
  if (a.k && a.calibrate) throw UsageError("give either --k or --calibrate, not both");
  if (is_mc && (!a.permutations || !a.seed)) throw UsageError("mc-shapley requires --permutations and --seed");
  const auto metric = parse_metric(a.metric);
  const auto agg = parse_aggregation(a.agg);
  if ((is_mc || is_exact) && agg != Aggregation::Mean) {
    throw UsageError(a.measure + " values the mean utility over validation points; use --agg mean");
  }

  Manifest manifest("value " + a.measure);
  manifest.add_input("train", a.train);
  manifest.add_input("val", a.val);
  const auto train = load_dataset(a.train);
  const auto val = load_dataset(a.val);

  KnnConfig config{a.k.value_or(kDefaultK), metric};
  if (a.calibrate) {
    const auto grid = parse_grid(a.grid);
    config.k = calibrate_k(train, val, grid, metric, a.threads).best_k;
    manifest.config()["calibration_grid"] = grid;
  }

  ValueVector result;
  ordered_json extra;
  if (a.measure == "knn-shapley" || a.measure == "knn-loo") {
    const ValuationOptions options{agg, a.per_validation, a.threads};
    result = a.measure == "knn-shapley" ? knn_shapley(train, val, config, options) : knn_loo(train, val, config, options);
  } else {
    const KnnUtilityOracle oracle(train, val, config);
    result.measure = a.measure;
    result.k = config.k;
    result.metric = metric;
    result.aggregation = Aggregation::Mean;
    result.num_validation = val.rows();
    if (a.measure == "exact-loo") {
      result.values = exact_loo(oracle);
    } else if (a.measure == "exact-shapley") {
      result.values = exact_shapley(oracle, {a.cap, true, a.threads});
    } else {
      McConfig mc;
      mc.permutations = *a.permutations;
      mc.seed = *a.seed;
      mc.truncation_tolerance = a.tolerance;
      mc.early_stop_threshold = a.early_stop;
      mc.threads = a.threads;
      const auto est = mc_shapley(oracle, mc);
      result.values = est.values;
      result.seed = mc.seed;
      extra["std_error"] = est.std_error;
      extra["diagnostics"] = {{"permutations_used", est.permutations_used},
                              {"mean_truncation_position", est.mean_truncation_position},
                              {"early_stopped", est.early_stopped},
                              {"truncation_tolerance", mc.truncation_tolerance}};
    }
  }

  write_text_file(a.out, values_to_json(result, extra));
  auto& cfg = manifest.config();
  cfg["k"] = config.k;
  cfg["metric"] = to_string(metric);
  cfg["aggregation"] = to_string(result.aggregation);
  cfg["threads"] = a.threads;
  if (a.seed) cfg["seed"] = *a.seed;
  if (a.permutations) cfg["permutations"] = *a.permutations;
  if (is_mc) cfg["truncation_tolerance"] = a.tolerance;
  manifest.write(a.out);
  out << a.measure << ": " << result.values.size() << " values (k=" << config.k << ") -> " << a.out << "\n";
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

struct CalibrateArgs {
  std::string train, val, grid, metric = "sqeuclidean", out;
  std::size_t threads = 1;
};

void run_calibrate(const CalibrateArgs& a, std::ostream& out) {
  Manifest manifest("calibrate");
  manifest.add_input("train", a.train);
  manifest.add_input("val", a.val);
  const auto grid = parse_grid(a.grid);
  const auto train = load_dataset(a.train);
  const auto val = load_dataset(a.val);
  const auto result = calibrate_k(train, val, grid, parse_metric(a.metric), a.threads);
  std::string table = "k,accuracy\n";
  for (const auto& [k, acc] : result.table) table += std::to_string(k) + "," + format_real(acc) + "\n";
  if (!a.out.empty()) {
    write_text_file(a.out, table);
    manifest.config()["grid"] = grid;
    manifest.config()["metric"] = a.metric;
    manifest.write(a.out);
  }
  out << table << "chosen_k " << result.best_k << "\n";
}

// ---------------------------------------------------------------------------
// detect / select / summarize / acquire
// ---------------------------------------------------------------------------

struct DetectArgs {
  std::string values, flags, out, summary;
};

void run_detect(const DetectArgs& a, std::ostream& out) {
  Manifest manifest("detect");
  manifest.add_input("values", a.values);
  manifest.add_input("flags", a.flags);
  const auto values = load_values(a.values);
  const auto flags = parse_flags_csv(detail::read_file(a.flags));
  const auto curve = detection_curve(values.values, flags);
  const std::string summary_path = a.summary.empty() ? a.out + ".summary.json" : a.summary;
  write_text_file(a.out, curve_to_csv(curve));
  write_text_file(summary_path, curve_summary(curve).dump(2) + "\n");
  manifest.write(a.out);
  for (const auto& m : curve.landmarks) out << "recall@" << m.fraction_checked << " " << m.fraction_detected << "\n";
}

struct SelectArgs {
  std::string values, out;
};

void run_select(const SelectArgs& a, std::ostream& out, std::ostream& err) {
  Manifest manifest("select");
  manifest.add_input("values", a.values);
  const auto values = load_values(a.values);
  const auto sel = select_positive(values.values);
  std::string csv = "index\n";
  for (auto i : sel.indices) csv += std::to_string(i) + "\n";
  if (!a.out.empty()) {
    write_text_file(a.out, csv);
    manifest.write(a.out);
  }
  if (sel.empty) err << "warning: no training point has positive value\n";
  out << "selected " << sel.indices.size() << " of " << values.size() << "\n";
}

struct SummarizeArgs {
  std::string train, val, heldout, values, fractions = "0,0.1,0.2,0.3,0.4,0.5", order = "low", metric = "sqeuclidean",
                                                 out, grid;
  std::optional<std::size_t> k;
  std::size_t threads = 1;
};

void run_summarize(const SummarizeArgs& a, std::ostream& out) {
  if (a.k && !a.grid.empty()) throw UsageError("give either --k or --grid, not both");
  if (a.order != "low" && a.order != "high") throw UsageError("--order must be low or high");
  Manifest manifest("summarize");
  for (const auto& [role, path] : {std::pair{"train", a.train}, {"val", a.val}, {"heldout", a.heldout}, {"values", a.values}}) {
    manifest.add_input(role, path);
  }
  const auto train = load_dataset(a.train);
  const auto val = load_dataset(a.val);
  const auto heldout = load_dataset(a.heldout);
  const auto values = load_values(a.values);
  SummarizationConfig config;
  config.k_grid = a.grid.empty() ? std::vector<std::size_t>{a.k.value_or(kDefaultK)} : parse_grid(a.grid);
  config.metric = parse_metric(a.metric);
  config.order = a.order == "low" ? RemovalOrder::LowFirst : RemovalOrder::HighFirst;
  config.threads = a.threads;
  const auto fractions = parse_real_list(a.fractions, "--fractions");
  const auto result = summarization_curve(train, val, heldout, values.values, fractions, config);
  std::string csv = "fraction,removed,accuracy\n";
  for (const auto& p : result.points) csv += format_real(p.fraction) + "," + std::to_string(p.removed) + "," + format_real(p.accuracy) + "\n";
  write_text_file(a.out, csv);
  manifest.config()["k"] = result.k;
  manifest.config()["order"] = a.order;
  manifest.write(a.out);
  out << "k " << result.k << "\n" << csv;
}

struct AcquireArgs {
  std::string seed_train, values, candidates, metric = "sqeuclidean", out;
  std::size_t r = 5;
  std::size_t threads = 1;
};

void run_acquire(const AcquireArgs& a, std::ostream& out) {
  Manifest manifest("acquire");
  manifest.add_input("seed_train", a.seed_train);
  manifest.add_input("values", a.values);
  manifest.add_input("candidates", a.candidates);
  const auto seed = load_dataset(a.seed_train);
  const auto values = load_values(a.values);
  const auto candidates = load_dataset(a.candidates);
  const auto ranking = acquisition_rank(seed, values.values, candidates, a.r, parse_metric(a.metric), a.threads);
  std::string csv = "rank,candidate,predicted_value\n";
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    csv += std::to_string(i) + "," + std::to_string(ranking[i].candidate) + "," + format_real(ranking[i].predicted_value) + "\n";
  }
  write_text_file(a.out, csv);
  manifest.config()["r"] = a.r;
  manifest.write(a.out);
  out << "ranked " << ranking.size() << " candidates -> " << a.out << "\n";
}

// ---------------------------------------------------------------------------
// op-test
// ---------------------------------------------------------------------------

struct OpTestArgs {
  std::string train, val, pool, measure = "knn-shapley", metric = "sqeuclidean", out;
  std::size_t val_row = 0;
  std::size_t k = kDefaultK;
  std::vector<std::string> pairs;
  bool all_pairs = false;
  std::size_t samples = 10000;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

void run_op_test(const OpTestArgs& a, std::ostream& out) {
  if (a.pairs.empty() == !a.all_pairs) throw UsageError("give --pair (repeatable) or --all-pairs");
  Manifest manifest("op-test");
  manifest.add_input("train", a.train);
  manifest.add_input("val", a.val);
  manifest.add_input("pool", a.pool);
  const auto train = load_dataset(a.train);
  const auto val = load_dataset(a.val);
  const auto pool = load_dataset(a.pool);
  if (a.val_row >= val.rows()) throw DataError("--val-row " + std::to_string(a.val_row) + " out of range");
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  if (a.all_pairs) {
    pairs = all_pairs(train.rows());
  } else {
    for (const auto& p : a.pairs) pairs.push_back(parse_pair(p));
  }
  OrderPreservingConfig config;
  config.knn = {a.k, parse_metric(a.metric)};
  config.samples = a.samples;
  config.seed = a.seed;
  config.threads = a.threads;
  const SubsetSampler sampler{pool.view(), 0, std::nullopt};
  const auto reports = order_preserving_scan(train, val.row(a.val_row), val.label(a.val_row), sampler,
                                             parse_value_measure(a.measure), config, pairs);
  ordered_json j;
  j["measure"] = a.measure;
  j["k"] = a.k;
  j["samples"] = a.samples;
  j["seed"] = a.seed;
  std::size_t agree = 0, disagree = 0, inconclusive = 0;
  auto& arr = j["pairs"] = ordered_json::array();
  for (const auto& r : reports) {
    arr.push_back({{"i", r.i}, {"j", r.j}, {"value_gap", r.value_gap}, {"mean_difference", r.mean_difference},
                   {"ci_low", r.ci_low}, {"ci_high", r.ci_high}, {"verdict", to_string(r.verdict)}});
    agree += r.verdict == Verdict::Agrees;
    disagree += r.verdict == Verdict::Disagrees;
    inconclusive += r.verdict == Verdict::Inconclusive;
  }
  j["summary"] = {{"agrees", agree}, {"disagrees", disagree}, {"inconclusive", inconclusive}};
  if (!a.out.empty()) {
    write_text_file(a.out, j.dump(2) + "\n");
    manifest.write(a.out);
  }
  out << "agrees " << agree << "\ndisagrees " << disagree << "\ninconclusive " << inconclusive << "\n";
}

// ---------------------------------------------------------------------------
// bounds / rank-corr / generate
// ---------------------------------------------------------------------------

void print_bounds(const ValueGapBounds& b, std::ostream& out) {
  out << "loo_bound " << format_real(b.loo) << "\nshapley_bound " << format_real(b.shapley) << "\n";
}

struct RankCorrArgs {
  std::string a, b;
};

void run_rank_corr(const RankCorrArgs& a, std::ostream& out) {
  const auto va = load_values(a.a);
  const auto vb = load_values(a.b);
  const auto rc = rank_correlation(va.values, vb.values);
  out << "rho " << format_real(rc.rho) << "\np_value " << format_real(rc.p_value) << "\n";
}

struct GenerateArgs {
  std::size_t n = 100, classes = 2, dim = 2;
  double separation = 3.0, stddev = 1.0;
  std::uint64_t seed = 0;
  double flip_rate = 0.0;
  double noise_fraction = 0.0, noise_sigma = 1.0;
  double watermark_fraction = 0.0, watermark_offset = 20.0;
  std::string out, flags_out, format = "csv";
};

void run_generate(const GenerateArgs& a, std::ostream& out) {
  if (a.format != "csv" && a.format != "binary") throw UsageError("--format must be csv or binary");
  const auto model = make_blob_model(a.classes, a.dim, a.separation, a.stddev);
  LabeledDataset data = sample_blobs(model, a.n, a.seed);
  FlagSet flags(data.rows(), false);
  auto merge = [&](Corrupted c) {
    data = std::move(c.data);
    for (std::size_t i = 0; i < flags.size(); ++i) flags[i] = flags[i] || c.flags[i];
  };
  if (a.flip_rate > 0.0) merge(flip_labels(data, a.flip_rate, a.seed, a.classes));
  if (a.noise_fraction > 0.0) merge(add_feature_noise(data, a.noise_fraction, a.noise_sigma, a.seed));
  if (a.watermark_fraction > 0.0) merge(inject_watermarks(data, a.watermark_fraction, a.watermark_offset, a.stddev, 0, a.seed));
  save_dataset(data, a.out, a.format == "binary" ? DatasetFormat::Binary : DatasetFormat::Csv);
  if (!a.flags_out.empty()) write_text_file(a.flags_out, flags_to_csv(flags));
  out << "wrote " << data.rows() << " rows -> " << a.out << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"dval: data valuation with exact KNN-Shapley, LOO and Monte Carlo oracles", "dval"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  std::function<void()> action;

  // value
  ValueArgs va;
  auto* value = app.add_subcommand("value", "Compute per-training-point values");
  value->add_option("measure", va.measure, "knn-shapley | knn-loo | exact-shapley | exact-loo | mc-shapley")
      ->required()
      ->check(CLI::IsMember({"knn-shapley", "knn-loo", "exact-shapley", "exact-loo", "mc-shapley"}));
  value->add_option("--train", va.train, "Training set (CSV or DVAL1 binary)")->required();
  value->add_option("--val", va.val, "Validation set")->required();
  value->add_option("--out", va.out, "Values JSON output path")->required();
  value->add_option("--k", va.k, "Neighbor count K (default 5)")->check(CLI::PositiveNumber);
  value->add_flag("--calibrate", va.calibrate, "Choose K by validation accuracy over --grid");
  value->add_option("--grid", va.grid, "Calibration grid lo:hi or a,b,c")->capture_default_str();
  value->add_option("--metric", va.metric, "sqeuclidean | cosine")->capture_default_str();
  value->add_option("--agg", va.agg, "mean | max | per-val")->capture_default_str();
  value->add_flag("--per-validation", va.per_validation, "Also store the N x M per-validation matrix");
  value->add_option("--threads", va.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  value->add_option("--permutations", va.permutations, "Monte Carlo permutation count")->check(CLI::PositiveNumber);
  value->add_option("--seed", va.seed, "Monte Carlo seed");
  value->add_option("--tolerance", va.tolerance, "Truncation tolerance (0 disables)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  value->add_option("--early-stop", va.early_stop, "Stop when the estimate moves less than this over 100 permutations");
  value->add_option("--cap", va.cap, "Largest N accepted by exact-shapley")->capture_default_str();
  value->callback([&] { action = [&] { run_value(va, out); }; });

  // calibrate
  CalibrateArgs ca;
  auto* calibrate = app.add_subcommand("calibrate", "Pick K by KNN validation accuracy");
  calibrate->add_option("--train", ca.train)->required();
  calibrate->add_option("--val", ca.val)->required();
  calibrate->add_option("--grid", ca.grid, "lo:hi or a,b,c")->required();
  calibrate->add_option("--metric", ca.metric)->capture_default_str();
  calibrate->add_option("--out", ca.out, "Accuracy table CSV");
  calibrate->add_option("--threads", ca.threads)->check(CLI::PositiveNumber);
  calibrate->callback([&] { action = [&] { run_calibrate(ca, out); }; });

  // detect
  DetectArgs da;
  auto* detect = app.add_subcommand("detect", "Detection curve of flagged points by ascending value");
  detect->add_option("--values", da.values)->required();
  detect->add_option("--flags", da.flags, "Single-column 0/1 CSV")->required();
  detect->add_option("--out", da.out, "Curve CSV")->required();
  detect->add_option("--summary", da.summary, "Summary JSON (default <out>.summary.json)");
  detect->callback([&] { action = [&] { run_detect(da, out); }; });

  // summarize
  SummarizeArgs sa;
  auto* summarize = app.add_subcommand("summarize", "Accuracy after dropping low- or high-value points");
  summarize->add_option("--train", sa.train)->required();
  summarize->add_option("--val", sa.val)->required();
  summarize->add_option("--heldout", sa.heldout)->required();
  summarize->add_option("--values", sa.values)->required();
  summarize->add_option("--out", sa.out)->required();
  summarize->add_option("--fractions", sa.fractions)->capture_default_str();
  summarize->add_option("--order", sa.order, "low | high")->capture_default_str();
  summarize->add_option("--k", sa.k)->check(CLI::PositiveNumber);
  summarize->add_option("--grid", sa.grid, "Calibrate K over lo:hi");
  summarize->add_option("--metric", sa.metric)->capture_default_str();
  summarize->add_option("--threads", sa.threads)->check(CLI::PositiveNumber);
  summarize->callback([&] { action = [&] { run_summarize(sa, out); }; });

  // select
  SelectArgs sel;
  auto* select = app.add_subcommand("select", "Indices of points with positive value");
  select->add_option("--values", sel.values)->required();
  select->add_option("--out", sel.out);
  select->callback([&] { action = [&] { run_select(sel, out, err); }; });

  // acquire
  AcquireArgs aa;
  auto* acquire = app.add_subcommand("acquire", "Rank candidates by value predicted from a valued seed set");
  acquire->add_option("--seed-train", aa.seed_train)->required();
  acquire->add_option("--values", aa.values, "Values of the seed set")->required();
  acquire->add_option("--candidates", aa.candidates)->required();
  acquire->add_option("--out", aa.out)->required();
  acquire->add_option("--r", aa.r, "Neighbors used by the value regressor")->capture_default_str();
  acquire->add_option("--metric", aa.metric)->capture_default_str();
  acquire->add_option("--threads", aa.threads)->check(CLI::PositiveNumber);
  acquire->callback([&] { action = [&] { run_acquire(aa, out); }; });

  // op-test
  OpTestArgs oa;
  auto* op = app.add_subcommand("op-test", "Empirical order-preservingness check for one validation point");
  op->add_option("--train", oa.train)->required();
  op->add_option("--val", oa.val)->required();
  op->add_option("--pool", oa.pool, "Held-out pool the random sets are drawn from")->required();
  op->add_option("--val-row", oa.val_row)->capture_default_str();
  op->add_option("--measure", oa.measure, "knn-shapley | knn-loo")->capture_default_str();
  op->add_option("--k", oa.k)->check(CLI::PositiveNumber)->capture_default_str();
  op->add_option("--metric", oa.metric)->capture_default_str();
  op->add_option("--pair", oa.pairs, "i,j (repeatable)");
  op->add_flag("--all-pairs", oa.all_pairs);
  op->add_option("--samples", oa.samples)->capture_default_str();
  op->add_option("--seed", oa.seed)->capture_default_str();
  op->add_option("--threads", oa.threads)->check(CLI::PositiveNumber);
  op->add_option("--out", oa.out, "Report JSON");
  op->callback([&] { action = [&] { run_op_test(oa, out); }; });

  // bounds
  auto* bounds = app.add_subcommand("bounds", "Value-gap bounds for stable or private learners");
  bounds->require_subcommand(1);
  double cstab = 1.0;
  std::size_t stab_n = 2;
  auto* stability = bounds->add_subcommand("stability", "Uniform-stability bounds");
  stability->add_option("--cstab", cstab)->required();
  stability->add_option("--n", stab_n)->required();
  stability->callback([&] { action = [&] { print_bounds(stability_value_gap_bounds(cstab, stab_n), out); }; });
  std::string eps_path, delta_path;
  std::size_t dp_n = 2, dp_c = 1;
  auto* dp = bounds->add_subcommand("dp", "Differential-privacy bounds from eps(n), delta(n) schedules");
  dp->add_option("--eps", eps_path, "CSV n,epsilon")->required();
  dp->add_option("--delta", delta_path, "CSV n,delta")->required();
  dp->add_option("--n", dp_n)->required();
  dp->add_option("--c", dp_c)->capture_default_str();
  dp->callback([&] {
    action = [&] {
      const PrivacySchedule schedule{parse_schedule_csv(detail::read_file(eps_path)),
                                     parse_schedule_csv(detail::read_file(delta_path))};
      print_bounds(dp_value_gap_bounds(schedule, dp_n, dp_c), out);
    };
  });

  // rank-corr
  RankCorrArgs ra;
  auto* rank = app.add_subcommand("rank-corr", "Spearman rank correlation of two values files");
  rank->add_option("a", ra.a)->required();
  rank->add_option("b", ra.b)->required();
  rank->callback([&] { action = [&] { run_rank_corr(ra, out); }; });

  // generate
  GenerateArgs ga;
  auto* gen = app.add_subcommand("generate", "Synthetic Gaussian blobs with optional corruption");
  gen->add_option("--n", ga.n)->capture_default_str();
  gen->add_option("--classes", ga.classes)->capture_default_str();
  gen->add_option("--dim", ga.dim)->capture_default_str();
  gen->add_option("--separation", ga.separation)->capture_default_str();
  gen->add_option("--stddev", ga.stddev)->capture_default_str();
  gen->add_option("--seed", ga.seed)->capture_default_str();
  gen->add_option("--flip-rate", ga.flip_rate)->capture_default_str();
  gen->add_option("--noise-fraction", ga.noise_fraction);
  gen->add_option("--noise-sigma", ga.noise_sigma);
  gen->add_option("--watermark-fraction", ga.watermark_fraction);
  gen->add_option("--watermark-offset", ga.watermark_offset);
  gen->add_option("--format", ga.format, "csv | binary")->capture_default_str();
  gen->add_option("--out", ga.out)->required();
  gen->add_option("--flags-out", ga.flags_out, "Corruption flags CSV");
  gen->callback([&] { action = [&] { run_generate(ga, out); }; });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error[usage]: " << one_line(e.what()) << "\n";
    err << app.help();
    return kExitUsage;
  }

  try {
    if (action) action();
    return kExitOk;
  } catch (const UsageError& e) {
    err << "error[usage]: " << one_line(e.what()) << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error[data]: " << one_line(e.what()) << "\n";
    return kExitData;
  }
}

}  // namespace dval::cli
