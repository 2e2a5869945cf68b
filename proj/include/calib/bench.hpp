#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "calib/dataset.hpp"
#include "calib/lenses.hpp"
#include "calib/metrics.hpp"

namespace calib {

struct BenchmarkSpec {
  std::vector<std::string> methods = {"temperature", "histogram", "isotonic", "beta"};
  std::vector<std::string> wrappers = {"baseline", "reduced", "classwise",
                                       "classwise-reduced"};
  LensKind lens = LensKind::confidence();
  int folds = 6;
  BinningConfig binning = {};
  std::uint64_t seed = 0;
  int min_sector_samples = 50;
  bool argmax_preserving = false;

  void validate() const;
  nlohmann::json to_json() const;
};

struct FoldCell {
  std::string method;
  std::string wrapper;
  int fold = 0;
  double ece = 0.0;
  double cwece = 0.0;
  double accuracy = 0.0;
  double nll = 0.0;
  std::vector<double> per_class_cwece;
  std::optional<double> condition_mass;  // reduced-family wrappers only
};

struct AggregateCell {
  std::string method;
  std::string wrapper;
  double ece_mean = 0.0, ece_std = 0.0;
  double cwece_mean = 0.0, cwece_std = 0.0;
  double accuracy_mean = 0.0, accuracy_std = 0.0;
  double nll_mean = 0.0, nll_std = 0.0;
  std::optional<double> condition_mass_mean;
  // percent change vs the same method's baseline wrapper; the mean is the
  // change of fold-means, the std the spread of per-fold changes
  std::optional<double> rel_ece_pct, rel_ece_std_pct;
  std::optional<double> rel_cwece_pct, rel_cwece_std_pct;
};

struct BenchmarkReport {
  BenchmarkSpec spec;
  long n_samples = 0;
  int n_classes = 0;
  std::vector<FoldCell> cells;        // ordered by (method, wrapper, fold)
  std::vector<AggregateCell> aggregates;
};

/// Disjoint covering folds, stratified by label: per-class fold counts differ
/// by at most one. Deterministic in (labels, n_folds, seed).
std::vector<std::vector<int>> stratified_folds(const std::vector<int>& labels,
                                               int n_folds, std::uint64_t seed);

/// Per fold: fit every (method, wrapper) on the other folds, transform the
/// held-out fold and score it there. Fitting never sees held-out rows.
BenchmarkReport cross_validate(const PredictionDataset& ds, const BenchmarkSpec& spec);

enum class ReportFormat { Csv, Json, Markdown };
ReportFormat parse_report_format(const std::string& s);

/// Csv: one row per (method, wrapper, fold) with raw values. Json: spec echo,
/// per-fold cells and aggregates. Markdown: relative aggregate tables with
/// the best wrapper per method in bold and the best overall cell marked.
std::string render_report(const BenchmarkReport& report, ReportFormat format);

}  // namespace calib
