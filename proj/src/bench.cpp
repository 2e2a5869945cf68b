#include "calib/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "calib/datagen.hpp"
#include "calib/wrappers.hpp"

namespace calib {

using nlohmann::json;

void BenchmarkSpec::validate() const {
  if (methods.empty()) throw std::invalid_argument("benchmark needs at least one method");
  if (wrappers.empty()) throw std::invalid_argument("benchmark needs at least one wrapper");
  for (const auto& m : methods) parse_binary_method(m);
  for (const auto& w : wrappers) {
    if (std::find(valid_wrappers().begin(), valid_wrappers().end(), w) ==
        valid_wrappers().end()) {
      std::string valid;
      for (const auto& v : valid_wrappers()) valid += (valid.empty() ? "" : ", ") + v;
      throw std::invalid_argument("unknown wrapper '" + w + "' (valid: " + valid + ")");
    }
  }
  if (folds < 2) throw std::invalid_argument("benchmark needs folds >= 2");
  if (binning.n_bins < 1) throw std::invalid_argument("benchmark needs bins >= 1");
  if (!(binning.p_norm >= 1.0)) throw std::invalid_argument("p_norm must be >= 1");
  if (min_sector_samples < 0) throw std::invalid_argument("min_sector_samples must be >= 0");
}

json BenchmarkSpec::to_json() const {
  return {{"methods", methods},
          {"wrappers", wrappers},
          {"lens", lens.str()},
          {"folds", folds},
          {"bins", binning.n_bins},
          {"scheme", scheme_str(binning.scheme)},
          {"p_norm", std::isinf(binning.p_norm) ? json("inf") : json(binning.p_norm)},
          {"seed", seed},
          {"min_sector_samples", min_sector_samples},
          {"argmax_preserving", argmax_preserving}};
}

std::vector<std::vector<int>> stratified_folds(const std::vector<int>& labels,
                                               int n_folds, std::uint64_t seed) {
  if (n_folds < 2) throw std::invalid_argument("need at least 2 folds");
  std::map<int, std::vector<int>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_class[labels[i]].push_back(static_cast<int>(i));
  }
  // stream 1 is reserved for fold assignment
  RandomStream rng(seed, 1);
  std::vector<std::vector<int>> folds(n_folds);
  int cursor = 0;  // rolling so remainders don't all land in fold 0
  for (auto& [label, rows] : by_class) {
    const auto perm = rng.permutation(static_cast<int>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      folds[cursor % n_folds].push_back(rows[perm[i]]);
      ++cursor;
    }
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

namespace {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd out;
  const double n = static_cast<double>(xs.size());
  for (double x : xs) out.mean += x;
  out.mean /= n;
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / (n - 1.0));
  }
  return out;
}

}  // namespace

BenchmarkReport cross_validate(const PredictionDataset& ds, const BenchmarkSpec& spec) {
  spec.validate();
  ds.validate();
  spec.lens.validate(ds.n_classes);

  const auto folds = stratified_folds(ds.labels, spec.folds, spec.seed);
  std::vector<PredictionDataset> train_sets, test_sets;
  for (int f = 0; f < spec.folds; ++f) {
    std::vector<int> train_idx;
    for (int g = 0; g < spec.folds; ++g) {
      if (g == f) continue;
      train_idx.insert(train_idx.end(), folds[g].begin(), folds[g].end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::set<int> seen;
    for (int i : train_idx) seen.insert(ds.labels[i]);
    for (int k = 1; k <= ds.n_classes; ++k) {
      if (!seen.count(k)) {
        throw std::invalid_argument("class " + std::to_string(k) +
                                    " is absent from the training data of fold " +
                                    std::to_string(f) + "; use fewer folds");
      }
    }
    train_sets.push_back(ds.subset(train_idx));
    test_sets.push_back(ds.subset(folds[f]));
  }

  BenchmarkReport report;
  report.spec = spec;
  report.n_samples = static_cast<long>(ds.size());
  report.n_classes = ds.n_classes;

  for (const auto& method : spec.methods) {
    for (const auto& wrapper : spec.wrappers) {
      for (int f = 0; f < spec.folds; ++f) {
        const CalibratorPtr cal =
            fit_calibrator(method, wrapper, spec.lens, train_sets[f],
                           spec.min_sector_samples, spec.argmax_preserving);
        const PredictionDataset out = transform_dataset(*cal, test_sets[f]);
        FoldCell cell;
        cell.method = method;
        cell.wrapper = wrapper;
        cell.fold = f;
        cell.ece = binned_ece(out, spec.binning);
        const ClasswiseEce cw = classwise_ece(out, spec.binning);
        cell.cwece = cw.overall;
        cell.per_class_cwece = cw.per_class;
        cell.accuracy = accuracy(out);
        cell.nll = nll(out);
        if (const auto cond = cal->condition_report(test_sets[f])) {
          cell.condition_mass = cond->condition_mass;
        }
        report.cells.push_back(std::move(cell));
      }
    }
  }

  // aggregates + relatives against each method's baseline wrapper
  const auto fold_values = [&](const std::string& method, const std::string& wrapper,
                               auto&& getter) {
    std::vector<double> xs;
    for (const auto& c : report.cells) {
      if (c.method == method && c.wrapper == wrapper) xs.push_back(getter(c));
    }
    return xs;
  };

  for (const auto& method : spec.methods) {
    const bool has_baseline = std::find(spec.wrappers.begin(), spec.wrappers.end(),
                                        "baseline") != spec.wrappers.end();
    const std::vector<double> base_ece =
        has_baseline ? fold_values(method, "baseline", [](const FoldCell& c) { return c.ece; })
                     : std::vector<double>{};
    const std::vector<double> base_cwece =
        has_baseline
            ? fold_values(method, "baseline", [](const FoldCell& c) { return c.cwece; })
            : std::vector<double>{};
    const double base_ece_mean = has_baseline ? mean_std(base_ece).mean : 0.0;
    const double base_cwece_mean = has_baseline ? mean_std(base_cwece).mean : 0.0;

    for (const auto& wrapper : spec.wrappers) {
      AggregateCell agg;
      agg.method = method;
      agg.wrapper = wrapper;
      const auto ece = fold_values(method, wrapper, [](const FoldCell& c) { return c.ece; });
      const auto cwece =
          fold_values(method, wrapper, [](const FoldCell& c) { return c.cwece; });
      const auto acc =
          fold_values(method, wrapper, [](const FoldCell& c) { return c.accuracy; });
      const auto nlls = fold_values(method, wrapper, [](const FoldCell& c) { return c.nll; });
      const auto es = mean_std(ece);
      agg.ece_mean = es.mean;
      agg.ece_std = es.std;
      const auto cs = mean_std(cwece);
      agg.cwece_mean = cs.mean;
      agg.cwece_std = cs.std;
      const auto as = mean_std(acc);
      agg.accuracy_mean = as.mean;
      agg.accuracy_std = as.std;
      const auto ns = mean_std(nlls);
      agg.nll_mean = ns.mean;
      agg.nll_std = ns.std;

      std::vector<double> cond;
      for (const auto& c : report.cells) {
        if (c.method == method && c.wrapper == wrapper && c.condition_mass) {
          cond.push_back(*c.condition_mass);
        }
      }
      if (!cond.empty()) agg.condition_mass_mean = mean_std(cond).mean;

      if (has_baseline) {
        const auto relative = [&](const std::vector<double>& xs,
                                  const std::vector<double>& base, double base_mean,
                                  std::optional<double>& rel, std::optional<double>& rel_std) {
          if (base_mean == 0.0) return;
          const auto xm = mean_std(xs);
          rel = 100.0 * (xm.mean - base_mean) / base_mean;
          std::vector<double> per_fold;
          for (std::size_t f = 0; f < xs.size(); ++f) {
            if (base[f] != 0.0) per_fold.push_back(100.0 * (xs[f] - base[f]) / base[f]);
          }
          if (!per_fold.empty()) rel_std = mean_std(per_fold).std;
        };
        relative(ece, base_ece, base_ece_mean, agg.rel_ece_pct, agg.rel_ece_std_pct);
        relative(cwece, base_cwece, base_cwece_mean, agg.rel_cwece_pct,
                 agg.rel_cwece_std_pct);
      }
      report.aggregates.push_back(std::move(agg));
    }
  }
  return report;
}

ReportFormat parse_report_format(const std::string& s) {
  if (s == "csv") return ReportFormat::Csv;
  if (s == "json") return ReportFormat::Json;
  if (s == "markdown") return ReportFormat::Markdown;
  throw std::invalid_argument("unknown report format '" + s +
                              "' (valid: csv, json, markdown)");
}

namespace {

json cell_to_json(const FoldCell& c) {
  json j{{"method", c.method}, {"wrapper", c.wrapper}, {"fold", c.fold},
         {"ece", c.ece},       {"cwece", c.cwece},     {"accuracy", c.accuracy},
         {"nll", c.nll},       {"per_class_cwece", c.per_class_cwece}};
  if (c.condition_mass) j["condition_mass"] = *c.condition_mass;
  return j;
}

json aggregate_to_json(const AggregateCell& a) {
  json j{{"method", a.method},
         {"wrapper", a.wrapper},
         {"ece_mean", a.ece_mean},
         {"ece_std", a.ece_std},
         {"cwece_mean", a.cwece_mean},
         {"cwece_std", a.cwece_std},
         {"accuracy_mean", a.accuracy_mean},
         {"accuracy_std", a.accuracy_std},
         {"nll_mean", a.nll_mean},
         {"nll_std", a.nll_std}};
  if (a.condition_mass_mean) j["condition_mass_mean"] = *a.condition_mass_mean;
  if (a.rel_ece_pct) j["rel_ece_pct"] = *a.rel_ece_pct;
  if (a.rel_ece_std_pct) j["rel_ece_std_pct"] = *a.rel_ece_std_pct;
  if (a.rel_cwece_pct) j["rel_cwece_pct"] = *a.rel_cwece_pct;
  if (a.rel_cwece_std_pct) j["rel_cwece_std_pct"] = *a.rel_cwece_std_pct;
  return j;
}

std::string fixed(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, x);
  return buf;
}

// "0.01523 ± 15%": absolute mean with the fold spread as a relative percent
std::string fmt_absolute(double mean, double std) {
  const double rel = mean != 0.0 ? 100.0 * std / std::abs(mean) : 0.0;
  return fixed(mean, 5) + " ± " + std::to_string(std::llround(rel)) + "%";
}

// "-54.45% ± 8%"
std::string fmt_relative(double rel, double rel_std) {
  const std::string sign = rel > 0.0 ? "+" : "";
  return sign + fixed(rel, 2) + "% ± " + std::to_string(std::llround(rel_std)) + "%";
}

std::string markdown_metric_table(const BenchmarkReport& report, const std::string& title,
                                  bool classwise_metric) {
  const auto mean_of = [&](const AggregateCell& a) {
    return classwise_metric ? a.cwece_mean : a.ece_mean;
  };
  const auto find_agg = [&](const std::string& m, const std::string& w) {
    for (const auto& a : report.aggregates) {
      if (a.method == m && a.wrapper == w) return &a;
    }
    return static_cast<const AggregateCell*>(nullptr);
  };

  const AggregateCell* best_overall = nullptr;
  for (const auto& a : report.aggregates) {
    if (!best_overall || mean_of(a) < mean_of(*best_overall)) best_overall = &a;
  }

  std::ostringstream out;
  out << "### " << title << "\n\n| Method |";
  for (const auto& w : report.spec.wrappers) out << ' ' << w << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < report.spec.wrappers.size(); ++i) out << "---|";
  out << '\n';
  for (const auto& m : report.spec.methods) {
    const AggregateCell* best = nullptr;
    for (const auto& w : report.spec.wrappers) {
      const AggregateCell* a = find_agg(m, w);
      if (a && (!best || mean_of(*a) < mean_of(*best))) best = a;
    }
    out << "| " << m << " |";
    for (const auto& w : report.spec.wrappers) {
      const AggregateCell* a = find_agg(m, w);
      std::string cell;
      if (!a) {
        cell = "-";
      } else if (w == "baseline" || !(classwise_metric ? a->rel_cwece_pct : a->rel_ece_pct)) {
        cell = classwise_metric ? fmt_absolute(a->cwece_mean, a->cwece_std)
                                : fmt_absolute(a->ece_mean, a->ece_std);
      } else {
        cell = classwise_metric ? fmt_relative(*a->rel_cwece_pct, a->rel_cwece_std_pct.value_or(0.0))
                                : fmt_relative(*a->rel_ece_pct, a->rel_ece_std_pct.value_or(0.0));
      }
      if (a && a == best) cell = "**" + cell + "**";
      if (a && a == best_overall) cell += " †";
      out << ' ' << cell << " |";
    }
    out << '\n';
  }
  return out.str();
}

std::string markdown_conditions_table(const BenchmarkReport& report) {
  std::vector<std::string> lift_wrappers;
  for (const auto& w : report.spec.wrappers) {
    for (const auto& a : report.aggregates) {
      if (a.wrapper == w && a.condition_mass_mean) {
        lift_wrappers.push_back(w);
        break;
      }
    }
  }
  if (lift_wrappers.empty()) return "";
  std::ostringstream out;
  out << "### Lift conditions\n\n| Method |";
  for (const auto& w : lift_wrappers) out << ' ' << w << " ECE | cwECE | 1-δ |";
  out << "\n|---|";
  for (std::size_t i = 0; i < lift_wrappers.size(); ++i) out << "---|---|---|";
  out << '\n';
  for (const auto& m : report.spec.methods) {
    out << "| " << m << " |";
    for (const auto& w : lift_wrappers) {
      const AggregateCell* a = nullptr;
      for (const auto& cand : report.aggregates) {
        if (cand.method == m && cand.wrapper == w) a = &cand;
      }
      if (a) {
        out << ' ' << fixed(a->ece_mean, 4) << " | " << fixed(a->cwece_mean, 4) << " | "
            << fixed(a->condition_mass_mean.value_or(1.0), 2) << " |";
      } else {
        out << " - | - | - |";
      }
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace

std::string render_report(const BenchmarkReport& report, ReportFormat format) {
  if (format == ReportFormat::Json) {
    json j;
    j["spec"] = report.spec.to_json();
    j["n_samples"] = report.n_samples;
    j["n_classes"] = report.n_classes;
    json cells = json::array();
    for (const auto& c : report.cells) cells.push_back(cell_to_json(c));
    j["folds"] = std::move(cells);
    json aggs = json::array();
    for (const auto& a : report.aggregates) aggs.push_back(aggregate_to_json(a));
    j["aggregates"] = std::move(aggs);
    return j.dump(2) + "\n";
  }

  if (format == ReportFormat::Csv) {
    std::ostringstream out;
    out << "method,wrapper,fold,ece,cwece,accuracy,nll,condition_mass";
    for (int k = 1; k <= report.n_classes; ++k) out << ",cwece_" << k;
    out << '\n';
    for (const auto& c : report.cells) {
      out << c.method << ',' << c.wrapper << ',' << c.fold << ',' << format_double(c.ece)
          << ',' << format_double(c.cwece) << ',' << format_double(c.accuracy) << ','
          << format_double(c.nll) << ','
          << (c.condition_mass ? format_double(*c.condition_mass) : "");
      for (double v : c.per_class_cwece) out << ',' << format_double(v);
      out << '\n';
    }
    return out.str();
  }

  std::ostringstream out;
  out << "# Benchmark report\n\n"
      << "- samples: " << report.n_samples << ", classes: " << report.n_classes << '\n'
      << "- folds: " << report.spec.folds << ", bins: " << report.spec.binning.n_bins
      << " (" << scheme_str(report.spec.binning.scheme) << "), lens: "
      << report.spec.lens.str() << ", seed: " << report.spec.seed << '\n'
      << "- non-baseline cells are relative to the method's baseline; best wrapper per"
         " method in **bold**; † marks the best cell of the table\n\n";
  out << markdown_metric_table(report, "ECE", false) << '\n';
  out << markdown_metric_table(report, "cwECE", true) << '\n';
  const std::string cond = markdown_conditions_table(report);
  if (!cond.empty()) out << cond << '\n';
  return out.str();
}

}  // namespace calib
