#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <set>

#include "calib/bench.hpp"
#include "calib/datagen.hpp"
#include "calib/wrappers.hpp"
#include "test_util.hpp"

using namespace calib;

namespace {

PredictionDataset bench_dataset(long n, std::uint64_t seed) {
  EtfSpec spec;
  spec.n = n;
  spec.n_classes = 4;
  spec.class_weights.assign(4, 0.25);
  spec.radii = {2.5, 3.0, 3.5, 2.0};
  spec.noise_sigma = 1.2;
  spec.seed = seed;
  return gen_etf(spec);
}

}  // namespace

TEST_CASE("stratified folds partition the data with balanced classes") {
  RandomStream rng(301);
  std::vector<int> labels;
  for (int i = 0; i < 1003; ++i) labels.push_back(1 + static_cast<int>(rng.next_u64() % 4));
  const auto folds = stratified_folds(labels, 6, 17);
  REQUIRE(folds.size() == 6);

  std::set<int> seen;
  for (const auto& f : folds) {
    for (int i : f) {
      CHECK(!seen.count(i));  // disjoint
      seen.insert(i);
    }
  }
  CHECK(seen.size() == labels.size());  // covering

  for (int k = 1; k <= 4; ++k) {
    std::vector<int> counts;
    for (const auto& f : folds) {
      int c = 0;
      for (int i : f) {
        if (labels[i] == k) ++c;
      }
      counts.push_back(c);
    }
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    CHECK(*hi - *lo <= 1);  // per-class balance
  }

  // deterministic in the seed
  CHECK(stratified_folds(labels, 6, 17) == folds);
  CHECK(stratified_folds(labels, 6, 18) != folds);
}

TEST_CASE("identity method reports zero relative ECE change everywhere") {
  const auto ds = bench_dataset(1200, 5);
  BenchmarkSpec spec;
  spec.methods = {"identity"};
  spec.wrappers = {"baseline", "reduced", "classwise", "classwise-reduced",
                   "weighted-reduced"};
  spec.folds = 3;
  spec.binning = {10, BinningScheme::EqualWidth, 1.0};
  spec.min_sector_samples = 1;
  const auto report = cross_validate(ds, spec);
  for (const auto& agg : report.aggregates) {
    // the identity lift keeps the top confidence and the argmax, so the ECE
    // is bit-identical in every wrapper; the uniform-residual lifts reshape
    // the non-top coordinates, so cwECE is only unchanged where the whole
    // transform is the identity
    REQUIRE(agg.rel_ece_pct.has_value());
    CHECK(*agg.rel_ece_pct == 0.0);
    if (agg.wrapper == "baseline" || agg.wrapper == "classwise" ||
        agg.wrapper == "weighted-reduced") {
      CHECK(*agg.rel_cwece_pct == 0.0);
    }
  }
}

TEST_CASE("baseline relative change is exactly zero") {
  const auto ds = bench_dataset(1500, 6);
  BenchmarkSpec spec;
  spec.methods = {"histogram", "temperature"};
  spec.wrappers = {"baseline", "reduced"};
  spec.folds = 3;
  spec.binning = {10, BinningScheme::EqualWidth, 1.0};
  const auto report = cross_validate(ds, spec);
  for (const auto& agg : report.aggregates) {
    if (agg.wrapper == "baseline") {
      CHECK(*agg.rel_ece_pct == 0.0);
      CHECK(*agg.rel_ece_std_pct == 0.0);
      CHECK(*agg.rel_cwece_pct == 0.0);
    }
  }
}

TEST_CASE("reports are deterministic") {
  const auto ds = bench_dataset(1000, 7);
  BenchmarkSpec spec;
  spec.methods = {"histogram", "beta"};
  spec.wrappers = {"baseline", "reduced", "weighted-reduced"};
  spec.folds = 3;
  spec.binning = {12, BinningScheme::EqualWidth, 1.0};
  spec.seed = 3;
  const auto a = cross_validate(ds, spec);
  const auto b = cross_validate(ds, spec);
  for (const ReportFormat fmt : {ReportFormat::Csv, ReportFormat::Json, ReportFormat::Markdown}) {
    CHECK(render_report(a, fmt) == render_report(b, fmt));
  }
}

TEST_CASE("cells are ordered by (method, wrapper, fold)") {
  const auto ds = bench_dataset(900, 8);
  BenchmarkSpec spec;
  spec.methods = {"histogram", "identity"};
  spec.wrappers = {"reduced", "baseline"};
  spec.folds = 2;
  spec.binning = {10, BinningScheme::EqualWidth, 1.0};
  const auto report = cross_validate(ds, spec);
  REQUIRE(report.cells.size() == 2 * 2 * 2);
  std::size_t idx = 0;
  for (const auto& m : spec.methods) {
    for (const auto& w : spec.wrappers) {
      for (int f = 0; f < 2; ++f) {
        CHECK(report.cells[idx].method == m);
        CHECK(report.cells[idx].wrapper == w);
        CHECK(report.cells[idx].fold == f);
        ++idx;
      }
    }
  }
}

TEST_CASE("a class too rare for the folds is an error suggesting fewer folds") {
  RandomStream rng(309);
  auto ds = testutil::sampled_dataset(rng, 3, 150);
  // exactly one sample of class 3
  for (auto& y : ds.labels) {
    if (y == 3) y = 1;
  }
  ds.labels[0] = 3;
  BenchmarkSpec spec;
  spec.methods = {"identity"};
  spec.wrappers = {"baseline"};
  spec.folds = 3;
  spec.binning = {10, BinningScheme::EqualWidth, 1.0};
  try {
    cross_validate(ds, spec);
    FAIL("expected an error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("fewer folds") != std::string::npos);
  }
}

TEST_CASE("fitting never reads the held-out fold") {
  const auto ds = bench_dataset(1200, 10);
  const auto folds = stratified_folds(ds.labels, 3, 0);

  // scramble the labels of fold 0, fit on the other folds: the fitted model
  // must be identical to the one fitted from the untouched dataset
  auto scrambled = ds;
  for (std::size_t j = 0; j < folds[0].size(); ++j) {
    scrambled.labels[folds[0][j]] = 1 + static_cast<int>(j % 4);
  }
  std::vector<int> train_idx;
  for (int g = 1; g < 3; ++g) {
    train_idx.insert(train_idx.end(), folds[g].begin(), folds[g].end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  const auto m1 = fit_calibrator("histogram", "reduced", LensKind::confidence(),
                                 ds.subset(train_idx));
  const auto m2 = fit_calibrator("histogram", "reduced", LensKind::confidence(),
                                 scrambled.subset(train_idx));
  CHECK(m1->to_json() == m2->to_json());
}

TEST_CASE("condition mass is reported for lift wrappers and equals one for T >= 1") {
  const auto ds = bench_dataset(2000, 11);
  BenchmarkSpec spec;
  spec.methods = {"temperature", "histogram"};
  spec.wrappers = {"baseline", "reduced", "weighted-reduced", "classwise-reduced"};
  spec.folds = 2;
  spec.binning = {15, BinningScheme::EqualWidth, 1.0};
  spec.min_sector_samples = 50;
  spec.argmax_preserving = true;
  const auto report = cross_validate(ds, spec);
  for (const auto& cell : report.cells) {
    if (cell.wrapper == "baseline" || cell.wrapper == "classwise") {
      CHECK(!cell.condition_mass.has_value());
    } else {
      REQUIRE(cell.condition_mass.has_value());
      CHECK(*cell.condition_mass >= 0.0);
      CHECK(*cell.condition_mass <= 1.0);
    }
  }
  // argmax-preserving temperature base: every reduced cell has mass one...
  for (const auto& cell : report.cells) {
    if (cell.method == "temperature" && cell.wrapper == "reduced") {
      CHECK(*cell.condition_mass == 1.0);
    }
  }
}

TEST_CASE("render formats carry matching values") {
  const auto ds = bench_dataset(800, 12);
  BenchmarkSpec spec;
  spec.methods = {"histogram"};
  spec.wrappers = {"baseline", "reduced"};
  spec.folds = 2;
  spec.binning = {10, BinningScheme::EqualWidth, 1.0};
  const auto report = cross_validate(ds, spec);

  const auto j = nlohmann::json::parse(render_report(report, ReportFormat::Json));
  CHECK(j.at("folds").size() == 4);
  CHECK(j.at("aggregates").size() == 2);

  const std::string csv = render_report(report, ReportFormat::Csv);
  std::istringstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header.rfind("method,wrapper,fold,ece,cwece,accuracy,nll,condition_mass", 0) == 0);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    // CSV row values parse back to the JSON cell values
    std::stringstream ss(line);
    std::string method, wrapper, fold, ece;
    std::getline(ss, method, ',');
    std::getline(ss, wrapper, ',');
    std::getline(ss, fold, ',');
    std::getline(ss, ece, ',');
    const auto& cell = j.at("folds")[rows];
    CHECK(cell.at("method").get<std::string>() == method);
    CHECK(cell.at("wrapper").get<std::string>() == wrapper);
    CHECK(std::stod(ece) == cell.at("ece").get<double>());
    ++rows;
  }
  CHECK(rows == 4);

  const std::string md = render_report(report, ReportFormat::Markdown);
  CHECK(md.find("### ECE") != std::string::npos);
  CHECK(md.find("### cwECE") != std::string::npos);
  CHECK(md.find("**") != std::string::npos);       // best-per-method marker
  CHECK(md.find("1-δ") != std::string::npos);  // conditions table
}

TEST_CASE("benchmark spec validation") {
  BenchmarkSpec spec;
  spec.folds = 1;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec.folds = 2;
  spec.wrappers = {"nope"};
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec.wrappers = {"baseline"};
  spec.methods = {"nope"};
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}
