#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "calib/datagen.hpp"
#include "calib/metrics.hpp"
#include "test_util.hpp"

using namespace calib;
using testutil::cv;

namespace {

// 4 samples, K=2: top confidences 0.8/0.7/0.9/0.6 with correctness 1/0/1/1
PredictionDataset four_sample() {
  return testutil::make_dataset(
      2, {1, 2, 1, 1}, {{0.8, 0.2}, {0.7, 0.3}, {0.9, 0.1}, {0.6, 0.4}});
}

}  // namespace

TEST_CASE("binned ECE hand computations") {
  const auto ds = four_sample();
  CHECK(binned_ece(ds, {1, BinningScheme::EqualWidth, 1.0}) == doctest::Approx(0.0));
  // two equal-mass bins split at the 0.75 quantile
  CHECK(binned_ece(ds, {2, BinningScheme::EqualMass, 1.0}) == doctest::Approx(0.15));

  const auto sharp = testutil::make_dataset(3, {1, 2}, {{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}});
  CHECK(binned_ece(sharp, {10, BinningScheme::EqualWidth, 1.0}) == doctest::Approx(0.0));
}

TEST_CASE("one bin equals |mean confidence - accuracy| exactly") {
  RandomStream rng(101);
  const auto ds = testutil::sampled_dataset(rng, 4, 500);
  const double ece = binned_ece(ds, {1, BinningScheme::EqualWidth, 1.0});
  double conf = 0.0;
  for (const auto& c : ds.confidences) conf += max_entry(c);
  conf /= static_cast<double>(ds.size());
  CHECK(ece == doctest::Approx(std::abs(conf - accuracy(ds))).epsilon(1e-12));
}

TEST_CASE("ECE is invariant under row permutation") {
  RandomStream rng(103);
  const auto ds = testutil::sampled_dataset(rng, 5, 300);
  const auto perm = rng.permutation(300);
  PredictionDataset shuffled;
  shuffled.n_classes = 5;
  for (int i : perm) {
    shuffled.labels.push_back(ds.labels[i]);
    shuffled.confidences.push_back(ds.confidences[i]);
  }
  const BinningConfig cfg{15, BinningScheme::EqualWidth, 1.0};
  CHECK(binned_ece(shuffled, cfg) == doctest::Approx(binned_ece(ds, cfg)).epsilon(1e-12));
  CHECK(classwise_ece(shuffled, cfg).overall ==
        doctest::Approx(classwise_ece(ds, cfg).overall).epsilon(1e-12));
  CHECK(binned_ece(ds, cfg) >= 0.0);
  CHECK(binned_ece(ds, cfg) <= 1.0);
}

TEST_CASE("debiased ECE") {
  const BinningConfig l2{1, BinningScheme::EqualWidth, 2.0};
  const auto perfect = testutil::make_dataset(2, {1, 1}, {{1.0, 0.0}, {1.0, 0.0}});
  CHECK(debiased_ece(perfect, l2) == doctest::Approx(0.0));

  // one bin, n=2, f=0.5, conf 0.5: variance term swallows the gap, clamp at 0
  const auto tiny = testutil::make_dataset(2, {1, 2}, {{0.5, 0.5}, {0.5, 0.5}});
  CHECK(debiased_ece(tiny, l2) == doctest::Approx(0.0));

  CHECK_THROWS_AS(debiased_ece(perfect, BinningConfig{1, BinningScheme::EqualWidth, 1.0}),
                  std::invalid_argument);
}

TEST_CASE("debiased estimate undercuts the plain l2 estimate on calibrated data") {
  int strictly_less = 0;
  for (int seed = 0; seed < 100; ++seed) {
    DirichletSpec spec;
    spec.n = 2000;
    spec.n_classes = 5;
    spec.alpha.assign(5, 1.0);
    spec.sharpen_t = 1.0;
    spec.seed = 1000 + seed;
    const auto ds = gen_dirichlet(spec);
    const BinningConfig l2{15, BinningScheme::EqualWidth, 2.0};
    if (debiased_ece(ds, l2) < binned_ece(ds, l2)) ++strictly_less;
  }
  CHECK(strictly_less >= 90);
}

TEST_CASE("classwise ECE hand computations") {
  const BinningConfig one{1, BinningScheme::EqualWidth, 1.0};
  const auto ds = four_sample();
  const auto cw = classwise_ece(ds, one);
  CHECK(cw.per_class[0] == doctest::Approx(0.0));
  CHECK(cw.per_class[1] == doctest::Approx(0.0));
  CHECK(cw.overall == doctest::Approx(0.0));

  // uniform classifier on balanced labels
  const auto uniform = testutil::make_dataset(
      4, {1, 2, 3, 4},
      {{0.25, 0.25, 0.25, 0.25}, {0.25, 0.25, 0.25, 0.25},
       {0.25, 0.25, 0.25, 0.25}, {0.25, 0.25, 0.25, 0.25}});
  CHECK(classwise_ece(uniform, one).overall == doctest::Approx(0.0));

  // constant one-hot on balanced K=4 labels: (0.75 + 3*0.25)/4
  const auto onehot = testutil::make_dataset(
      4, {1, 2, 3, 4},
      {{1.0, 0.0, 0.0, 0.0}, {1.0, 0.0, 0.0, 0.0},
       {1.0, 0.0, 0.0, 0.0}, {1.0, 0.0, 0.0, 0.0}});
  const auto cw2 = classwise_ece(onehot, one);
  CHECK(cw2.per_class[0] == doctest::Approx(0.75));
  CHECK(cw2.per_class[1] == doctest::Approx(0.25));
  CHECK(cw2.overall == doctest::Approx(0.375));
}

TEST_CASE("classwise ECE is invariant under class relabeling") {
  RandomStream rng(107);
  const auto ds = testutil::sampled_dataset(rng, 4, 400);
  const auto perm = rng.permutation(4);  // class j -> perm[j]+1
  PredictionDataset relabeled;
  relabeled.n_classes = 4;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    relabeled.labels.push_back(perm[ds.labels[i] - 1] + 1);
    std::vector<double> row(4);
    for (int j = 0; j < 4; ++j) row[perm[j]] = ds.confidences[i][j];
    relabeled.confidences.push_back(cv(row));
  }
  const BinningConfig cfg{10, BinningScheme::EqualWidth, 1.0};
  CHECK(classwise_ece(relabeled, cfg).overall ==
        doctest::Approx(classwise_ece(ds, cfg).overall).epsilon(1e-12));
}

TEST_CASE("reliability curve matches the hand-binned example") {
  const auto ds = four_sample();
  const auto curve = reliability_curve(ds, {2, BinningScheme::EqualMass, 1.0});
  REQUIRE(curve.bins.size() == 2);
  CHECK(curve.bins[0].count == 2);
  CHECK(curve.bins[0].mean_confidence == doctest::Approx(0.65));
  CHECK(curve.bins[0].empirical_frequency == doctest::Approx(0.5));
  CHECK(curve.bins[1].count == 2);
  CHECK(curve.bins[1].mean_confidence == doctest::Approx(0.85));
  CHECK(curve.bins[1].empirical_frequency == doctest::Approx(1.0));

  // empty bins report zero counts and gaps
  const auto wide = reliability_curve(ds, {10, BinningScheme::EqualWidth, 1.0});
  CHECK(wide.bins[0].count == 0);
  CHECK(wide.bins[0].gap == 0.0);

  // aggregation reproduces the ECE
  double agg = 0.0;
  long total = 0;
  for (const auto& b : wide.bins) {
    agg += static_cast<double>(b.count) / 4.0 * b.gap;
    total += b.count;
  }
  CHECK(total == 4);
  CHECK(agg == doctest::Approx(binned_ece(ds, {10, BinningScheme::EqualWidth, 1.0}))
                   .epsilon(1e-15));
}

TEST_CASE("reliability CSV export") {
  const auto ds = four_sample();
  const std::string csv = reliability_csv(reliability_curve(ds, {2, BinningScheme::EqualWidth, 1.0}));
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "bin_lo,bin_hi,count,confidence,frequency,gap");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 2);
}

TEST_CASE("accuracy and NLL") {
  const auto onehot = testutil::make_dataset(3, {1, 2}, {{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}});
  CHECK(accuracy(onehot) == doctest::Approx(1.0));
  CHECK(nll(onehot) <= 1e-11);

  const auto uniform = testutil::make_dataset(
      4, {1, 3}, {{0.25, 0.25, 0.25, 0.25}, {0.25, 0.25, 0.25, 0.25}});
  CHECK(nll(uniform) == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  CHECK(accuracy(four_sample()) == doctest::Approx(0.75));
}

TEST_CASE("overconfidence bound report") {
  // bins (conf .9, freq .6) and (conf .8, freq .7), equal weight
  PredictionDataset ds;
  ds.n_classes = 2;
  const auto add = [&](double conf, int n, int correct) {
    for (int i = 0; i < n; ++i) {
      ds.labels.push_back(correct-- > 0 ? 1 : 2);
      ds.confidences.push_back(cv({conf, 1.0 - conf}));
    }
  };
  add(0.9, 10, 6);
  add(0.8, 10, 7);
  const BinningConfig cfg{10, BinningScheme::EqualWidth, 1.0};
  const auto rep = overconfidence_bound_check(ds, cfg);
  CHECK(rep.ece == doctest::Approx(0.2));
  CHECK(rep.overconfident_mass == doctest::Approx(1.0));
  CHECK(rep.accuracy_over == doctest::Approx(0.65));
  CHECK(rep.slack == doctest::Approx(0.1));
  CHECK(rep.bound == doctest::Approx(0.45));
  CHECK(rep.holds);

  // calibrated bins trivially satisfy the bound
  RandomStream rng(109);
  const auto calibrated = testutil::sampled_dataset(rng, 4, 2000);
  CHECK(overconfidence_bound_check(calibrated, cfg).holds);

  // fully underconfident: the mirrored bound applies
  PredictionDataset under;
  under.n_classes = 2;
  for (int i = 0; i < 20; ++i) {
    under.labels.push_back(i < 18 ? 1 : 2);
    under.confidences.push_back(cv({0.6, 0.4}));
  }
  const auto urep = overconfidence_bound_check(under, cfg);
  CHECK(urep.underconfident_mass == doctest::Approx(1.0));
  CHECK(urep.accuracy_under == doctest::Approx(0.9));
  CHECK(urep.holds_under);
  CHECK(urep.ece <= urep.accuracy_under + urep.slack);
}

TEST_CASE("all-bins-overconfident identity: ECE = mean conf - accuracy") {
  RandomStream rng(113);
  for (int trial = 0; trial < 20; ++trial) {
    PredictionDataset ds;
    ds.n_classes = 2;
    for (int b = 0; b < 10; ++b) {
      const int n = 20 + static_cast<int>(rng.next_u64() % 30);
      const double lo = 0.5 + 0.05 * b;
      int correct = 0;
      std::vector<double> confs;
      double conf_sum = 0.0;
      for (int i = 0; i < n; ++i) {
        const double c = lo + 0.05 * rng.uniform();
        confs.push_back(c);
        conf_sum += c;
      }
      // cap correct strictly under the bin's mean confidence
      correct = static_cast<int>(std::floor(conf_sum / n * n) - 1);
      correct = std::max(0, correct);
      for (int i = 0; i < n; ++i) {
        ds.labels.push_back(i < correct ? 1 : 2);
        ds.confidences.push_back(cv({confs[i], 1.0 - confs[i]}));
      }
    }
    const BinningConfig cfg{20, BinningScheme::EqualWidth, 1.0};
    const auto curve = reliability_curve(ds, cfg);
    bool all_over = true;
    for (const auto& b : curve.bins) {
      if (b.count > 0 && b.empirical_frequency > b.mean_confidence) all_over = false;
    }
    REQUIRE(all_over);
    double conf = 0.0;
    for (const auto& c : ds.confidences) conf += max_entry(c);
    conf /= static_cast<double>(ds.size());
    const double ece = binned_ece(ds, cfg);
    CHECK(ece == doctest::Approx(conf - accuracy(ds)).epsilon(1e-12));
    CHECK(ece <= 1.0 - accuracy(ds) + 1e-15);
  }
}

TEST_CASE("strong-calibration sanity at scale") {
  DirichletSpec spec;
  spec.n = 50000;
  spec.n_classes = 5;
  spec.alpha.assign(5, 1.0);
  spec.sharpen_t = 1.0;
  spec.seed = 7;
  const auto ds = gen_dirichlet(spec);
  CHECK(binned_ece(ds, {25, BinningScheme::EqualWidth, 1.0}) <= 0.02);
}

TEST_CASE("infinity norm takes the worst bin") {
  const auto ds = four_sample();
  const BinningConfig inf{2, BinningScheme::EqualMass,
                          std::numeric_limits<double>::infinity()};
  CHECK(binned_ece(ds, inf) == doctest::Approx(0.15));
}
