#pragma once

#include <string>
#include <vector>

#include "calib/binning.hpp"
#include "calib/dataset.hpp"

namespace calib {

/// Binning and norm choice for the binned calibration-error estimators.
/// p_norm >= 1; use std::numeric_limits<double>::infinity() for the max norm.
struct BinningConfig {
  int n_bins = 25;
  BinningScheme scheme = BinningScheme::EqualWidth;
  double p_norm = 1.0;
};

struct ReliabilityBin {
  double lo = 0.0;
  double hi = 0.0;
  long count = 0;
  double mean_confidence = 0.0;
  double empirical_frequency = 0.0;
  double gap = 0.0;
};

struct ReliabilityCurve {
  std::vector<ReliabilityBin> bins;
  long total = 0;
};

/// Weighted p-norm of per-bin |mean outcome - mean score| gaps. This is the
/// shared binned estimator: the ECE of a classifier is this applied to
/// (max confidence, top-class correctness) pairs.
double binned_binary_error(const std::vector<double>& scores,
                           const std::vector<int>& outcomes, const BinningConfig& cfg);

double binned_ece(const PredictionDataset& ds, const BinningConfig& cfg);

/// L2 debiased estimator: sqrt(max(0, sum_b w_b (gap_b^2 - f_b(1-f_b)/(n_b-1)))),
/// bins with fewer than 2 samples keeping their plain gap^2 term.
/// Requires p_norm == 2.
double debiased_ece(const PredictionDataset& ds, const BinningConfig& cfg);

struct ClasswiseEce {
  double overall = 0.0;
  std::vector<double> per_class;
};

/// Per class k, the binned error of (c_k, 1{y = k}); overall is the plain
/// 1/K average over classes.
ClasswiseEce classwise_ece(const PredictionDataset& ds, const BinningConfig& cfg);

ReliabilityCurve reliability_curve(const PredictionDataset& ds, const BinningConfig& cfg);
ReliabilityCurve reliability_curve_binary(const std::vector<double>& scores,
                                          const std::vector<int>& outcomes,
                                          const BinningConfig& cfg);

/// Header `bin_lo,bin_hi,count,confidence,frequency,gap`.
std::string reliability_csv(const ReliabilityCurve& curve);

double accuracy(const PredictionDataset& ds);
double nll(const PredictionDataset& ds);

/// Empirical check of the overconfidence bound: the union U of bins with
/// empirical frequency <= mean confidence yields ECE <= 1 - acc_U up to the
/// binning slack (max bin width). The mirrored fields cover the
/// underconfident direction, where ECE <= acc_U (+ slack).
struct OverconfidenceBoundReport {
  double ece = 0.0;
  double slack = 0.0;  // max bin width
  double overconfident_mass = 0.0;
  double accuracy_over = 1.0;
  double bound = 0.0;  // 1 - accuracy_over + slack
  bool holds = false;
  double underconfident_mass = 0.0;
  double accuracy_under = 1.0;
  double bound_under = 0.0;  // accuracy_under + slack
  bool holds_under = false;
};

OverconfidenceBoundReport overconfidence_bound_check(const PredictionDataset& ds, const BinningConfig& cfg);

}  // namespace calib
