#include "calib/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "calib/simplex.hpp"

namespace calib {

namespace {

void check_config(const BinningConfig& cfg) {
  if (cfg.n_bins < 1) throw std::invalid_argument("n_bins must be >= 1");
  if (!(cfg.p_norm >= 1.0)) throw std::invalid_argument("p_norm must be >= 1");
}

std::vector<double> top_scores(const PredictionDataset& ds) {
  std::vector<double> s(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) s[i] = max_entry(ds.confidences[i]);
  return s;
}

std::vector<int> top_correct(const PredictionDataset& ds) {
  std::vector<int> y(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    y[i] = argmax_tiebreak(ds.confidences[i]) == ds.labels[i] ? 1 : 0;
  }
  return y;
}

double aggregate_gaps(const ReliabilityCurve& curve, double p) {
  if (curve.total == 0) return 0.0;
  const double n = static_cast<double>(curve.total);
  if (std::isinf(p)) {
    double worst = 0.0;
    for (const auto& b : curve.bins) {
      if (b.count > 0) worst = std::max(worst, b.gap);
    }
    return worst;
  }
  double total = 0.0;
  for (const auto& b : curve.bins) {
    if (b.count == 0) continue;  // empty bins carry zero weight
    total += (static_cast<double>(b.count) / n) * std::pow(b.gap, p);
  }
  return p == 1.0 ? total : std::pow(total, 1.0 / p);
}

}  // namespace

ReliabilityCurve reliability_curve_binary(const std::vector<double>& scores,
                                          const std::vector<int>& outcomes,
                                          const BinningConfig& cfg) {
  check_config(cfg);
  if (scores.size() != outcomes.size()) {
    throw std::invalid_argument("scores/outcomes length mismatch");
  }
  const auto edges = make_bin_edges(cfg.n_bins, cfg.scheme, scores);
  const int nb = static_cast<int>(edges.size()) - 1;
  std::vector<double> conf_sum(nb, 0.0), freq_sum(nb, 0.0);
  std::vector<long> count(nb, 0);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const int b = bin_index(edges, scores[i]);
    conf_sum[b] += scores[i];
    freq_sum[b] += outcomes[i];
    count[b] += 1;
  }
  ReliabilityCurve curve;
  curve.total = static_cast<long>(scores.size());
  curve.bins.resize(nb);
  for (int b = 0; b < nb; ++b) {
    ReliabilityBin& bin = curve.bins[b];
    bin.lo = edges[b];
    bin.hi = edges[b + 1];
    bin.count = count[b];
    if (count[b] > 0) {
      bin.mean_confidence = conf_sum[b] / static_cast<double>(count[b]);
      bin.empirical_frequency = freq_sum[b] / static_cast<double>(count[b]);
      bin.gap = std::abs(bin.empirical_frequency - bin.mean_confidence);
    }
  }
  return curve;
}

double binned_binary_error(const std::vector<double>& scores,
                           const std::vector<int>& outcomes, const BinningConfig& cfg) {
  return aggregate_gaps(reliability_curve_binary(scores, outcomes, cfg), cfg.p_norm);
}

double binned_ece(const PredictionDataset& ds, const BinningConfig& cfg) {
  return binned_binary_error(top_scores(ds), top_correct(ds), cfg);
}

double debiased_ece(const PredictionDataset& ds, const BinningConfig& cfg) {
  check_config(cfg);
  if (cfg.p_norm != 2.0) {
    throw std::invalid_argument("debiased ECE is defined for p_norm = 2 only");
  }
  const ReliabilityCurve curve =
      reliability_curve_binary(top_scores(ds), top_correct(ds), cfg);
  const double n = static_cast<double>(curve.total);
  double total = 0.0;
  for (const auto& b : curve.bins) {
    if (b.count == 0) continue;
    const double w = static_cast<double>(b.count) / n;
    double term = b.gap * b.gap;
    if (b.count >= 2) {
      const double f = b.empirical_frequency;
      term -= f * (1.0 - f) / static_cast<double>(b.count - 1);
    }
    total += w * term;
  }
  return std::sqrt(std::max(0.0, total));
}

ClasswiseEce classwise_ece(const PredictionDataset& ds, const BinningConfig& cfg) {
  check_config(cfg);
  ClasswiseEce out;
  out.per_class.resize(ds.n_classes);
  std::vector<double> scores(ds.size());
  std::vector<int> outcomes(ds.size());
  for (int k = 0; k < ds.n_classes; ++k) {
    for (std::size_t i = 0; i < ds.size(); ++i) {
      scores[i] = ds.confidences[i][k];
      outcomes[i] = ds.labels[i] == k + 1 ? 1 : 0;
    }
    out.per_class[k] = binned_binary_error(scores, outcomes, cfg);
    out.overall += out.per_class[k];
  }
  out.overall /= static_cast<double>(ds.n_classes);
  return out;
}

ReliabilityCurve reliability_curve(const PredictionDataset& ds, const BinningConfig& cfg) {
  return reliability_curve_binary(top_scores(ds), top_correct(ds), cfg);
}

std::string reliability_csv(const ReliabilityCurve& curve) {
  std::ostringstream out;
  out << "bin_lo,bin_hi,count,confidence,frequency,gap\n";
  for (const auto& b : curve.bins) {
    out << format_double(b.lo) << ',' << format_double(b.hi) << ',' << b.count << ','
        << format_double(b.mean_confidence) << ',' << format_double(b.empirical_frequency)
        << ',' << format_double(b.gap) << '\n';
  }
  return out.str();
}

double accuracy(const PredictionDataset& ds) {
  const auto correct = top_correct(ds);
  double sum = 0.0;
  for (int c : correct) sum += c;
  return sum / static_cast<double>(ds.size());
}

double nll(const PredictionDataset& ds) {
  double total = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    total += -std::log(clip_for_log(ds.confidences[i][ds.labels[i] - 1]));
  }
  return total / static_cast<double>(ds.size());
}

OverconfidenceBoundReport overconfidence_bound_check(const PredictionDataset& ds, const BinningConfig& cfg) {
  const ReliabilityCurve curve = reliability_curve(ds, cfg);
  OverconfidenceBoundReport rep;
  rep.ece = aggregate_gaps(curve, cfg.p_norm);
  const double n = static_cast<double>(curve.total);
  double over_w = 0.0, over_freq = 0.0;
  double under_w = 0.0, under_freq = 0.0;
  for (const auto& b : curve.bins) {
    rep.slack = std::max(rep.slack, b.hi - b.lo);
    if (b.count == 0) continue;
    const double w = static_cast<double>(b.count) / n;
    if (b.empirical_frequency <= b.mean_confidence) {
      over_w += w;
      over_freq += w * b.empirical_frequency;
    }
    if (b.empirical_frequency >= b.mean_confidence) {
      under_w += w;
      under_freq += w * b.empirical_frequency;
    }
  }
  rep.overconfident_mass = over_w;
  rep.accuracy_over = over_w > 0.0 ? over_freq / over_w : 1.0;
  rep.bound = 1.0 - rep.accuracy_over + rep.slack;
  rep.holds = rep.ece <= rep.bound;
  rep.underconfident_mass = under_w;
  rep.accuracy_under = under_w > 0.0 ? under_freq / under_w : 1.0;
  rep.bound_under = rep.accuracy_under + rep.slack;
  rep.holds_under = rep.ece <= rep.bound_under;
  return rep;
}

}  // namespace calib
