#pragma once

// Independent oracles the implementation is checked against. These stay
// deliberately naive: grid searches and exhaustive enumeration, no shared
// code with the fitting paths they verify.

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "calib/calibrators.hpp"
#include "calib/dataset.hpp"

namespace oracle {

/// Grid search of the temperature NLL over 1000 log-spaced points in
/// [0.01, 100].
inline double grid_search_temperature(const calib::PredictionDataset& ds) {
  double best_t = 1.0;
  double best = std::numeric_limits<double>::infinity();
  const double lo = std::log(0.01), hi = std::log(100.0);
  for (int i = 0; i < 1000; ++i) {
    const double t = std::exp(lo + (hi - lo) * i / 999.0);
    const double v = calib::temperature_nll(ds, t);
    if (v < best) {
      best = v;
      best_t = t;
    }
  }
  return best_t;
}

/// Exact isotonic least squares by enumerating every contiguous block
/// partition with nondecreasing block means. Scores must be sorted and
/// distinct; feasible for n <= ~16.
inline double exhaustive_isotonic_sse(const std::vector<double>& outcomes) {
  const int n = static_cast<int>(outcomes.size());
  double best = std::numeric_limits<double>::infinity();
  for (unsigned mask = 0; mask < (1u << (n - 1)); ++mask) {
    // bit i set = block boundary between i and i+1
    double sse = 0.0, prev_mean = -std::numeric_limits<double>::infinity();
    bool feasible = true;
    int start = 0;
    for (int i = 0; i < n; ++i) {
      const bool boundary = i == n - 1 || (mask & (1u << i));
      if (!boundary) continue;
      double sum = 0.0;
      for (int j = start; j <= i; ++j) sum += outcomes[j];
      const double mean = sum / (i - start + 1);
      if (mean < prev_mean) {
        feasible = false;
        break;
      }
      for (int j = start; j <= i; ++j) sse += (outcomes[j] - mean) * (outcomes[j] - mean);
      prev_mean = mean;
      start = i + 1;
    }
    if (feasible) best = std::min(best, sse);
  }
  return best;
}

inline double isotonic_fit_sse(const calib::BinaryPairs& pairs) {
  const calib::IsotonicModel m = calib::fit_isotonic(pairs);
  double sse = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double v = calib::apply_isotonic(m, pairs.scores[i]);
    sse += (pairs.outcomes[i] - v) * (pairs.outcomes[i] - v);
  }
  return sse;
}

/// Coarse-to-fine grid search of the beta-calibration NLL over (a, b, c0).
inline std::array<double, 3> grid_search_beta(const calib::BinaryPairs& pairs) {
  const auto nll_at = [&](double a, double b, double c0) {
    double total = 0.0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const double s = std::clamp(pairs.scores[i], 1e-12, 1.0 - 1e-12);
      const double z = a * std::log(s) - b * std::log(1.0 - s) + c0;
      const double p = 1.0 / (1.0 + std::exp(-z));
      const double q = std::clamp(p, 1e-15, 1.0 - 1e-15);
      total += pairs.outcomes[i] == 1 ? -std::log(q) : -std::log(1.0 - q);
    }
    return total / static_cast<double>(pairs.size());
  };
  std::array<double, 3> best{1.0, 1.0, 0.0};
  std::array<double, 3> radius{4.0, 4.0, 4.0};
  for (int round = 0; round < 5; ++round) {
    std::array<double, 3> local = best;
    double best_v = std::numeric_limits<double>::infinity();
    const int steps = 5;
    for (int ia = -steps; ia <= steps; ++ia) {
      for (int ib = -steps; ib <= steps; ++ib) {
        for (int ic = -steps; ic <= steps; ++ic) {
          const double a = std::max(0.0, best[0] + radius[0] * ia / steps);
          const double b = std::max(0.0, best[1] + radius[1] * ib / steps);
          const double c0 = best[2] + radius[2] * ic / steps;
          const double v = nll_at(a, b, c0);
          if (v < best_v) {
            best_v = v;
            local = {a, b, c0};
          }
        }
      }
    }
    best = local;
    for (double& r : radius) r /= 4.0;
  }
  return best;
}

/// Closed-form top-class confidence of the noiseless ETF logit vector:
/// the top logit exceeds the others by rho*K/(K-1).
inline double etf_top_confidence(double rho, int k) {
  const double delta = rho * k / (k - 1.0);
  return std::exp(delta) / (std::exp(delta) + (k - 1.0));
}

}  // namespace oracle
