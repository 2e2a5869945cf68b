#include "calib/binning.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace calib {

BinningScheme parse_scheme(const std::string& s) {
  if (s == "equal-width") return BinningScheme::EqualWidth;
  if (s == "equal-mass") return BinningScheme::EqualMass;
  throw std::invalid_argument("unknown binning scheme '" + s +
                              "' (valid: equal-width, equal-mass)");
}

std::string scheme_str(BinningScheme s) {
  return s == BinningScheme::EqualWidth ? "equal-width" : "equal-mass";
}

namespace {

double quantile(const std::vector<double>& sorted, double q) {
  const double h = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

std::vector<double> make_bin_edges(int n_bins, BinningScheme scheme,
                                   const std::vector<double>& scores) {
  if (n_bins < 1) throw std::invalid_argument("n_bins must be >= 1");
  std::vector<double> edges;
  edges.reserve(n_bins + 1);
  edges.push_back(0.0);
  if (scheme == BinningScheme::EqualWidth) {
    for (int i = 1; i < n_bins; ++i) {
      edges.push_back(static_cast<double>(i) / n_bins);
    }
  } else {
    std::vector<double> sorted(scores);
    std::sort(sorted.begin(), sorted.end());
    if (!sorted.empty()) {
      for (int i = 1; i < n_bins; ++i) {
        const double e = quantile(sorted, static_cast<double>(i) / n_bins);
        if (e > edges.back() && e < 1.0) edges.push_back(e);
      }
    }
  }
  edges.push_back(1.0);
  return edges;
}

int bin_index(const std::vector<double>& edges, double s) {
  // upper_bound over interior edges: bins are right-open except the last
  const auto it = std::upper_bound(edges.begin() + 1, edges.end() - 1, s);
  return static_cast<int>(it - edges.begin()) - 1;
}

}  // namespace calib
