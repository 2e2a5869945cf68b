#include "calib/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace calib {

ConfidenceVector::ConfidenceVector(std::vector<double> v) : values(std::move(v)) {
  if (values.size() < 2) {
    throw std::invalid_argument("confidence vector needs at least 2 classes, got " +
                                std::to_string(values.size()));
  }
  double sum = 0.0;
  for (double x : values) {
    if (!std::isfinite(x) || x < 0.0 || x > 1.0) {
      throw std::invalid_argument("confidence entry " + std::to_string(x) +
                                  " outside [0, 1]");
    }
    sum += x;
  }
  if (std::abs(sum - 1.0) > kSimplexTol) {
    throw std::invalid_argument("confidence entries sum to " + std::to_string(sum) +
                                ", expected 1 within " + std::to_string(kSimplexTol));
  }
}

int argmax_tiebreak(const std::vector<double>& v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best + 1;
}

int argmax_tiebreak(const ConfidenceVector& c) { return argmax_tiebreak(c.values); }

double max_entry(const ConfidenceVector& c) {
  return *std::max_element(c.values.begin(), c.values.end());
}

std::vector<int> rank_order(const std::vector<double>& v) {
  std::vector<int> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return v[a] > v[b]; });
  return idx;
}

ConfidenceVector softmax(const std::vector<double>& logits) {
  if (logits.size() < 2) {
    throw std::invalid_argument("softmax needs at least 2 logits");
  }
  for (double l : logits) {
    if (!std::isfinite(l)) throw std::invalid_argument("non-finite logit");
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double denom = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    denom += out[i];
  }
  for (double& x : out) x /= denom;
  return ConfidenceVector(std::move(out));
}

double clip_unit(double x) { return std::min(1.0, std::max(0.0, x)); }

double clip_for_log(double x) { return std::min(1.0, std::max(kLogClip, x)); }

}  // namespace calib
