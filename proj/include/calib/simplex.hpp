#pragma once

#include <cstddef>
#include <vector>

namespace calib {

// Accepted deviation of a probability row sum from 1.
inline constexpr double kSimplexTol = 1e-6;
// Clipping constant applied wherever a logarithm is taken.
inline constexpr double kLogClip = 1e-12;

/// A point on the (K-1)-simplex: K entries in [0,1] summing to 1 within
/// kSimplexTol. Immutable value object; validated on construction.
struct ConfidenceVector {
  std::vector<double> values;

  ConfidenceVector() = default;
  explicit ConfidenceVector(std::vector<double> v);

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
};

/// Smallest 1-based class index attaining the maximum entry.
int argmax_tiebreak(const std::vector<double>& v);
int argmax_tiebreak(const ConfidenceVector& c);

double max_entry(const ConfidenceVector& c);

/// 0-based positions sorted by descending value, ties toward lower index.
/// Consistent with argmax_tiebreak: rank_order(v)[0] == argmax_tiebreak(v)-1.
std::vector<int> rank_order(const std::vector<double>& v);

/// Max-stabilized exp-normalization. Throws on non-finite input.
ConfidenceVector softmax(const std::vector<double>& logits);

double clip_unit(double x);      // clamp to [0, 1]
double clip_for_log(double x);   // clamp to [kLogClip, 1]

}  // namespace calib
