#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "calib/dataset.hpp"
#include "calib/simplex.hpp"

namespace calib {

enum class LensType { Confidence, TopK, SumK, TopLabel };

/// A reduction of the K-class calibration problem. CLI grammar:
/// `confidence`, `topk:<k>`, `sumk:<k>`, `toplabel`.
struct LensKind {
  LensType type = LensType::Confidence;
  int k = 1;  // TopK / SumK only

  static LensKind confidence() { return {LensType::Confidence, 1}; }
  static LensKind topk(int k) { return {LensType::TopK, k}; }
  static LensKind sumk(int k) { return {LensType::SumK, k}; }
  static LensKind toplabel() { return {LensType::TopLabel, 1}; }

  static LensKind parse(const std::string& s);
  std::string str() const;
  void validate(int n_classes) const;  // requires 1 <= k < K for TopK/SumK

  bool operator==(const LensKind&) const = default;
};

/// Output of a lens: the reduced label, the reduced confidence values
/// (one entry except for TopK, which keeps k), and, for the top-label
/// lens, the predicted class the sample was routed by.
struct ReducedSample {
  int reduced_label = 0;
  std::vector<double> reduced_confidence;
  std::optional<int> aux_class;
};

/// Confidence: (1{y = argmax c}, max c).
/// TopK(k):    (rank position j of y if j <= k else 0, top-k values by rank).
/// SumK(k):    (1{y in top-k}, sum of top-k values).
/// TopLabel:   (1{y = argmax c}, max c, argmax c).
/// Ranking is stable-descending with ties broken toward the lower index.
ReducedSample apply_lens(const LensKind& kind, int y, const ConfidenceVector& c);

using ScalarMap = std::function<double(double)>;
using VectorMap = std::function<std::vector<double>(const std::vector<double>&)>;

/// r(c_a) at the argmax position, (1 - r(c_a))/(K-1) elsewhere.
ConfidenceVector lift_confidence(const ScalarMap& rtilde, const ConfidenceVector& c);

/// r(c_a) at the argmax; the remaining mass split proportionally to the
/// original non-top entries (uniform split when their mass is zero).
ConfidenceVector lift_weighted(const ScalarMap& rtilde, const ConfidenceVector& c);

/// Rank-j class receives rtilde(top-k)_j; every non-top class receives
/// (1 - sum_j rtilde_j)/(K-k). Throws if the outputs sum above 1.
ConfidenceVector lift_topk(int k, const VectorMap& rtilde, const ConfidenceVector& c);

/// Each top-k class receives rtilde(sum)/k; each other class
/// (1 - rtilde(sum))/(K-k).
ConfidenceVector lift_sumk(int k, const ScalarMap& rtilde, const ConfidenceVector& c);

/// Empirical mass of the lens's lift condition (the samples on which the
/// lift is guaranteed to commute with the lens).
struct LiftReport {
  double condition_mass = 1.0;
  std::vector<int> violating_indices;
};

/// Maps a reduced sample through the fitted reduced recalibrator; returns one
/// value per reduced-confidence entry.
using ReducedMap = std::function<std::vector<double>(const ReducedSample&)>;

/// Conditions checked per sample:
///   Confidence / TopLabel:  r(max c) >= 1/K
///   TopK(k):                r_j >= 1/K for every rank j
///   SumK(k):                r(sum) >= k/K
///   weighted Confidence:    r(max c) >= c_i / (c_i + sum_{j != a} c_j) for all i != a
LiftReport condition_mass(const LensKind& kind, bool weighted, const ReducedMap& rmap,
                          const PredictionDataset& ds);

}  // namespace calib
