#pragma once

#include <optional>
#include <string>
#include <vector>

#include "calib/simplex.hpp"

namespace calib {

/// Paired labels and confidence vectors, optionally with the raw logits they
/// came from. Labels are 1-based ({1..K}) everywhere: in files and in the API.
struct PredictionDataset {
  int n_classes = 0;
  std::vector<int> labels;
  std::vector<ConfidenceVector> confidences;
  std::optional<std::vector<std::vector<double>>> logits;

  std::size_t size() const { return labels.size(); }

  /// Throws std::invalid_argument on any broken invariant.
  void validate() const;

  /// Row subset (by 0-based indices), preserving order. Logits follow.
  PredictionDataset subset(const std::vector<int>& indices) const;
};

/// Binary recalibration input: scores in [0,1] paired with 0/1 outcomes.
/// Scores are clipped into [0,1] on construction.
struct BinaryPairs {
  std::vector<double> scores;
  std::vector<int> outcomes;

  BinaryPairs() = default;
  BinaryPairs(std::vector<double> s, std::vector<int> o);

  std::size_t size() const { return scores.size(); }
};

enum class DatasetFormat { Auto, CsvConfidence, CsvLogits, Json };

/// CSV header `label,c1,...,cK` (confidences) or `label,l1,...,lK` (logits),
/// or a JSON mirror of the same fields. Auto picks by extension and header.
/// Rows whose sum deviates from 1 by more than kSimplexTol fail with the
/// offending row index; accepted rows are renormalized to sum exactly 1.
PredictionDataset load_dataset(const std::string& path,
                               DatasetFormat format = DatasetFormat::Auto);

/// Auto resolves to Json for .json paths, else CsvLogits when logits are
/// stored, else CsvConfidence. Floats are written shortest-round-trip.
void save_dataset(const PredictionDataset& ds, const std::string& path,
                  DatasetFormat format = DatasetFormat::Auto);

/// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double x);

}  // namespace calib
