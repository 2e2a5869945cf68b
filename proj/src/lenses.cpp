#include "calib/lenses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace calib {

LensKind LensKind::parse(const std::string& s) {
  if (s == "confidence") return confidence();
  if (s == "toplabel") return toplabel();
  const auto colon = s.find(':');
  if (colon != std::string::npos) {
    const std::string head = s.substr(0, colon);
    const std::string tail = s.substr(colon + 1);
    try {
      const int k = std::stoi(tail);
      if (std::to_string(k) == tail && k >= 1) {
        if (head == "topk") return topk(k);
        if (head == "sumk") return sumk(k);
      }
    } catch (const std::exception&) {
    }
  }
  throw std::invalid_argument("unknown lens '" + s +
                              "' (valid: confidence, topk:<k>, sumk:<k>, toplabel)");
}

std::string LensKind::str() const {
  switch (type) {
    case LensType::Confidence: return "confidence";
    case LensType::TopK: return "topk:" + std::to_string(k);
    case LensType::SumK: return "sumk:" + std::to_string(k);
    case LensType::TopLabel: return "toplabel";
  }
  return "?";
}

void LensKind::validate(int n_classes) const {
  if (type == LensType::TopK || type == LensType::SumK) {
    if (k < 1 || k >= n_classes) {
      throw std::invalid_argument("lens " + str() + " requires 1 <= k < K (K=" +
                                  std::to_string(n_classes) + ")");
    }
  }
}

ReducedSample apply_lens(const LensKind& kind, int y, const ConfidenceVector& c) {
  ReducedSample out;
  switch (kind.type) {
    case LensType::Confidence: {
      const int a = argmax_tiebreak(c);
      out.reduced_label = (y == a) ? 1 : 0;
      out.reduced_confidence = {c[a - 1]};
      break;
    }
    case LensType::TopLabel: {
      const int a = argmax_tiebreak(c);
      out.reduced_label = (y == a) ? 1 : 0;
      out.reduced_confidence = {c[a - 1]};
      out.aux_class = a;
      break;
    }
    case LensType::TopK: {
      const auto order = rank_order(c.values);
      out.reduced_label = 0;
      out.reduced_confidence.reserve(kind.k);
      for (int j = 0; j < kind.k; ++j) {
        if (order[j] == y - 1) out.reduced_label = j + 1;
        out.reduced_confidence.push_back(c[order[j]]);
      }
      break;
    }
    case LensType::SumK: {
      const auto order = rank_order(c.values);
      double sum = 0.0;
      int label = 0;
      for (int j = 0; j < kind.k; ++j) {
        if (order[j] == y - 1) label = 1;
        sum += c[order[j]];
      }
      out.reduced_label = label;
      out.reduced_confidence = {sum};
      break;
    }
  }
  return out;
}

namespace {

double checked_r(double r) {
  if (!(r >= 0.0 && r <= 1.0)) {
    throw std::invalid_argument("reduced recalibrator output " + std::to_string(r) +
                                " outside [0, 1]");
  }
  return r;
}

}  // namespace

ConfidenceVector lift_confidence(const ScalarMap& rtilde, const ConfidenceVector& c) {
  const int a = argmax_tiebreak(c) - 1;
  const int k = static_cast<int>(c.size());
  const double r = checked_r(rtilde(c[a]));
  std::vector<double> out(k, (1.0 - r) / (k - 1));
  out[a] = r;
  return ConfidenceVector(std::move(out));
}

ConfidenceVector lift_weighted(const ScalarMap& rtilde, const ConfidenceVector& c) {
  const int a = argmax_tiebreak(c) - 1;
  const int k = static_cast<int>(c.size());
  const double r = checked_r(rtilde(c[a]));
  double rest = 0.0;
  for (int i = 0; i < k; ++i) {
    if (i != a) rest += c[i];
  }
  std::vector<double> out(k);
  out[a] = r;
  for (int i = 0; i < k; ++i) {
    if (i == a) continue;
    // zero non-top mass: proportional split is 0/0, fall back to uniform
    out[i] = rest > 0.0 ? (1.0 - r) * (c[i] / rest) : (1.0 - r) / (k - 1);
  }
  return ConfidenceVector(std::move(out));
}

ConfidenceVector lift_topk(int k, const VectorMap& rtilde, const ConfidenceVector& c) {
  const int n = static_cast<int>(c.size());
  if (k < 1 || k >= n) throw std::invalid_argument("lift_topk requires 1 <= k < K");
  const auto order = rank_order(c.values);
  std::vector<double> top(k);
  for (int j = 0; j < k; ++j) top[j] = c[order[j]];
  const std::vector<double> r = rtilde(top);
  if (static_cast<int>(r.size()) != k) {
    throw std::invalid_argument("top-k recalibrator must return k values");
  }
  double sum = 0.0;
  for (double v : r) {
    if (!(v >= 0.0)) throw std::invalid_argument("top-k recalibrator output negative");
    sum += v;
  }
  if (sum > 1.0) {
    throw std::invalid_argument("top-k recalibrator outputs sum to " +
                                std::to_string(sum) + " > 1");
  }
  std::vector<double> out(n, (1.0 - sum) / (n - k));
  for (int j = 0; j < k; ++j) out[order[j]] = r[j];
  return ConfidenceVector(std::move(out));
}

ConfidenceVector lift_sumk(int k, const ScalarMap& rtilde, const ConfidenceVector& c) {
  const int n = static_cast<int>(c.size());
  if (k < 1 || k >= n) throw std::invalid_argument("lift_sumk requires 1 <= k < K");
  const auto order = rank_order(c.values);
  double sum = 0.0;
  for (int j = 0; j < k; ++j) sum += c[order[j]];
  const double r = checked_r(rtilde(sum));
  std::vector<double> out(n, (1.0 - r) / (n - k));
  for (int j = 0; j < k; ++j) out[order[j]] = r / k;
  return ConfidenceVector(std::move(out));
}

LiftReport condition_mass(const LensKind& kind, bool weighted, const ReducedMap& rmap,
                          const PredictionDataset& ds) {
  if (weighted && kind.type != LensType::Confidence) {
    throw std::invalid_argument("weighted lift is only defined for the confidence lens");
  }
  const int K = ds.n_classes;
  LiftReport report;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const ConfidenceVector& c = ds.confidences[i];
    const ReducedSample red = apply_lens(kind, ds.labels[i], c);
    const std::vector<double> r = rmap(red);
    bool ok = true;
    switch (kind.type) {
      case LensType::Confidence: {
        if (weighted) {
          const int a = argmax_tiebreak(c) - 1;
          double rest = 0.0, second = 0.0;
          for (int j = 0; j < K; ++j) {
            if (j == a) continue;
            rest += c[j];
            second = std::max(second, c[j]);
          }
          // threshold is largest over i != a at the second-largest entry
          const double thr = (second + rest) > 0.0 ? second / (second + rest) : 0.0;
          ok = r[0] >= thr;
        } else {
          ok = r[0] >= 1.0 / K;
        }
        break;
      }
      case LensType::TopLabel:
        ok = r[0] >= 1.0 / K;
        break;
      case LensType::TopK:
        for (double v : r) ok = ok && v >= 1.0 / K;
        break;
      case LensType::SumK:
        ok = r[0] >= static_cast<double>(kind.k) / K;
        break;
    }
    if (!ok) report.violating_indices.push_back(static_cast<int>(i));
  }
  report.condition_mass =
      1.0 - static_cast<double>(report.violating_indices.size()) /
                static_cast<double>(ds.size());
  return report;
}

}  // namespace calib
