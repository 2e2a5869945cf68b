#include "calib/calibrators.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace calib {

using nlohmann::json;

BinaryMethod parse_binary_method(const std::string& s) {
  if (s == "temperature") return BinaryMethod::Temperature;
  if (s == "histogram") return BinaryMethod::Histogram;
  if (s == "isotonic") return BinaryMethod::Isotonic;
  if (s == "beta") return BinaryMethod::Beta;
  if (s == "identity") return BinaryMethod::Identity;
  throw std::invalid_argument(
      "unknown method '" + s +
      "' (valid: temperature, histogram, isotonic, beta, identity)");
}

std::string binary_method_str(BinaryMethod m) {
  switch (m) {
    case BinaryMethod::Identity: return "identity";
    case BinaryMethod::Temperature: return "temperature";
    case BinaryMethod::Histogram: return "histogram";
    case BinaryMethod::Isotonic: return "isotonic";
    case BinaryMethod::Beta: return "beta";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// temperature scaling
// ---------------------------------------------------------------------------

namespace {

// Per-row max-shifted log-probabilities; logsumexp(z/T) = ln sum exp(d_j/T)
// since d_max = 0.
struct ShiftedRow {
  std::vector<double> deltas;
  double label_delta = 0.0;
};

std::vector<ShiftedRow> shifted_rows(const PredictionDataset& ds) {
  std::vector<ShiftedRow> rows;
  rows.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    std::vector<double> z(ds.n_classes);
    if (ds.logits) {
      z = (*ds.logits)[i];
    } else {
      for (int j = 0; j < ds.n_classes; ++j) {
        z[j] = std::log(clip_for_log(ds.confidences[i][j]));
      }
    }
    const double zmax = *std::max_element(z.begin(), z.end());
    ShiftedRow row;
    row.deltas.resize(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) row.deltas[j] = z[j] - zmax;
    row.label_delta = row.deltas[ds.labels[i] - 1];
    rows.push_back(std::move(row));
  }
  return rows;
}

double mean_nll(const std::vector<ShiftedRow>& rows, double temperature) {
  double total = 0.0;
  for (const ShiftedRow& row : rows) {
    double denom = 0.0;
    for (double d : row.deltas) denom += std::exp(d / temperature);
    total += std::log(denom) - row.label_delta / temperature;
  }
  return total / static_cast<double>(rows.size());
}

}  // namespace

double temperature_nll(const PredictionDataset& ds, double temperature) {
  return mean_nll(shifted_rows(ds), temperature);
}

TemperatureModel fit_temperature(const PredictionDataset& ds, bool argmax_preserving) {
  if (ds.size() < 2) throw std::invalid_argument("temperature fit needs n >= 2");
  const std::set<int> distinct(ds.labels.begin(), ds.labels.end());
  if (distinct.size() < 2) {
    throw std::invalid_argument("temperature fit needs at least 2 distinct labels");
  }
  const auto rows = shifted_rows(ds);
  const auto nll_at = [&](double u) { return mean_nll(rows, std::exp(u)); };

  double lo = -6.0, hi = 6.0;
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - gr * (hi - lo);
  double d = lo + gr * (hi - lo);
  double fc = nll_at(c), fd = nll_at(d);
  while (hi - lo > 1e-6) {
    if (fc < fd) {
      hi = d; d = c; fd = fc;
      c = hi - gr * (hi - lo);
      fc = nll_at(c);
    } else {
      lo = c; c = d; fc = fd;
      d = lo + gr * (hi - lo);
      fd = nll_at(d);
    }
  }
  TemperatureModel m;
  m.temperature = std::exp(0.5 * (lo + hi));
  m.argmax_preserving = argmax_preserving;
  if (argmax_preserving) m.temperature = std::max(1.0, m.temperature);
  return m;
}

ConfidenceVector apply_temperature(const TemperatureModel& m, const ConfidenceVector& c) {
  std::vector<double> z(c.size());
  for (std::size_t j = 0; j < c.size(); ++j) {
    z[j] = std::log(clip_for_log(c[j])) / m.temperature;
  }
  return softmax(z);
}

std::vector<double> apply_temperature_logits(const TemperatureModel& m,
                                             const std::vector<double>& logits) {
  std::vector<double> z(logits);
  for (double& v : z) v /= m.temperature;
  return z;
}

TemperatureModel fit_binary_temperature(const BinaryPairs& pairs) {
  PredictionDataset ds;
  ds.n_classes = 2;
  ds.labels.reserve(pairs.size());
  ds.confidences.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    ds.labels.push_back(pairs.outcomes[i] == 1 ? 1 : 2);
    ds.confidences.push_back(
        ConfidenceVector({pairs.scores[i], 1.0 - pairs.scores[i]}));
  }
  return fit_temperature(ds);
}

double apply_binary_temperature(const TemperatureModel& m, double s) {
  const double a = std::exp(std::log(clip_for_log(s)) / m.temperature);
  const double b = std::exp(std::log(clip_for_log(1.0 - s)) / m.temperature);
  return a / (a + b);
}

// ---------------------------------------------------------------------------
// histogram binning
// ---------------------------------------------------------------------------

HistogramModel fit_histogram(const BinaryPairs& pairs, int n_bins, BinningScheme scheme) {
  if (n_bins < 1) throw std::invalid_argument("histogram needs n_bins >= 1");
  if (pairs.size() < 1) throw std::invalid_argument("histogram fit needs n >= 1");
  HistogramModel m;
  m.bin_edges = make_bin_edges(n_bins, scheme, pairs.scores);
  m.n_bins = static_cast<int>(m.bin_edges.size()) - 1;
  std::vector<double> outcome_sum(m.n_bins, 0.0);
  std::vector<long> count(m.n_bins, 0);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const int b = bin_index(m.bin_edges, pairs.scores[i]);
    outcome_sum[b] += pairs.outcomes[i];
    count[b] += 1;
  }
  m.bin_values.resize(m.n_bins);
  for (int b = 0; b < m.n_bins; ++b) {
    m.bin_values[b] = count[b] > 0
                          ? outcome_sum[b] / static_cast<double>(count[b])
                          : 0.5 * (m.bin_edges[b] + m.bin_edges[b + 1]);
  }
  return m;
}

double apply_histogram(const HistogramModel& m, double s) {
  return m.bin_values[bin_index(m.bin_edges, clip_unit(s))];
}

// ---------------------------------------------------------------------------
// isotonic regression
// ---------------------------------------------------------------------------

IsotonicModel fit_isotonic(const BinaryPairs& pairs) {
  if (pairs.size() < 1) throw std::invalid_argument("isotonic fit needs n >= 1");
  std::vector<int> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return pairs.scores[a] < pairs.scores[b]; });

  // merge duplicate scores into weighted points so the fit is order-independent
  struct Block {
    double score;
    double weight;
    double value;
  };
  std::vector<Block> points;
  for (int i : order) {
    const double s = pairs.scores[i];
    const double y = pairs.outcomes[i];
    if (!points.empty() && points.back().score == s) {
      Block& b = points.back();
      b.value = (b.value * b.weight + y) / (b.weight + 1.0);
      b.weight += 1.0;
    } else {
      points.push_back({s, 1.0, y});
    }
  }

  std::vector<Block> stack;
  for (const Block& p : points) {
    stack.push_back(p);
    while (stack.size() > 1 &&
           stack[stack.size() - 2].value > stack.back().value) {
      const Block top = stack.back();
      stack.pop_back();
      Block& prev = stack.back();
      const double w = prev.weight + top.weight;
      prev.value = (prev.value * prev.weight + top.value * top.weight) / w;
      prev.weight = w;
    }
  }

  IsotonicModel m;
  m.breakpoints.reserve(stack.size());
  m.block_values.reserve(stack.size());
  for (const Block& b : stack) {
    m.breakpoints.push_back(b.score);
    m.block_values.push_back(clip_unit(b.value));
  }
  return m;
}

double apply_isotonic(const IsotonicModel& m, double s) {
  const auto it = std::upper_bound(m.breakpoints.begin(), m.breakpoints.end(), s);
  const std::size_t idx =
      it == m.breakpoints.begin() ? 0 : static_cast<std::size_t>(it - m.breakpoints.begin()) - 1;
  return m.block_values[idx];
}

// ---------------------------------------------------------------------------
// beta calibration
// ---------------------------------------------------------------------------

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Newton fit of a logistic model over the selected feature columns
// (x1 = ln s, x2 = -ln(1-s), intercept always included).
std::array<double, 3> newton_logistic(const std::vector<std::array<double, 2>>& x,
                                      const std::vector<int>& y, bool use1, bool use2) {
  const std::size_t n = y.size();
  std::array<double, 3> theta = {use1 ? 1.0 : 0.0, use2 ? 1.0 : 0.0, 0.0};
  for (int iter = 0; iter < 500; ++iter) {
    std::array<double, 3> grad = {0, 0, 0};
    std::array<std::array<double, 3>, 3> hess = {};
    for (std::size_t i = 0; i < n; ++i) {
      const std::array<double, 3> f = {use1 ? x[i][0] : 0.0, use2 ? x[i][1] : 0.0, 1.0};
      const double p = sigmoid(theta[0] * f[0] + theta[1] * f[1] + theta[2]);
      const double r = p - y[i];
      const double w = std::max(p * (1.0 - p), 1e-12);
      for (int a = 0; a < 3; ++a) {
        grad[a] += r * f[a];
        for (int b = 0; b < 3; ++b) hess[a][b] += w * f[a] * f[b];
      }
    }
    double gnorm = 0.0;
    for (int a = 0; a < 3; ++a) {
      grad[a] /= static_cast<double>(n);
      gnorm = std::max(gnorm, std::abs(grad[a]));
      for (int b = 0; b < 3; ++b) hess[a][b] /= static_cast<double>(n);
    }
    if (gnorm < 1e-8) break;
    for (int a = 0; a < 3; ++a) hess[a][a] += 1e-10;
    // inactive coordinates get an identity row to keep the solve nonsingular
    if (!use1) { hess[0] = {1, 0, 0}; grad[0] = 0; hess[1][0] = hess[2][0] = 0; }
    if (!use2) { hess[1] = {0, 1, 0}; grad[1] = 0; hess[0][1] = hess[2][1] = 0; }

    // solve hess * step = grad (Gaussian elimination, partial pivoting)
    std::array<std::array<double, 4>, 3> aug;
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) aug[a][b] = hess[a][b];
      aug[a][3] = grad[a];
    }
    for (int col = 0; col < 3; ++col) {
      int piv = col;
      for (int rw = col + 1; rw < 3; ++rw) {
        if (std::abs(aug[rw][col]) > std::abs(aug[piv][col])) piv = rw;
      }
      std::swap(aug[col], aug[piv]);
      for (int rw = 0; rw < 3; ++rw) {
        if (rw == col) continue;
        const double factor = aug[rw][col] / aug[col][col];
        for (int b = col; b < 4; ++b) aug[rw][b] -= factor * aug[col][b];
      }
    }
    std::array<double, 3> step;
    for (int a = 0; a < 3; ++a) step[a] = aug[a][3] / aug[a][a];
    double smax = 0.0;
    for (double v : step) smax = std::max(smax, std::abs(v));
    const double damp = smax > 5.0 ? 5.0 / smax : 1.0;
    for (int a = 0; a < 3; ++a) theta[a] -= damp * step[a];
  }
  return theta;
}

}  // namespace

BetaModel fit_beta(const BinaryPairs& pairs) {
  const std::size_t n = pairs.size();
  if (n < 2) throw std::invalid_argument("beta fit needs n >= 2");
  long positives = 0;
  for (int y : pairs.outcomes) positives += y;
  if (positives == 0 || positives == static_cast<long>(n)) {
    throw std::invalid_argument("beta fit needs both outcome values present");
  }
  std::vector<std::array<double, 2>> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = std::clamp(pairs.scores[i], kLogClip, 1.0 - kLogClip);
    x[i] = {std::log(s), -std::log(1.0 - s)};
  }
  bool use1 = true, use2 = true;
  std::array<double, 3> theta{};
  // clamp negative coefficients to zero and refit the remaining parameters
  for (int round = 0; round < 3; ++round) {
    theta = newton_logistic(x, pairs.outcomes, use1, use2);
    const bool bad1 = use1 && theta[0] < 0.0;
    const bool bad2 = use2 && theta[1] < 0.0;
    if (!bad1 && !bad2) break;
    if (bad1) use1 = false;
    if (bad2) use2 = false;
  }
  BetaModel m;
  m.a = use1 ? theta[0] : 0.0;
  m.b = use2 ? theta[1] : 0.0;
  m.c0 = theta[2];
  return m;
}

double apply_beta(const BetaModel& m, double s) {
  const double t = std::clamp(s, kLogClip, 1.0 - kLogClip);
  return sigmoid(m.a * std::log(t) - m.b * std::log(1.0 - t) + m.c0);
}

// ---------------------------------------------------------------------------
// dispatch + one-vs-all
// ---------------------------------------------------------------------------

BinaryModel fit_binary(BinaryMethod method, const BinaryPairs& pairs) {
  switch (method) {
    case BinaryMethod::Identity: return IdentityModel{};
    case BinaryMethod::Temperature: return fit_binary_temperature(pairs);
    case BinaryMethod::Histogram: return fit_histogram(pairs, kHistogramMethodBins);
    case BinaryMethod::Isotonic: return fit_isotonic(pairs);
    case BinaryMethod::Beta: return fit_beta(pairs);
  }
  throw std::logic_error("unreachable");
}

double apply_binary(const BinaryModel& m, double s) {
  return std::visit(
      [&](const auto& model) -> double {
        using T = std::decay_t<decltype(model)>;
        if constexpr (std::is_same_v<T, IdentityModel>) {
          return clip_unit(s);
        } else if constexpr (std::is_same_v<T, TemperatureModel>) {
          return apply_binary_temperature(model, s);
        } else if constexpr (std::is_same_v<T, HistogramModel>) {
          return apply_histogram(model, s);
        } else if constexpr (std::is_same_v<T, IsotonicModel>) {
          return apply_isotonic(model, s);
        } else {
          return apply_beta(model, s);
        }
      },
      m);
}

OneVsAllModel fit_one_vs_all(BinaryMethod method, const PredictionDataset& ds) {
  std::vector<long> counts(ds.n_classes, 0);
  for (int y : ds.labels) counts[y - 1] += 1;
  for (int k = 0; k < ds.n_classes; ++k) {
    if (counts[k] < 2) {
      throw std::invalid_argument("one-vs-all fit needs every class at least twice; class " +
                                  std::to_string(k + 1) + " has " +
                                  std::to_string(counts[k]) + " samples");
    }
  }
  OneVsAllModel m;
  m.method = method;
  m.per_class.reserve(ds.n_classes);
  for (int k = 0; k < ds.n_classes; ++k) {
    std::vector<double> scores(ds.size());
    std::vector<int> outcomes(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
      scores[i] = ds.confidences[i][k];
      outcomes[i] = ds.labels[i] == k + 1 ? 1 : 0;
    }
    m.per_class.push_back(fit_binary(method, BinaryPairs(std::move(scores), std::move(outcomes))));
  }
  return m;
}

ConfidenceVector apply_one_vs_all(const OneVsAllModel& m, const ConfidenceVector& c) {
  if (m.per_class.size() != c.size()) {
    throw std::invalid_argument("one-vs-all model class count mismatch");
  }
  std::vector<double> out(c.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) {
    out[k] = clip_unit(apply_binary(m.per_class[k], c[k]));
    sum += out[k];
  }
  if (m.normalize) {
    if (sum <= 0.0) {
      std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(out.size()));
    } else {
      for (double& v : out) v /= sum;
    }
  }
  return ConfidenceVector(std::move(out));
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

json binary_to_json(const BinaryModel& m) {
  return std::visit(
      [](const auto& model) -> json {
        using T = std::decay_t<decltype(model)>;
        if constexpr (std::is_same_v<T, IdentityModel>) {
          return {{"method", "identity"}};
        } else if constexpr (std::is_same_v<T, TemperatureModel>) {
          return {{"method", "temperature"},
                  {"temperature", model.temperature},
                  {"argmax_preserving", model.argmax_preserving}};
        } else if constexpr (std::is_same_v<T, HistogramModel>) {
          return {{"method", "histogram"},
                  {"bin_edges", model.bin_edges},
                  {"bin_values", model.bin_values},
                  {"n_bins", model.n_bins}};
        } else if constexpr (std::is_same_v<T, IsotonicModel>) {
          return {{"method", "isotonic"},
                  {"breakpoints", model.breakpoints},
                  {"block_values", model.block_values}};
        } else {
          return {{"method", "beta"}, {"a", model.a}, {"b", model.b}, {"c0", model.c0}};
        }
      },
      m);
}

BinaryModel binary_from_json(const json& j) {
  const std::string method = j.at("method").get<std::string>();
  if (method == "identity") return IdentityModel{};
  if (method == "temperature") {
    TemperatureModel m;
    m.temperature = j.at("temperature").get<double>();
    m.argmax_preserving = j.value("argmax_preserving", false);
    return m;
  }
  if (method == "histogram") {
    HistogramModel m;
    m.bin_edges = j.at("bin_edges").get<std::vector<double>>();
    m.bin_values = j.at("bin_values").get<std::vector<double>>();
    m.n_bins = j.at("n_bins").get<int>();
    return m;
  }
  if (method == "isotonic") {
    IsotonicModel m;
    m.breakpoints = j.at("breakpoints").get<std::vector<double>>();
    m.block_values = j.at("block_values").get<std::vector<double>>();
    return m;
  }
  if (method == "beta") {
    BetaModel m;
    m.a = j.at("a").get<double>();
    m.b = j.at("b").get<double>();
    m.c0 = j.at("c0").get<double>();
    return m;
  }
  throw std::invalid_argument("unknown binary model method '" + method + "'");
}

}  // namespace calib
