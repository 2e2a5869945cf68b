#pragma once

#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "calib/binning.hpp"
#include "calib/dataset.hpp"
#include "calib/simplex.hpp"

namespace calib {

enum class BinaryMethod { Identity, Temperature, Histogram, Isotonic, Beta };

/// CLI grammar: temperature | histogram | isotonic | beta | identity.
BinaryMethod parse_binary_method(const std::string& s);
std::string binary_method_str(BinaryMethod m);

// Number of bins the histogram-binning recalibration method fits with,
// independent of the number of bins used to estimate calibration errors.
inline constexpr int kHistogramMethodBins = 20;

struct IdentityModel {};

/// softmax(log(c)/T). T > 0; the argmax-preserving fit floors T at 1.
struct TemperatureModel {
  double temperature = 1.0;
  bool argmax_preserving = false;
};

struct HistogramModel {
  std::vector<double> bin_edges;   // ascending, first 0, last 1
  std::vector<double> bin_values;  // one per bin, in [0,1]
  int n_bins = 0;
};

struct IsotonicModel {
  std::vector<double> breakpoints;   // ascending left block endpoints
  std::vector<double> block_values;  // nondecreasing, in [0,1]
};

/// sigmoid(a ln s - b ln(1-s) + c0); a, b >= 0 keeps the map monotone.
struct BetaModel {
  double a = 1.0;
  double b = 1.0;
  double c0 = 0.0;
};

using BinaryModel =
    std::variant<IdentityModel, TemperatureModel, HistogramModel, IsotonicModel, BetaModel>;

/// Minimizes the mean negative log-likelihood of softmax(log(c)/T) over T by
/// golden-section search on log T in [-6, 6] (bracket width < 1e-6). Uses the
/// stored logits directly when present. Throws when fewer than two distinct
/// labels occur.
TemperatureModel fit_temperature(const PredictionDataset& ds,
                                 bool argmax_preserving = false);
ConfidenceVector apply_temperature(const TemperatureModel& m, const ConfidenceVector& c);
std::vector<double> apply_temperature_logits(const TemperatureModel& m,
                                             const std::vector<double>& logits);
/// Mean NLL of softmax(log(c)/T); exposed so searches and oracles share one loss.
double temperature_nll(const PredictionDataset& ds, double temperature);

/// Per-bin mean outcome; empty bins fall back to the bin-center score.
HistogramModel fit_histogram(const BinaryPairs& pairs, int n_bins,
                             BinningScheme scheme = BinningScheme::EqualWidth);
double apply_histogram(const HistogramModel& m, double s);

/// Weighted PAVA after merging duplicate scores. Apply is a right-continuous
/// step function; scores below the first breakpoint map to the first value.
IsotonicModel fit_isotonic(const BinaryPairs& pairs);
double apply_isotonic(const IsotonicModel& m, double s);

/// Logistic fit on (ln s, -ln(1-s)) by Newton iteration to gradient norm
/// < 1e-8; negative coefficients are clamped to 0 and the rest refitted.
/// Throws when only one outcome value is present.
BetaModel fit_beta(const BinaryPairs& pairs);
double apply_beta(const BetaModel& m, double s);

/// Temperature scaling of the two-class problem (s, 1-s).
TemperatureModel fit_binary_temperature(const BinaryPairs& pairs);
double apply_binary_temperature(const TemperatureModel& m, double s);

BinaryModel fit_binary(BinaryMethod method, const BinaryPairs& pairs);
double apply_binary(const BinaryModel& m, double s);

/// One binary model per class, fitted on (c_k, 1{y = k}); apply maps each
/// coordinate through its model and renormalizes (uniform if all zero).
/// Requires every class to appear at least twice.
struct OneVsAllModel {
  BinaryMethod method = BinaryMethod::Identity;
  bool normalize = true;
  std::vector<BinaryModel> per_class;
};

OneVsAllModel fit_one_vs_all(BinaryMethod method, const PredictionDataset& ds);
ConfidenceVector apply_one_vs_all(const OneVsAllModel& m, const ConfidenceVector& c);

nlohmann::json binary_to_json(const BinaryModel& m);
BinaryModel binary_from_json(const nlohmann::json& j);

}  // namespace calib
