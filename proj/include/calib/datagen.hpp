#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <json.hpp>

#include "calib/dataset.hpp"

namespace calib {

/// Deterministic random stream addressed by (seed, stream index): the engine
/// is a std::mt19937_64 seeded through splitmix64, and all samplers are
/// implemented here so identical specs produce identical bytes regardless of
/// the standard library's distribution internals.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  double uniform();  // [0, 1)
  double normal();   // N(0, 1), Marsaglia polar
  double gamma(double shape);  // Marsaglia-Tsang, any shape > 0
  std::vector<double> dirichlet(const std::vector<double>& alpha);
  int categorical(const std::vector<double>& weights);  // 0-based index

  /// Fisher-Yates shuffle of the index range [0, n).
  std::vector<int> permutation(int n);

 private:
  std::mt19937_64 engine_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t& state);

/// Draw p ~ Dirichlet(alpha), y ~ Cat(p), emit c = softmax(log(p)/sharpen_t).
/// sharpen_t = 1 leaves c = p (strongly calibrated by construction); t < 1
/// sharpens toward the vertices (overconfident), t > 1 flattens.
struct DirichletSpec {
  long n = 0;
  int n_classes = 0;
  std::vector<double> alpha;  // size K, entries > 0
  double sharpen_t = 1.0;
  std::uint64_t seed = 0;
};

/// Draw y ~ Cat(class_weights) and build the logit vector
///   radii_y * (e_y - 1/(K-1) sum_{j != y} e_j) + 1/K * sum_j e_j + noise,
/// with isotropic Gaussian noise per coordinate. Logits are stored.
struct EtfSpec {
  long n = 0;
  int n_classes = 0;
  std::vector<double> class_weights;  // size K, sums to 1
  std::vector<double> radii;          // size K, entries > 0
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

PredictionDataset gen_dirichlet(const DirichletSpec& spec);
PredictionDataset gen_etf(const EtfSpec& spec);

/// JSON spec: {"type": "dirichlet"|"etf", ...fields as in the structs}.
/// Scalar "alpha"/"radii" entries broadcast to all classes; omitted
/// "class_weights" means uniform.
PredictionDataset generate_from_json(const nlohmann::json& spec);

}  // namespace calib
