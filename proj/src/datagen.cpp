#include "calib/datagen.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace calib {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t state = seed;
  const std::uint64_t a = splitmix64(state);
  state ^= 0xA3EC647659359ACDULL * (stream + 1);
  const std::uint64_t b = splitmix64(state);
  std::seed_seq seq{static_cast<unsigned>(a), static_cast<unsigned>(a >> 32),
                    static_cast<unsigned>(b), static_cast<unsigned>(b >> 32)};
  engine_.seed(seq);
}

std::uint64_t RandomStream::next_u64() { return engine_(); }

double RandomStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RandomStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double scale = std::sqrt(-2.0 * std::log(s) / s);
  spare_normal_ = v * scale;
  has_spare_ = true;
  return u * scale;
}

double RandomStream::gamma(double shape) {
  if (!(shape > 0.0)) throw std::invalid_argument("gamma shape must be > 0");
  if (shape < 1.0) {
    // boost: Gamma(a) = Gamma(a+1) * U^(1/a)
    const double u = uniform();
    return gamma(shape + 1.0) * std::pow(std::max(u, 1e-300), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

std::vector<double> RandomStream::dirichlet(const std::vector<double>& alpha) {
  std::vector<double> out(alpha.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    out[i] = gamma(alpha[i]);
    sum += out[i];
  }
  if (sum <= 0.0) {
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(out.size()));
    return out;
  }
  for (double& v : out) v /= sum;
  return out;
}

int RandomStream::categorical(const std::vector<double>& weights) {
  const double u = uniform();
  double cum = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    cum += weights[i];
    if (u < cum) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size()) - 1;
}

std::vector<int> RandomStream::permutation(int n) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(engine_() % static_cast<std::uint64_t>(i + 1));
    std::swap(idx[i], idx[j]);
  }
  return idx;
}

namespace {

void check_common(long n, int k) {
  if (n < 1) throw std::invalid_argument("generator needs n >= 1");
  if (k < 2) throw std::invalid_argument("generator needs K >= 2");
}

}  // namespace

PredictionDataset gen_dirichlet(const DirichletSpec& spec) {
  check_common(spec.n, spec.n_classes);
  if (static_cast<int>(spec.alpha.size()) != spec.n_classes) {
    throw std::invalid_argument("alpha must have K entries");
  }
  for (double a : spec.alpha) {
    if (!(a > 0.0)) throw std::invalid_argument("alpha entries must be > 0");
  }
  if (!(spec.sharpen_t > 0.0)) throw std::invalid_argument("sharpen_t must be > 0");

  RandomStream rng(spec.seed, 0);
  PredictionDataset ds;
  ds.n_classes = spec.n_classes;
  ds.labels.reserve(spec.n);
  ds.confidences.reserve(spec.n);
  std::vector<double> z(spec.n_classes);
  for (long i = 0; i < spec.n; ++i) {
    const std::vector<double> p = rng.dirichlet(spec.alpha);
    ds.labels.push_back(rng.categorical(p) + 1);
    for (int j = 0; j < spec.n_classes; ++j) {
      z[j] = std::log(clip_for_log(p[j])) / spec.sharpen_t;
    }
    ds.confidences.push_back(softmax(z));
  }
  return ds;
}

PredictionDataset gen_etf(const EtfSpec& spec) {
  check_common(spec.n, spec.n_classes);
  const int k = spec.n_classes;
  if (static_cast<int>(spec.class_weights.size()) != k) {
    throw std::invalid_argument("class_weights must have K entries");
  }
  double wsum = 0.0;
  for (double w : spec.class_weights) {
    if (w < 0.0) throw std::invalid_argument("class_weights must be nonnegative");
    wsum += w;
  }
  if (std::abs(wsum - 1.0) > 1e-9) {
    throw std::invalid_argument("class_weights must sum to 1, got " + std::to_string(wsum));
  }
  if (static_cast<int>(spec.radii.size()) != k) {
    throw std::invalid_argument("radii must have K entries");
  }
  for (double r : spec.radii) {
    if (!(r > 0.0)) throw std::invalid_argument("radii must be > 0");
  }
  if (spec.noise_sigma < 0.0) throw std::invalid_argument("noise_sigma must be >= 0");

  RandomStream rng(spec.seed, 0);
  PredictionDataset ds;
  ds.n_classes = k;
  ds.labels.reserve(spec.n);
  ds.confidences.reserve(spec.n);
  ds.logits = std::vector<std::vector<double>>{};
  ds.logits->reserve(spec.n);
  const double off_scale = -1.0 / (k - 1);
  for (long i = 0; i < spec.n; ++i) {
    const int y = rng.categorical(spec.class_weights);
    const double rho = spec.radii[y];
    std::vector<double> l(k);
    for (int j = 0; j < k; ++j) {
      l[j] = rho * (j == y ? 1.0 : off_scale) + 1.0 / k;
      if (spec.noise_sigma > 0.0) l[j] += spec.noise_sigma * rng.normal();
    }
    ds.labels.push_back(y + 1);
    ds.confidences.push_back(softmax(l));
    ds.logits->push_back(std::move(l));
  }
  return ds;
}

PredictionDataset generate_from_json(const nlohmann::json& spec) {
  const std::string type = spec.at("type").get<std::string>();
  const long n = spec.at("n").get<long>();
  const int k = spec.at("n_classes").get<int>();
  const std::uint64_t seed = spec.value("seed", 0ULL);

  const auto vector_field = [&](const char* name, double fallback) {
    std::vector<double> out(k, fallback);
    if (spec.contains(name)) {
      const auto& v = spec.at(name);
      if (v.is_number()) {
        std::fill(out.begin(), out.end(), v.get<double>());
      } else {
        out = v.get<std::vector<double>>();
      }
    }
    return out;
  };

  if (type == "dirichlet") {
    DirichletSpec d;
    d.n = n;
    d.n_classes = k;
    d.seed = seed;
    d.alpha = vector_field("alpha", 1.0);
    d.sharpen_t = spec.value("sharpen_t", 1.0);
    return gen_dirichlet(d);
  }
  if (type == "etf") {
    EtfSpec e;
    e.n = n;
    e.n_classes = k;
    e.seed = seed;
    e.class_weights = vector_field("class_weights", 1.0 / k);
    e.radii = vector_field("radii", 1.0);
    e.noise_sigma = spec.value("noise_sigma", 0.0);
    return gen_etf(e);
  }
  throw std::invalid_argument("unknown generator type '" + type +
                              "' (valid: dirichlet, etf)");
}

}  // namespace calib
