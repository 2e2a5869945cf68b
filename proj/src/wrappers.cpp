#include "calib/wrappers.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace calib {

using nlohmann::json;

json IdentityCalibrator::to_json() const { return {{"type", "identity"}}; }

json TemperatureCalibrator::to_json() const {
  return {{"type", "temperature"},
          {"temperature", model_.temperature},
          {"argmax_preserving", model_.argmax_preserving}};
}

json OneVsAllCalibrator::to_json() const {
  json models = json::array();
  for (const auto& m : model_.per_class) models.push_back(binary_to_json(m));
  return {{"type", "one_vs_all"},
          {"method", binary_method_str(model_.method)},
          {"normalize", model_.normalize},
          {"models", std::move(models)}};
}

// ---------------------------------------------------------------------------
// ReducedCalibrator
// ---------------------------------------------------------------------------

namespace {

BinaryPairs scalar_pairs(const std::vector<ReducedSample>& reds) {
  std::vector<double> scores;
  std::vector<int> outcomes;
  scores.reserve(reds.size());
  outcomes.reserve(reds.size());
  for (const auto& r : reds) {
    scores.push_back(r.reduced_confidence[0]);
    outcomes.push_back(r.reduced_label == 0 ? 0 : 1);
  }
  return BinaryPairs(std::move(scores), std::move(outcomes));
}

BinaryModel fit_base(BinaryMethod method, const BinaryPairs& pairs, bool argmax_preserving) {
  BinaryModel m = fit_binary(method, pairs);
  if (argmax_preserving) {
    if (auto* t = std::get_if<TemperatureModel>(&m)) {
      t->temperature = std::max(1.0, t->temperature);
      t->argmax_preserving = true;
    }
  }
  return m;
}

}  // namespace

std::unique_ptr<ReducedCalibrator> ReducedCalibrator::fit(const LensKind& lens,
                                                          BinaryMethod method,
                                                          const PredictionDataset& ds,
                                                          bool weighted,
                                                          bool argmax_preserving) {
  lens.validate(ds.n_classes);
  if (weighted && lens.type != LensType::Confidence) {
    throw std::invalid_argument("weighted lift requires the confidence lens, got " +
                                lens.str());
  }
  std::vector<ReducedSample> reds;
  reds.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    reds.push_back(apply_lens(lens, ds.labels[i], ds.confidences[i]));
  }

  auto out = std::unique_ptr<ReducedCalibrator>(new ReducedCalibrator());
  out->lens_ = lens;
  out->method_ = method;
  out->weighted_ = weighted;

  switch (lens.type) {
    case LensType::Confidence:
    case LensType::SumK:
      out->base_.push_back(fit_base(method, scalar_pairs(reds), argmax_preserving));
      break;
    case LensType::TopK: {
      // one binary problem per rank position: outcome 1{label == rank j}
      for (int j = 0; j < lens.k; ++j) {
        std::vector<double> scores(reds.size());
        std::vector<int> outcomes(reds.size());
        for (std::size_t i = 0; i < reds.size(); ++i) {
          scores[i] = reds[i].reduced_confidence[j];
          outcomes[i] = reds[i].reduced_label == j + 1 ? 1 : 0;
        }
        out->base_.push_back(fit_base(
            method, BinaryPairs(std::move(scores), std::move(outcomes)), argmax_preserving));
      }
      break;
    }
    case LensType::TopLabel: {
      out->fallback_ = fit_base(method, scalar_pairs(reds), argmax_preserving);
      out->per_class_.resize(ds.n_classes);
      for (int k = 1; k <= ds.n_classes; ++k) {
        std::vector<ReducedSample> group;
        for (const auto& r : reds) {
          if (*r.aux_class == k) group.push_back(r);
        }
        if (group.size() < 2) continue;
        try {
          out->per_class_[k - 1] = fit_base(method, scalar_pairs(group), argmax_preserving);
        } catch (const std::exception&) {
          // degenerate group (e.g. single outcome value): keep the fallback
        }
      }
      break;
    }
  }
  return out;
}

std::vector<double> ReducedCalibrator::reduced_apply(const ReducedSample& red) const {
  switch (lens_.type) {
    case LensType::Confidence:
    case LensType::SumK:
      return {apply_binary(base_[0], red.reduced_confidence[0])};
    case LensType::TopK: {
      std::vector<double> out(base_.size());
      for (std::size_t j = 0; j < base_.size(); ++j) {
        out[j] = apply_binary(base_[j], red.reduced_confidence[j]);
      }
      return out;
    }
    case LensType::TopLabel: {
      const auto& m = per_class_[*red.aux_class - 1];
      return {apply_binary(m ? *m : *fallback_, red.reduced_confidence[0])};
    }
  }
  throw std::logic_error("unreachable");
}

ConfidenceVector ReducedCalibrator::transform(const ConfidenceVector& c) const {
  switch (lens_.type) {
    case LensType::Confidence: {
      const ScalarMap r = [&](double s) { return apply_binary(base_[0], s); };
      return weighted_ ? lift_weighted(r, c) : lift_confidence(r, c);
    }
    case LensType::SumK:
      return lift_sumk(lens_.k, [&](double s) { return apply_binary(base_[0], s); }, c);
    case LensType::TopK:
      return lift_topk(
          lens_.k,
          [&](const std::vector<double>& top) {
            std::vector<double> out(top.size());
            for (std::size_t j = 0; j < top.size(); ++j) {
              out[j] = apply_binary(base_[j], top[j]);
            }
            return out;
          },
          c);
    case LensType::TopLabel: {
      const int a = argmax_tiebreak(c);
      const auto& m = per_class_[a - 1];
      const BinaryModel& model = m ? *m : *fallback_;
      return lift_confidence([&](double s) { return apply_binary(model, s); }, c);
    }
  }
  throw std::logic_error("unreachable");
}

std::optional<LiftReport> ReducedCalibrator::condition_report(
    const PredictionDataset& ds) const {
  return condition_mass(lens_, weighted_,
                        [this](const ReducedSample& r) { return reduced_apply(r); }, ds);
}

json ReducedCalibrator::to_json() const {
  json j{{"type", "reduced"},
         {"lens", lens_.str()},
         {"method", binary_method_str(method_)},
         {"weighted", weighted_}};
  if (lens_.type == LensType::TopLabel) {
    json per_class = json::array();
    for (const auto& m : per_class_) {
      per_class.push_back(m ? binary_to_json(*m) : json(nullptr));
    }
    j["per_class"] = std::move(per_class);
    j["fallback"] = binary_to_json(*fallback_);
  } else {
    json base = json::array();
    for (const auto& m : base_) base.push_back(binary_to_json(m));
    j["base"] = std::move(base);
  }
  return j;
}

std::unique_ptr<ReducedCalibrator> ReducedCalibrator::from_json(const json& j) {
  auto out = std::unique_ptr<ReducedCalibrator>(new ReducedCalibrator());
  out->lens_ = LensKind::parse(j.at("lens").get<std::string>());
  out->method_ = parse_binary_method(j.at("method").get<std::string>());
  out->weighted_ = j.value("weighted", false);
  if (out->lens_.type == LensType::TopLabel) {
    for (const auto& m : j.at("per_class")) {
      if (m.is_null()) {
        out->per_class_.emplace_back(std::nullopt);
      } else {
        out->per_class_.emplace_back(binary_from_json(m));
      }
    }
    out->fallback_ = binary_from_json(j.at("fallback"));
  } else {
    for (const auto& m : j.at("base")) out->base_.push_back(binary_from_json(m));
  }
  return out;
}

// ---------------------------------------------------------------------------
// ClasswiseCalibrator
// ---------------------------------------------------------------------------

std::unique_ptr<ClasswiseCalibrator> ClasswiseCalibrator::fit(
    const CalibratorFactory& base_factory, const PredictionDataset& ds,
    int min_sector_samples) {
  auto out = std::unique_ptr<ClasswiseCalibrator>(new ClasswiseCalibrator());
  out->min_sector_samples_ = min_sector_samples;
  out->fallback_ = base_factory(ds);
  out->sectors_.resize(ds.n_classes);

  std::vector<std::vector<int>> sector_rows(ds.n_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    sector_rows[argmax_tiebreak(ds.confidences[i]) - 1].push_back(static_cast<int>(i));
  }
  for (int k = 0; k < ds.n_classes; ++k) {
    if (static_cast<int>(sector_rows[k].size()) < min_sector_samples) continue;
    try {
      out->sectors_[k] = base_factory(ds.subset(sector_rows[k]));
    } catch (const std::exception&) {
      // sector not fittable with this method (e.g. single label): use fallback
    }
  }
  return out;
}

const Calibrator& ClasswiseCalibrator::sector_model(int sector) const {
  const auto& m = sectors_.at(sector - 1);
  return m ? *m : *fallback_;
}

bool ClasswiseCalibrator::sector_uses_fallback(int sector) const {
  return sectors_.at(sector - 1) == nullptr;
}

ConfidenceVector ClasswiseCalibrator::transform(const ConfidenceVector& c) const {
  return sector_model(argmax_tiebreak(c)).transform(c);
}

std::optional<LiftReport> ClasswiseCalibrator::condition_report(
    const PredictionDataset& ds) const {
  std::vector<std::vector<int>> sector_rows(sectors_.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    sector_rows[argmax_tiebreak(ds.confidences[i]) - 1].push_back(static_cast<int>(i));
  }
  LiftReport merged;
  for (std::size_t k = 0; k < sectors_.size(); ++k) {
    if (sector_rows[k].empty()) continue;
    const auto sub = sector_model(static_cast<int>(k) + 1)
                         .condition_report(ds.subset(sector_rows[k]));
    if (!sub) return std::nullopt;
    for (int local : sub->violating_indices) {
      merged.violating_indices.push_back(sector_rows[k][local]);
    }
  }
  std::sort(merged.violating_indices.begin(), merged.violating_indices.end());
  merged.condition_mass = 1.0 - static_cast<double>(merged.violating_indices.size()) /
                                    static_cast<double>(ds.size());
  return merged;
}

json ClasswiseCalibrator::to_json() const {
  json sectors = json::array();
  for (const auto& m : sectors_) sectors.push_back(m ? m->to_json() : json(nullptr));
  return {{"type", "classwise"},
          {"min_sector_samples", min_sector_samples_},
          {"sectors", std::move(sectors)},
          {"fallback", fallback_->to_json()}};
}

std::unique_ptr<ClasswiseCalibrator> ClasswiseCalibrator::from_json(const json& j) {
  auto out = std::unique_ptr<ClasswiseCalibrator>(new ClasswiseCalibrator());
  out->min_sector_samples_ = j.at("min_sector_samples").get<int>();
  out->fallback_ = calibrator_from_json(j.at("fallback"));
  for (const auto& m : j.at("sectors")) {
    out->sectors_.push_back(m.is_null() ? nullptr : calibrator_from_json(m));
  }
  return out;
}

// ---------------------------------------------------------------------------
// factories
// ---------------------------------------------------------------------------

CalibratorPtr fit_baseline(BinaryMethod method, const PredictionDataset& ds,
                           bool argmax_preserving) {
  switch (method) {
    case BinaryMethod::Identity:
      return std::make_unique<IdentityCalibrator>();
    case BinaryMethod::Temperature:
      return std::make_unique<TemperatureCalibrator>(fit_temperature(ds, argmax_preserving));
    default:
      return std::make_unique<OneVsAllCalibrator>(fit_one_vs_all(method, ds));
  }
}

CalibratorPtr fit_reduced(const LensKind& lens, BinaryMethod method,
                          const PredictionDataset& ds, bool weighted,
                          bool argmax_preserving) {
  return ReducedCalibrator::fit(lens, method, ds, weighted, argmax_preserving);
}

CalibratorPtr fit_classwise(const CalibratorFactory& base_factory, const PredictionDataset& ds,
                            int min_sector_samples) {
  return ClasswiseCalibrator::fit(base_factory, ds, min_sector_samples);
}

CalibratorPtr fit_classwise_reduced(const LensKind& lens, BinaryMethod method,
                                    const PredictionDataset& ds, bool weighted,
                                    int min_sector_samples, bool argmax_preserving) {
  return ClasswiseCalibrator::fit(
      [&](const PredictionDataset& part) {
        return ReducedCalibrator::fit(lens, method, part, weighted, argmax_preserving);
      },
      ds, min_sector_samples);
}

const std::vector<std::string>& valid_wrappers() {
  static const std::vector<std::string> names = {
      "baseline", "reduced", "classwise", "classwise-reduced", "weighted-reduced"};
  return names;
}

CalibratorPtr fit_calibrator(const std::string& method, const std::string& wrapper,
                             const LensKind& lens, const PredictionDataset& ds,
                             int min_sector_samples, bool argmax_preserving) {
  const BinaryMethod m = parse_binary_method(method);
  if (wrapper == "baseline") return fit_baseline(m, ds, argmax_preserving);
  if (wrapper == "reduced") return fit_reduced(lens, m, ds, false, argmax_preserving);
  if (wrapper == "weighted-reduced") return fit_reduced(lens, m, ds, true, argmax_preserving);
  if (wrapper == "classwise") {
    return fit_classwise(
        [m, argmax_preserving](const PredictionDataset& part) {
          return fit_baseline(m, part, argmax_preserving);
        },
        ds, min_sector_samples);
  }
  if (wrapper == "classwise-reduced") {
    return fit_classwise_reduced(lens, m, ds, false, min_sector_samples, argmax_preserving);
  }
  std::string valid;
  for (const auto& w : valid_wrappers()) valid += (valid.empty() ? "" : ", ") + w;
  throw std::invalid_argument("unknown wrapper '" + wrapper + "' (valid: " + valid + ")");
}

CalibratorPtr calibrator_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "identity") return std::make_unique<IdentityCalibrator>();
  if (type == "temperature") {
    TemperatureModel m;
    m.temperature = j.at("temperature").get<double>();
    m.argmax_preserving = j.value("argmax_preserving", false);
    return std::make_unique<TemperatureCalibrator>(m);
  }
  if (type == "one_vs_all") {
    OneVsAllModel m;
    m.method = parse_binary_method(j.at("method").get<std::string>());
    m.normalize = j.value("normalize", true);
    for (const auto& sub : j.at("models")) m.per_class.push_back(binary_from_json(sub));
    return std::make_unique<OneVsAllCalibrator>(std::move(m));
  }
  if (type == "reduced") return ReducedCalibrator::from_json(j);
  if (type == "classwise") return ClasswiseCalibrator::from_json(j);
  throw std::invalid_argument("unknown calibrator type '" + type + "'");
}

CalibratorPtr load_calibrator(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open model file: " + path);
  return calibrator_from_json(json::parse(in));
}

void save_calibrator(const Calibrator& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write model file: " + path);
  out << model.to_json().dump(2) << '\n';
}

PredictionDataset transform_dataset(const Calibrator& model, const PredictionDataset& ds) {
  PredictionDataset out;
  out.n_classes = ds.n_classes;
  out.labels = ds.labels;
  out.confidences.reserve(ds.size());
  for (const auto& c : ds.confidences) out.confidences.push_back(model.transform(c));
  return out;
}

}  // namespace calib
