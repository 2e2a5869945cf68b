#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "calib/calibrators.hpp"
#include "calib/dataset.hpp"
#include "calib/lenses.hpp"

namespace calib {

/// Fitted transformation of confidence vectors. Immutable after fit;
/// transform is deterministic and safe for concurrent use.
class Calibrator {
 public:
  virtual ~Calibrator() = default;
  virtual ConfidenceVector transform(const ConfidenceVector& c) const = 0;
  virtual nlohmann::json to_json() const = 0;

  /// Empirical lift-condition report; nullopt when no lift is involved.
  virtual std::optional<LiftReport> condition_report(const PredictionDataset&) const {
    return std::nullopt;
  }
};

using CalibratorPtr = std::unique_ptr<Calibrator>;
using CalibratorFactory = std::function<CalibratorPtr(const PredictionDataset&)>;

class IdentityCalibrator final : public Calibrator {
 public:
  ConfidenceVector transform(const ConfidenceVector& c) const override { return c; }
  nlohmann::json to_json() const override;
};

class TemperatureCalibrator final : public Calibrator {
 public:
  explicit TemperatureCalibrator(TemperatureModel m) : model_(m) {}
  ConfidenceVector transform(const ConfidenceVector& c) const override {
    return apply_temperature(model_, c);
  }
  nlohmann::json to_json() const override;
  const TemperatureModel& model() const { return model_; }

 private:
  TemperatureModel model_;
};

class OneVsAllCalibrator final : public Calibrator {
 public:
  explicit OneVsAllCalibrator(OneVsAllModel m) : model_(std::move(m)) {}
  ConfidenceVector transform(const ConfidenceVector& c) const override {
    return apply_one_vs_all(model_, c);
  }
  nlohmann::json to_json() const override;
  const OneVsAllModel& model() const { return model_; }

 private:
  OneVsAllModel model_;
};

/// Lens reduction + binary base method + the matching lift:
///   confidence / toplabel -> uniform-residual lift of the top entry,
///   sumk -> mass split over the top-k, topk -> per-rank values,
///   weighted (confidence only) -> residual split proportional to c.
/// The top-label base fits one binary model per predicted class, with a
/// model fitted on all reduced pairs backing sparse or unfittable classes.
/// The top-k base fits one binary model per rank position.
class ReducedCalibrator final : public Calibrator {
 public:
  /// argmax_preserving floors any fitted temperature base at T = 1, which
  /// puts every sample inside the confidence lens's condition set.
  static std::unique_ptr<ReducedCalibrator> fit(const LensKind& lens, BinaryMethod method,
                                                const PredictionDataset& ds, bool weighted,
                                                bool argmax_preserving = false);

  ConfidenceVector transform(const ConfidenceVector& c) const override;
  nlohmann::json to_json() const override;
  std::optional<LiftReport> condition_report(const PredictionDataset& ds) const override;

  /// The fitted reduced recalibrator r applied to one reduced sample.
  std::vector<double> reduced_apply(const ReducedSample& red) const;

  const LensKind& lens() const { return lens_; }
  bool weighted() const { return weighted_; }

  static std::unique_ptr<ReducedCalibrator> from_json(const nlohmann::json& j);

 private:
  ReducedCalibrator() = default;

  LensKind lens_;
  BinaryMethod method_ = BinaryMethod::Identity;
  bool weighted_ = false;
  std::vector<BinaryModel> base_;                    // 1 model, or k rank models
  std::vector<std::optional<BinaryModel>> per_class_;  // toplabel only
  std::optional<BinaryModel> fallback_;                // toplabel only
};

/// One calibrator per argmax sector; sectors with fewer than
/// min_sector_samples training points (or whose fit is degenerate) use the
/// fallback fitted on the full dataset.
class ClasswiseCalibrator final : public Calibrator {
 public:
  static std::unique_ptr<ClasswiseCalibrator> fit(const CalibratorFactory& base_factory,
                                                  const PredictionDataset& ds,
                                                  int min_sector_samples);

  ConfidenceVector transform(const ConfidenceVector& c) const override;
  nlohmann::json to_json() const override;
  std::optional<LiftReport> condition_report(const PredictionDataset& ds) const override;

  const Calibrator& sector_model(int sector) const;  // 1-based; fallback if unset
  bool sector_uses_fallback(int sector) const;

  static std::unique_ptr<ClasswiseCalibrator> from_json(const nlohmann::json& j);

 private:
  ClasswiseCalibrator() = default;

  std::vector<CalibratorPtr> sectors_;  // size K, null -> fallback
  CalibratorPtr fallback_;
  int min_sector_samples_ = 0;
};

inline constexpr int kDefaultMinSectorSamples = 50;

/// Baseline multiclass form of a method: native temperature scaling, or the
/// one-vs-all adapter for the binary methods.
CalibratorPtr fit_baseline(BinaryMethod method, const PredictionDataset& ds,
                           bool argmax_preserving = false);

CalibratorPtr fit_reduced(const LensKind& lens, BinaryMethod method,
                          const PredictionDataset& ds, bool weighted = false,
                          bool argmax_preserving = false);

CalibratorPtr fit_classwise(const CalibratorFactory& base_factory, const PredictionDataset& ds,
                            int min_sector_samples = kDefaultMinSectorSamples);

CalibratorPtr fit_classwise_reduced(const LensKind& lens, BinaryMethod method,
                                    const PredictionDataset& ds, bool weighted = false,
                                    int min_sector_samples = kDefaultMinSectorSamples,
                                    bool argmax_preserving = false);

/// Wrapper grammar: baseline | reduced | classwise | classwise-reduced |
/// weighted-reduced.
CalibratorPtr fit_calibrator(const std::string& method, const std::string& wrapper,
                             const LensKind& lens, const PredictionDataset& ds,
                             int min_sector_samples = kDefaultMinSectorSamples,
                             bool argmax_preserving = false);

const std::vector<std::string>& valid_wrappers();

CalibratorPtr calibrator_from_json(const nlohmann::json& j);
CalibratorPtr load_calibrator(const std::string& path);
void save_calibrator(const Calibrator& model, const std::string& path);

/// Transform every row; logits are dropped (they no longer match).
PredictionDataset transform_dataset(const Calibrator& model, const PredictionDataset& ds);

}  // namespace calib
