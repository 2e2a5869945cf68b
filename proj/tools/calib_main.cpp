#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "calib/bench.hpp"
#include "calib/datagen.hpp"
#include "calib/metrics.hpp"
#include "calib/wrappers.hpp"

namespace {

using nlohmann::json;

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
  return out;
}

std::vector<std::string> split_names(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

double parse_norm(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  const double p = std::stod(s);
  if (!(p >= 1.0)) throw std::invalid_argument("--norm must be >= 1 or 'inf'");
  return p;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write output file: " + path);
  out << text;
}

json metrics_json(const calib::PredictionDataset& ds, const calib::BinningConfig& cfg) {
  json j;
  j["n_samples"] = ds.size();
  j["n_classes"] = ds.n_classes;
  j["bins"] = cfg.n_bins;
  j["scheme"] = calib::scheme_str(cfg.scheme);
  j["p_norm"] = std::isinf(cfg.p_norm) ? json("inf") : json(cfg.p_norm);
  j["accuracy"] = calib::accuracy(ds);
  j["nll"] = calib::nll(ds);
  j["ece"] = calib::binned_ece(ds, cfg);
  calib::BinningConfig l2 = cfg;
  l2.p_norm = 2.0;
  j["ece_l2"] = calib::binned_ece(ds, l2);
  j["debiased_ece_l2"] = calib::debiased_ece(ds, l2);
  const calib::ClasswiseEce cw = calib::classwise_ece(ds, cfg);
  j["cwece"] = cw.overall;
  j["per_class_cwece"] = cw.per_class;
  const calib::OverconfidenceBoundReport l2r = calib::overconfidence_bound_check(ds, cfg);
  j["overconfidence_bound"] = {{"ece", l2r.ece},
                 {"slack", l2r.slack},
                 {"overconfident_mass", l2r.overconfident_mass},
                 {"accuracy_over", l2r.accuracy_over},
                 {"bound", l2r.bound},
                 {"holds", l2r.holds},
                 {"underconfident_mass", l2r.underconfident_mass},
                 {"accuracy_under", l2r.accuracy_under},
                 {"bound_under", l2r.bound_under},
                 {"holds_under", l2r.holds_under}};
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"calib - classifier calibration toolkit"};
  app.require_subcommand(1);

  // ---- generate ----
  auto* gen = app.add_subcommand("generate", "Generate a synthetic prediction dataset");
  bool gen_etf = false, gen_dirichlet = false, gen_write_logits = false;
  std::string gen_spec_path, gen_out;
  long gen_n = 10000;
  int gen_k = 5;
  std::uint64_t gen_seed = 0;
  double gen_sharpen = 1.0, gen_noise = 0.0;
  std::string gen_alpha = "1", gen_weights, gen_radii = "3";
  gen->add_flag("--etf", gen_etf, "neural-collapse ETF logit generator");
  gen->add_flag("--dirichlet", gen_dirichlet, "Dirichlet-sharpening generator");
  gen->add_option("--spec", gen_spec_path, "JSON generator spec file");
  gen->add_option("--n", gen_n, "number of samples");
  gen->add_option("--k", gen_k, "number of classes");
  gen->add_option("--seed", gen_seed, "random seed");
  gen->add_option("--alpha", gen_alpha, "Dirichlet concentration (scalar or comma list)");
  gen->add_option("--sharpen", gen_sharpen,
                  "sharpening t: 1 calibrated, <1 overconfident, >1 underconfident");
  gen->add_option("--weights", gen_weights,
                  "class weights (comma list; K-1 entries imply the remainder)");
  gen->add_option("--radii", gen_radii, "ETF radii (scalar or comma list)");
  gen->add_option("--noise", gen_noise, "ETF logit noise sigma");
  gen->add_flag("--logits", gen_write_logits, "write the logits CSV variant");
  gen->add_option("--out", gen_out, "output dataset path (.csv or .json)")->required();

  // ---- fit ----
  auto* fit = app.add_subcommand("fit", "Fit a calibrator and save it as JSON");
  std::string fit_dataset, fit_method, fit_wrapper = "baseline", fit_lens = "confidence",
              fit_out;
  int fit_min_sector = calib::kDefaultMinSectorSamples;
  bool fit_argmax_preserving = false;
  fit->add_option("--dataset", fit_dataset, "training dataset")->required();
  fit->add_option("--method", fit_method,
                  "temperature | histogram | isotonic | beta | identity")
      ->required();
  fit->add_option("--wrapper", fit_wrapper,
                  "baseline | reduced | classwise | classwise-reduced | weighted-reduced");
  fit->add_option("--lens", fit_lens, "confidence | topk:<k> | sumk:<k> | toplabel");
  fit->add_option("--min-sector-samples", fit_min_sector,
                  "class-wise sectors below this use the global fallback");
  fit->add_flag("--argmax-preserving", fit_argmax_preserving,
                "floor fitted temperatures at 1");
  fit->add_option("--out", fit_out, "output model path")->required();

  // ---- apply ----
  auto* apply = app.add_subcommand("apply", "Recalibrate a dataset with a saved model");
  std::string apply_model, apply_dataset, apply_out;
  apply->add_option("--model", apply_model, "model JSON from `fit`")->required();
  apply->add_option("--dataset", apply_dataset, "dataset to transform")->required();
  apply->add_option("--out", apply_out, "output dataset path")->required();

  // ---- evaluate ----
  auto* eval = app.add_subcommand("evaluate", "Compute calibration metrics for a dataset");
  std::string eval_dataset, eval_out, eval_scheme = "equal-width", eval_norm = "1";
  int eval_bins = 25;
  eval->add_option("--dataset", eval_dataset, "dataset to score")->required();
  eval->add_option("--bins", eval_bins, "number of estimator bins");
  eval->add_option("--scheme", eval_scheme, "equal-width | equal-mass");
  eval->add_option("--norm", eval_norm, "p-norm (>= 1, or 'inf')");
  eval->add_option("--out", eval_out, "output path (default stdout)");

  // ---- reliability ----
  auto* rel = app.add_subcommand("reliability", "Write the reliability curve as CSV");
  std::string rel_dataset, rel_out, rel_scheme = "equal-width";
  int rel_bins = 25;
  rel->add_option("--dataset", rel_dataset, "dataset to bin")->required();
  rel->add_option("--bins", rel_bins, "number of bins");
  rel->add_option("--scheme", rel_scheme, "equal-width | equal-mass");
  rel->add_option("--out", rel_out, "output path (default stdout)");

  // ---- benchmark ----
  auto* bench = app.add_subcommand(
      "benchmark", "Cross-validated comparison of methods and wrappers");
  std::string bench_dataset, bench_generate, bench_methods = "temperature,histogram,isotonic,beta",
              bench_wrappers = "baseline,reduced,classwise,classwise-reduced",
              bench_lens = "confidence", bench_scheme = "equal-width", bench_norm = "1",
              bench_format = "markdown", bench_out;
  int bench_folds = 6, bench_bins = 25,
      bench_min_sector = calib::kDefaultMinSectorSamples;
  std::uint64_t bench_seed = 0;
  bool bench_cifar = false, bench_argmax_preserving = false;
  bench->add_option("--dataset", bench_dataset, "dataset file to benchmark on");
  bench->add_option("--generate", bench_generate, "JSON generator spec to benchmark on");
  bench->add_option("--methods", bench_methods, "comma list of methods");
  bench->add_option("--wrappers", bench_wrappers, "comma list of wrappers");
  bench->add_option("--lens", bench_lens, "lens for the reduced wrappers");
  bench->add_option("--folds", bench_folds, "cross-validation folds");
  bench->add_option("--bins", bench_bins, "metric estimator bins");
  bench->add_option("--scheme", bench_scheme, "equal-width | equal-mass");
  bench->add_option("--norm", bench_norm, "p-norm (>= 1, or 'inf')");
  bench->add_option("--seed", bench_seed, "fold-split seed");
  bench->add_option("--min-sector-samples", bench_min_sector,
                    "class-wise sectors below this use the global fallback");
  bench->add_flag("--argmax-preserving", bench_argmax_preserving,
                  "floor fitted temperatures at 1");
  bench->add_flag("--cifar-style", bench_cifar, "preset: 4 folds, 20 bins");
  bench->add_option("--format", bench_format, "csv | json | markdown");
  bench->add_option("--out", bench_out, "output path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      calib::PredictionDataset ds;
      if (!gen_spec_path.empty()) {
        std::ifstream in(gen_spec_path);
        if (!in) throw std::invalid_argument("cannot open spec file: " + gen_spec_path);
        ds = calib::generate_from_json(json::parse(in));
      } else if (gen_etf == gen_dirichlet) {
        throw std::invalid_argument("pick exactly one of --etf / --dirichlet (or --spec)");
      } else if (gen_dirichlet) {
        calib::DirichletSpec spec;
        spec.n = gen_n;
        spec.n_classes = gen_k;
        spec.seed = gen_seed;
        spec.sharpen_t = gen_sharpen;
        auto alpha = parse_list(gen_alpha);
        if (alpha.size() == 1) alpha.assign(gen_k, alpha[0]);
        spec.alpha = alpha;
        ds = calib::gen_dirichlet(spec);
      } else {
        calib::EtfSpec spec;
        spec.n = gen_n;
        spec.n_classes = gen_k;
        spec.seed = gen_seed;
        spec.noise_sigma = gen_noise;
        auto radii = parse_list(gen_radii);
        if (radii.size() == 1) radii.assign(gen_k, radii[0]);
        spec.radii = radii;
        if (gen_weights.empty()) {
          spec.class_weights.assign(gen_k, 1.0 / gen_k);
        } else {
          auto w = parse_list(gen_weights);
          if (static_cast<int>(w.size()) == gen_k - 1) {
            double sum = 0.0;
            for (double v : w) sum += v;
            w.push_back(1.0 - sum);  // implied remainder
          }
          spec.class_weights = w;
        }
        ds = calib::gen_etf(spec);
      }
      calib::save_dataset(ds, gen_out,
                          gen_write_logits ? calib::DatasetFormat::CsvLogits
                                           : calib::DatasetFormat::Auto);
      return 0;
    }

    if (fit->parsed()) {
      const auto ds = calib::load_dataset(fit_dataset);
      const auto model =
          calib::fit_calibrator(fit_method, fit_wrapper, calib::LensKind::parse(fit_lens),
                                ds, fit_min_sector, fit_argmax_preserving);
      calib::save_calibrator(*model, fit_out);
      return 0;
    }

    if (apply->parsed()) {
      const auto model = calib::load_calibrator(apply_model);
      const auto ds = calib::load_dataset(apply_dataset);
      calib::save_dataset(calib::transform_dataset(*model, ds), apply_out);
      return 0;
    }

    if (eval->parsed()) {
      const auto ds = calib::load_dataset(eval_dataset);
      calib::BinningConfig cfg{eval_bins, calib::parse_scheme(eval_scheme),
                               parse_norm(eval_norm)};
      write_text(eval_out, metrics_json(ds, cfg).dump(2) + "\n");
      return 0;
    }

    if (rel->parsed()) {
      const auto ds = calib::load_dataset(rel_dataset);
      calib::BinningConfig cfg{rel_bins, calib::parse_scheme(rel_scheme), 1.0};
      write_text(rel_out, calib::reliability_csv(calib::reliability_curve(ds, cfg)));
      return 0;
    }

    if (bench->parsed()) {
      if (bench_dataset.empty() == bench_generate.empty()) {
        throw std::invalid_argument("pick exactly one of --dataset / --generate");
      }
      calib::PredictionDataset ds;
      if (!bench_dataset.empty()) {
        ds = calib::load_dataset(bench_dataset);
      } else {
        std::ifstream in(bench_generate);
        if (!in) throw std::invalid_argument("cannot open spec file: " + bench_generate);
        ds = calib::generate_from_json(json::parse(in));
      }
      calib::BenchmarkSpec spec;
      spec.methods = split_names(bench_methods);
      spec.wrappers = split_names(bench_wrappers);
      spec.lens = calib::LensKind::parse(bench_lens);
      spec.folds = bench_cifar ? 4 : bench_folds;
      spec.binning = calib::BinningConfig{bench_cifar ? 20 : bench_bins,
                                          calib::parse_scheme(bench_scheme),
                                          parse_norm(bench_norm)};
      spec.seed = bench_seed;
      spec.min_sector_samples = bench_min_sector;
      spec.argmax_preserving = bench_argmax_preserving;
      const auto report = calib::cross_validate(ds, spec);
      write_text(bench_out,
                 calib::render_report(report, calib::parse_report_format(bench_format)));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
