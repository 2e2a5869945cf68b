#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "calib/dataset.hpp"
#include "calib/metrics.hpp"
#include "calib/wrappers.hpp"

namespace {

const std::string kCli = CALIB_CLI_PATH;

int run(const std::string& args) {
  const std::string cmd = kCli + " " + args + " >/dev/null 2>/tmp/calib_cli_err.txt";
  return std::system(cmd.c_str());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Tmp {
  std::string path;
  explicit Tmp(const std::string& n) : path("/tmp/calib_cli_" + n) {}
  ~Tmp() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("generate / fit / apply / evaluate pipeline") {
  Tmp data("pipe.csv"), model("pipe_model.json"), out("pipe_out.csv"), metrics("pipe_m.json");
  REQUIRE(run("generate --dirichlet --n 3000 --k 5 --sharpen 0.6 --seed 3 --out " +
              data.path) == 0);

  REQUIRE(run("fit --dataset " + data.path +
              " --method histogram --wrapper reduced --out " + model.path) == 0);
  REQUIRE(run("apply --model " + model.path + " --dataset " + data.path + " --out " +
              out.path) == 0);
  REQUIRE(run("evaluate --dataset " + out.path + " --bins 15 --out " + metrics.path) == 0);

  // saved-then-loaded metrics equal the in-process ones
  const auto ds = calib::load_dataset(data.path);
  const auto cal = calib::load_calibrator(model.path);
  const auto transformed = calib::transform_dataset(*cal, ds);
  const auto reloaded = calib::load_dataset(out.path);
  const calib::BinningConfig cfg{15, calib::BinningScheme::EqualWidth, 1.0};
  const auto j = nlohmann::json::parse(read_file(metrics.path));
  CHECK(j.at("ece").get<double>() ==
        doctest::Approx(calib::binned_ece(transformed, cfg)).epsilon(1e-9));
  CHECK(j.at("cwece").get<double>() ==
        doctest::Approx(calib::classwise_ece(transformed, cfg).overall).epsilon(1e-9));
  CHECK(j.at("accuracy").get<double>() ==
        doctest::Approx(calib::accuracy(reloaded)).epsilon(1e-12));
}

TEST_CASE("generate writes logit datasets and implied remainder weights") {
  Tmp data("etf.csv");
  REQUIRE(run("generate --etf --n 500 --k 5 --weights 0.3,0.1,0.25,0.15 --radii 3 "
              "--noise 1 --seed 1 --logits --out " +
              data.path) == 0);
  const auto ds = calib::load_dataset(data.path);
  CHECK(ds.logits.has_value());
  CHECK(ds.n_classes == 5);
}

TEST_CASE("reliability emits the curve CSV") {
  Tmp data("rel.csv"), curve("curve.csv");
  REQUIRE(run("generate --dirichlet --n 800 --k 4 --seed 5 --out " + data.path) == 0);
  REQUIRE(run("reliability --dataset " + data.path + " --bins 10 --out " + curve.path) == 0);
  const std::string text = read_file(curve.path);
  CHECK(text.rfind("bin_lo,bin_hi,count,confidence,frequency,gap", 0) == 0);
}

TEST_CASE("benchmark runs and unknown names fail with usage errors") {
  Tmp data("bench.csv"), report("report.md");
  REQUIRE(run("generate --dirichlet --n 1500 --k 4 --sharpen 0.7 --seed 6 --out " +
              data.path) == 0);
  REQUIRE(run("benchmark --dataset " + data.path +
              " --methods histogram --wrappers baseline,reduced --folds 3 --bins 10 "
              "--format markdown --out " +
              report.path) == 0);
  CHECK(read_file(report.path).find("### ECE") != std::string::npos);

  CHECK(run("benchmark --dataset " + data.path + " --methods nope --wrappers baseline "
            "--folds 3 --out /tmp/calib_cli_x.md") != 0);
  const std::string err = read_file("/tmp/calib_cli_err.txt");
  CHECK(err.find("valid:") != std::string::npos);

  CHECK(run("fit --dataset " + data.path + " --method histogram --wrapper nope --out "
            "/tmp/calib_cli_y.json") != 0);
  CHECK(run("evaluate --dataset /tmp/does_not_exist.csv") != 0);
}

TEST_CASE("validation errors name the offending input") {
  Tmp bad("bad.csv");
  std::ofstream out(bad.path);
  out << "label,c1,c2\n1,0.6,0.4\n2,0.9,0.3\n";
  out.close();
  CHECK(run("evaluate --dataset " + bad.path) != 0);
  const std::string err = read_file("/tmp/calib_cli_err.txt");
  CHECK(err.find("row 2") != std::string::npos);
}
