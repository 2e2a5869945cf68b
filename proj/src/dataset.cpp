#include "calib/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include <json.hpp>

namespace calib {

namespace {

using nlohmann::json;

void fail(const std::string& msg) { throw std::invalid_argument(msg); }

double parse_double(const std::string& tok, std::size_t row) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) {
    fail("row " + std::to_string(row) + ": cannot parse number '" + tok + "'");
  }
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string tok;
  std::stringstream ss(line);
  while (std::getline(ss, tok, ',')) out.push_back(tok);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Renormalize a row to sum exactly 1, validating tolerance first.
std::vector<double> checked_row(std::vector<double> vals, std::size_t row) {
  double sum = 0.0;
  for (double v : vals) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0 + kSimplexTol) {
      fail("row " + std::to_string(row) + ": confidence " + std::to_string(v) +
           " outside [0, 1]");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > kSimplexTol) {
    fail("row " + std::to_string(row) + ": confidences sum to " +
         std::to_string(sum) + ", expected 1 within " + std::to_string(kSimplexTol));
  }
  for (double& v : vals) v = std::min(1.0, v / sum);
  return vals;
}

PredictionDataset from_rows(int k, std::vector<int> labels,
                            std::vector<std::vector<double>> values, bool is_logits) {
  PredictionDataset ds;
  ds.n_classes = k;
  ds.labels = std::move(labels);
  if (is_logits) {
    ds.logits = std::vector<std::vector<double>>{};
    ds.logits->reserve(values.size());
  }
  ds.confidences.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (is_logits) {
      ds.confidences.push_back(softmax(values[i]));
      ds.logits->push_back(std::move(values[i]));
    } else {
      ds.confidences.emplace_back(checked_row(std::move(values[i]), i + 1));
    }
  }
  ds.validate();
  return ds;
}

PredictionDataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open dataset file: " + path);
  std::string line;
  if (!std::getline(in, line)) fail("empty dataset file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "label") {
    fail("bad CSV header (want label,c1,...,cK or label,l1,...,lK): " + line);
  }
  bool is_logits = false;
  if (header[1] == "l1") {
    is_logits = true;
  } else if (header[1] != "c1") {
    fail("bad CSV header column '" + header[1] + "' (want c1 or l1)");
  }
  const int k = static_cast<int>(header.size()) - 1;
  for (int j = 0; j < k; ++j) {
    const std::string want = (is_logits ? "l" : "c") + std::to_string(j + 1);
    if (header[j + 1] != want) fail("bad CSV header column '" + header[j + 1] + "', expected " + want);
  }

  std::vector<int> labels;
  std::vector<std::vector<double>> values;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    const auto toks = split_csv_line(line);
    if (static_cast<int>(toks.size()) != k + 1) {
      fail("row " + std::to_string(row) + ": expected " + std::to_string(k + 1) +
           " columns, got " + std::to_string(toks.size()));
    }
    const double lab = parse_double(toks[0], row);
    const int label = static_cast<int>(lab);
    if (lab != label || label < 1 || label > k) {
      fail("row " + std::to_string(row) + ": label " + toks[0] + " outside {1.." +
           std::to_string(k) + "}");
    }
    std::vector<double> vals(k);
    for (int j = 0; j < k; ++j) vals[j] = parse_double(toks[j + 1], row);
    labels.push_back(label);
    values.push_back(std::move(vals));
  }
  if (labels.empty()) fail("dataset has no rows: " + path);
  return from_rows(k, std::move(labels), std::move(values), is_logits);
}

PredictionDataset load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open dataset file: " + path);
  json j = json::parse(in);
  const int k = j.at("n_classes").get<int>();
  std::vector<int> labels = j.at("labels").get<std::vector<int>>();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 1 || labels[i] > k) {
      fail("row " + std::to_string(i + 1) + ": label " + std::to_string(labels[i]) +
           " outside {1.." + std::to_string(k) + "}");
    }
  }
  PredictionDataset ds;
  if (j.contains("confidences")) {
    auto rows = j.at("confidences").get<std::vector<std::vector<double>>>();
    ds = from_rows(k, std::move(labels), std::move(rows), false);
    if (j.contains("logits") && !j.at("logits").is_null()) {
      ds.logits = j.at("logits").get<std::vector<std::vector<double>>>();
      ds.validate();
    }
  } else if (j.contains("logits")) {
    auto rows = j.at("logits").get<std::vector<std::vector<double>>>();
    ds = from_rows(k, std::move(labels), std::move(rows), true);
  } else {
    fail("dataset JSON needs 'confidences' or 'logits'");
  }
  return ds;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

void PredictionDataset::validate() const {
  if (n_classes < 2) fail("dataset needs at least 2 classes");
  if (labels.empty()) fail("dataset has no samples");
  if (labels.size() != confidences.size()) fail("labels/confidences length mismatch");
  if (logits && logits->size() != labels.size()) fail("labels/logits length mismatch");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 1 || labels[i] > n_classes) {
      fail("row " + std::to_string(i + 1) + ": label " + std::to_string(labels[i]) +
           " outside {1.." + std::to_string(n_classes) + "}");
    }
    if (static_cast<int>(confidences[i].size()) != n_classes) {
      fail("row " + std::to_string(i + 1) + ": confidence length != n_classes");
    }
    if (logits) {
      if (static_cast<int>((*logits)[i].size()) != n_classes) {
        fail("row " + std::to_string(i + 1) + ": logits length != n_classes");
      }
      const ConfidenceVector sm = softmax((*logits)[i]);
      for (int jx = 0; jx < n_classes; ++jx) {
        if (std::abs(sm[jx] - confidences[i][jx]) > kSimplexTol) {
          fail("row " + std::to_string(i + 1) +
               ": softmax(logits) disagrees with stored confidences");
        }
      }
    }
  }
}

PredictionDataset PredictionDataset::subset(const std::vector<int>& indices) const {
  PredictionDataset out;
  out.n_classes = n_classes;
  out.labels.reserve(indices.size());
  out.confidences.reserve(indices.size());
  if (logits) out.logits = std::vector<std::vector<double>>{};
  for (int i : indices) {
    out.labels.push_back(labels[i]);
    out.confidences.push_back(confidences[i]);
    if (logits) out.logits->push_back((*logits)[i]);
  }
  return out;
}

BinaryPairs::BinaryPairs(std::vector<double> s, std::vector<int> o)
    : scores(std::move(s)), outcomes(std::move(o)) {
  if (scores.size() != outcomes.size()) fail("scores/outcomes length mismatch");
  for (double& x : scores) x = clip_unit(x);
  for (int y : outcomes) {
    if (y != 0 && y != 1) fail("binary outcome must be 0 or 1");
  }
}

std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  (void)ec;
  return std::string(buf, ptr);
}

PredictionDataset load_dataset(const std::string& path, DatasetFormat format) {
  if (format == DatasetFormat::Json ||
      (format == DatasetFormat::Auto && ends_with(path, ".json"))) {
    return load_json(path);
  }
  return load_csv(path);
}

void save_dataset(const PredictionDataset& ds, const std::string& path,
                  DatasetFormat format) {
  ds.validate();
  if (format == DatasetFormat::Auto) {
    format = ends_with(path, ".json") ? DatasetFormat::Json
             : ds.logits              ? DatasetFormat::CsvLogits
                                      : DatasetFormat::CsvConfidence;
  }
  if (format == DatasetFormat::CsvLogits && !ds.logits) {
    fail("dataset has no logits to save");
  }

  std::ofstream out(path);
  if (!out) fail("cannot write dataset file: " + path);

  if (format == DatasetFormat::Json) {
    json j;
    j["n_classes"] = ds.n_classes;
    j["labels"] = ds.labels;
    json rows = json::array();
    for (const auto& c : ds.confidences) rows.push_back(c.values);
    j["confidences"] = std::move(rows);
    if (ds.logits) j["logits"] = *ds.logits;
    out << j.dump() << '\n';
    return;
  }

  const bool logits = format == DatasetFormat::CsvLogits;
  out << "label";
  for (int j = 1; j <= ds.n_classes; ++j) out << ',' << (logits ? 'l' : 'c') << j;
  out << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << ds.labels[i];
    const std::vector<double>& row = logits ? (*ds.logits)[i] : ds.confidences[i].values;
    for (double v : row) out << ',' << format_double(v);
    out << '\n';
  }
}

}  // namespace calib
