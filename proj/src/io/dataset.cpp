#include "deepntk/io/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace deepntk::io {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const char* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(t.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

}  // namespace

RowNormalization parse_row_normalization(const std::string& name) {
  if (name == "none") return RowNormalization::none;
  if (name == "unit_sphere") return RowNormalization::unit_sphere;
  fail(ErrorKind::invalid_argument, "unknown normalization '" + name + "'");
}

Dataset make_classification(const Eigen::MatrixXd& X, const std::vector<int>& labels) {
  require(static_cast<std::size_t>(X.rows()) == labels.size(), "label count mismatch");
  int classes = 0;
  for (int l : labels) {
    require(l >= 0, "labels must be nonnegative");
    classes = std::max(classes, l + 1);
  }
  Dataset data;
  data.X = X;
  data.labels = labels;
  data.Z = Eigen::MatrixXd::Zero(X.rows(), std::max(classes, 1));
  for (std::size_t i = 0; i < labels.size(); ++i) data.Z(i, labels[i]) = 1.0;
  return data;
}

Dataset parse_dataset(const std::string& text, RowNormalization normalize,
                      const std::string& source) {
  std::stringstream in(text);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::parse, source + ": empty file, header row required");
  const auto header = split_csv(line);
  if (header.size() < 2) fail(ErrorKind::parse, source + ":1: need feature columns and a label");
  const std::size_t d = header.size() - 1;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) {
      fail(ErrorKind::parse, source + ":" + std::to_string(lineno) + ": expected " +
                                 std::to_string(header.size()) + " columns, got " +
                                 std::to_string(cells.size()));
    }
    std::vector<double> row(d);
    for (std::size_t j = 0; j < d; ++j) {
      if (!parse_double(cells[j], row[j])) {
        fail(ErrorKind::parse, source + ":" + std::to_string(lineno) + ": bad number '" +
                                   cells[j] + "'");
      }
    }
    double lab;
    if (!parse_double(cells[d], lab) || lab < 0 || lab != std::floor(lab)) {
      fail(ErrorKind::parse, source + ":" + std::to_string(lineno) + ": label must be a nonnegative integer");
    }
    rows.push_back(std::move(row));
    labels.push_back(static_cast<int>(lab));
  }
  if (rows.empty()) fail(ErrorKind::parse, source + ": no data rows");
  Eigen::MatrixXd X(rows.size(), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) X(i, j) = rows[i][j];
    if (normalize == RowNormalization::unit_sphere) {
      const double n = X.row(i).norm();
      if (n == 0.0) {
        fail(ErrorKind::invalid_row, source + ": data row " + std::to_string(i + 1) +
                                         " has zero norm");
      }
      X.row(i) /= n;
    }
  }
  Dataset data = make_classification(X, labels);
  for (std::size_t j = 0; j < d; ++j) data.names.push_back(trim(header[j]));
  validate_dataset(data);
  return data;
}

Dataset load_dataset(const std::string& path, RowNormalization normalize) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::io, "cannot open dataset '" + path + "'");
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_dataset(buf.str(), normalize, path);
}

Eigen::MatrixXd synthetic_sphere(int d, int n, std::uint64_t seed) {
  require(d >= 1 && n >= 1, "synthetic sphere needs d >= 1 and n >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd X(n, d);
  for (int i = 0; i < n; ++i) {
    do {
      for (int j = 0; j < d; ++j) X(i, j) = normal(rng);
    } while (X.row(i).norm() == 0.0);
    X.row(i) /= X.row(i).norm();
  }
  return X;
}

Dataset synthetic_two_class(int d, int n, std::uint64_t seed) {
  Eigen::MatrixXd X = synthetic_sphere(d, n, seed);
  const Eigen::VectorXd u = synthetic_sphere(d, 1, seed ^ 0x9e3779b97f4a7c15ULL).row(0).transpose();
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) labels[i] = X.row(i).dot(u) > 0.0 ? 1 : 0;
  return make_classification(X, labels);
}

Dataset subset(const Dataset& data, const std::vector<int>& rows) {
  Eigen::MatrixXd X(rows.size(), data.X.cols());
  std::vector<int> labels;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    X.row(i) = data.X.row(rows[i]);
    if (!data.labels.empty()) labels.push_back(data.labels[rows[i]]);
  }
  Dataset out;
  out.X = X;
  out.labels = labels;
  out.names = data.names;
  out.Z.resize(rows.size(), data.Z.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.Z.row(i) = data.Z.row(rows[i]);
  return out;
}

std::vector<DensePair> synthetic_pairs(int d, int count, std::uint64_t seed) {
  require(count >= 1, "pair count must be >= 1");
  const Eigen::MatrixXd X = synthetic_sphere(d, 2 * count, seed) * std::sqrt(static_cast<double>(d));
  std::vector<DensePair> out;
  for (int i = 0; i < count; ++i) out.push_back({X.row(2 * i).transpose(), X.row(2 * i + 1).transpose()});
  return out;
}

}  // namespace deepntk::io
