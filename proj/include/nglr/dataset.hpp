#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nglr/common.hpp"

namespace nglr {

struct Dataset {
  Eigen::MatrixXd x;  // n x p covariates
  Eigen::VectorXd y;  // n responses
  std::vector<std::string> covariate_names;
  std::string response_name = "y";

  Eigen::Index n() const { return x.rows(); }
  Eigen::Index p() const { return x.cols(); }
};

struct ColumnSchema {
  std::string response;
  std::vector<std::string> covariates;
  bool standardize = false;
  std::optional<double> yeo_johnson_lambda;
  // order is always transform-then-standardize when both are requested
  bool standardize_after_transform = false;
};

// Yeo-Johnson power transform, all four branches; continuous in lambda at 0
// (u >= 0) and at 2 (u < 0) via expm1/log1p.
inline double yeo_johnson(double u, double lambda) {
  if (!std::isfinite(u) || !std::isfinite(lambda))
    throw std::invalid_argument("yeo_johnson: non-finite argument");
  if (u >= 0.0) {
    if (lambda == 0.0) return std::log1p(u);
    return std::expm1(lambda * std::log1p(u)) / lambda;
  }
  if (lambda == 2.0) return -std::log1p(-u);
  return -std::expm1((2.0 - lambda) * std::log1p(-u)) / (2.0 - lambda);
}

// In-place column standardization: subtract mean, divide by sd (divisor n-1).
inline void standardize_columns(Dataset& d) {
  const Eigen::Index n = d.n();
  if (n < 2) throw data_error("standardize: need at least 2 rows");
  auto scale = [n](Eigen::Ref<Eigen::VectorXd> col, const std::string& name) {
    const double mean = col.mean();
    col.array() -= mean;
    const double sd = std::sqrt(col.squaredNorm() / static_cast<double>(n - 1));
    if (!(sd > 0.0)) throw data_error("standardize: column '" + name + "' is constant");
    col /= sd;
  };
  for (Eigen::Index j = 0; j < d.p(); ++j) scale(d.x.col(j), d.covariate_names[j]);
  scale(d.y, d.response_name);
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  cells.push_back(cur);
  for (auto& c : cells) {
    const auto b = c.find_first_not_of(" \t");
    const auto e = c.find_last_not_of(" \t");
    c = (b == std::string::npos) ? std::string() : c.substr(b, e - b + 1);
  }
  return cells;
}

inline double parse_cell(const std::string& cell, int line_no, const std::string& column) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  if (begin != end && *begin == '+') ++begin;
  double value = 0.0;
  const auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc() || res.ptr != end || cell.empty() || !std::isfinite(value))
    throw data_error("line " + std::to_string(line_no) + ", column '" + column +
                     "': non-numeric cell '" + cell + "'");
  return value;
}

}  // namespace detail

// Loads a comma-delimited, headered CSV and assembles the (y, X) pair per the
// schema. Yeo-Johnson (if requested) is applied per column first, then
// standardization.
inline Dataset load_dataset(const std::string& path, const ColumnSchema& schema) {
  if (schema.covariates.empty()) throw config_error("schema: covariates must be nonempty");
  for (const auto& c : schema.covariates)
    if (c == schema.response)
      throw config_error("schema: response '" + schema.response + "' listed among covariates");

  std::ifstream in(path);
  if (!in) throw data_error("cannot open dataset file '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw data_error("'" + path + "': empty file (header required)");
  const auto header = detail::split_csv_line(line);

  auto column_index = [&](const std::string& name) -> std::size_t {
    std::size_t found = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) {
        if (found != header.size())
          throw data_error("'" + path + "': duplicate column '" + name + "' in header");
        found = i;
      }
    }
    if (found == header.size())
      throw data_error("'" + path + "': missing column '" + name + "'");
    return found;
  };

  const std::size_t y_idx = column_index(schema.response);
  std::vector<std::size_t> x_idx;
  x_idx.reserve(schema.covariates.size());
  for (const auto& c : schema.covariates) x_idx.push_back(column_index(c));

  std::vector<double> ys;
  std::vector<std::vector<double>> xs;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw data_error("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " cells, got " +
                       std::to_string(cells.size()));
    ys.push_back(detail::parse_cell(cells[y_idx], line_no, schema.response));
    std::vector<double> row(x_idx.size());
    for (std::size_t j = 0; j < x_idx.size(); ++j)
      row[j] = detail::parse_cell(cells[x_idx[j]], line_no, schema.covariates[j]);
    xs.push_back(std::move(row));
  }
  const Eigen::Index n = static_cast<Eigen::Index>(ys.size());
  if (n < 3) throw data_error("'" + path + "': need at least 3 data rows, got " + std::to_string(n));

  Dataset d;
  d.response_name = schema.response;
  d.covariate_names = schema.covariates;
  d.y.resize(n);
  d.x.resize(n, static_cast<Eigen::Index>(x_idx.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    d.y(i) = ys[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < d.x.cols(); ++j)
      d.x(i, j) = xs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }

  if (schema.yeo_johnson_lambda) {
    const double lam = *schema.yeo_johnson_lambda;
    for (Eigen::Index i = 0; i < n; ++i) {
      d.y(i) = yeo_johnson(d.y(i), lam);
      for (Eigen::Index j = 0; j < d.x.cols(); ++j) d.x(i, j) = yeo_johnson(d.x(i, j), lam);
    }
  }
  if (schema.standardize || (schema.yeo_johnson_lambda && schema.standardize_after_transform))
    standardize_columns(d);
  return d;
}

// Writes response + covariates back out with 17 significant digits so that a
// reload round-trips bit-exactly.
inline void write_dataset_csv(const Dataset& d, std::ostream& out) {
  out << d.response_name;
  for (const auto& c : d.covariate_names) out << ',' << c;
  out << '\n';
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
  };
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    put(d.y(i));
    for (Eigen::Index j = 0; j < d.p(); ++j) {
      out << ',';
      put(d.x(i, j));
    }
    out << '\n';
  }
}

}  // namespace nglr
