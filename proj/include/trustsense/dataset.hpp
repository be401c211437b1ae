// Copyright 2026 The trustsense Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "trustsense/error.hpp"
#include "trustsense/random.hpp"
#include "trustsense/signal_features.hpp"
#include "trustsense/strings.hpp"

namespace trustsense {

// Row-major so that one record is one contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct FeatureTable {
  std::vector<std::string> columns;
  Matrix x;
  std::vector<int> y;
  std::vector<int> subject;
  // Index of the row in the table it was originally loaded or built from.
  std::vector<std::size_t> row_id;

  std::size_t rows() const { return y.size(); }
  std::size_t cols() const { return columns.size(); }

  std::size_t column_index(std::string_view name) const {
    const auto wanted = normalize_feature_name(name);
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i] == wanted || normalize_feature_name(columns[i]) == wanted) return i;
    }
    fail(ErrorKind::kSchema, "no column named '" + std::string(name) + "'");
  }

  FeatureTable select_rows(std::span<const std::size_t> indices) const {
    FeatureTable out;
    out.columns = columns;
    out.x.resize(static_cast<Eigen::Index>(indices.size()), x.cols());
    out.y.reserve(indices.size());
    out.subject.reserve(indices.size());
    out.row_id.reserve(indices.size());
    for (std::size_t r = 0; r < indices.size(); ++r) {
      const auto src = indices[r];
      out.x.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(src));
      out.y.push_back(y[src]);
      out.subject.push_back(subject[src]);
      out.row_id.push_back(row_id[src]);
    }
    return out;
  }

  FeatureTable select_columns(std::span<const std::string> names) const {
    std::vector<std::size_t> idx;
    idx.reserve(names.size());
    for (const auto& n : names) idx.push_back(column_index(n));
    FeatureTable out;
    out.x.resize(x.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c) {
      out.columns.push_back(columns[idx[c]]);
      out.x.col(static_cast<Eigen::Index>(c)) = x.col(static_cast<Eigen::Index>(idx[c]));
    }
    out.y = y;
    out.subject = subject;
    out.row_id = row_id;
    return out;
  }

  std::set<int> subjects() const { return {subject.begin(), subject.end()}; }

  std::size_t count_label(int label) const {
    return static_cast<std::size_t>(std::count(y.begin(), y.end(), label));
  }
};

inline FeatureTable make_table(std::vector<std::string> columns, std::span<const FeatureVector> rows) {
  FeatureTable t;
  t.columns = std::move(columns);
  t.x.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.columns.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].values.size() != t.columns.size()) {
      fail(ErrorKind::kSchema, "row " + std::to_string(r) + " has " + std::to_string(rows[r].values.size()) +
                                   " values, expected " + std::to_string(t.columns.size()));
    }
    if (!rows[r].label) fail(ErrorKind::kSchema, "row " + std::to_string(r) + " has no label");
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      t.x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r].values[c];
    }
    t.y.push_back(*rows[r].label);
    t.subject.push_back(rows[r].subject_id);
    t.row_id.push_back(r);
  }
  return t;
}

// trust -> 1, distrust -> 0; "0"/"1" pass through.
inline int encode_label(std::string_view raw) {
  std::string token(detail::trim(raw));
  if (token.size() >= 2 && token.front() == '"' && token.back() == '"') token = token.substr(1, token.size() - 2);
  std::transform(token.begin(), token.end(), token.begin(), [](unsigned char c) { return std::tolower(c); });
  if (token == "trust" || token == "1") return 1;
  if (token == "distrust" || token == "0") return 0;
  fail(ErrorKind::kLabel, "unknown label token '" + std::string(raw) + "'");
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

struct CsvOptions {
  std::string label_column = "y";
  std::string subject_column = "subject";
  // When non-empty, the feature columns must equal this list in order.
  std::vector<std::string> expected_columns;
};

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return cells;
}

inline std::string unquote(std::string_view cell) {
  cell = trim(cell);
  if (cell.size() >= 2 && cell.front() == '"' && cell.back() == '"') cell = cell.substr(1, cell.size() - 2);
  return std::string(cell);
}

}  // namespace detail

// Header row, one feature per column, a label column and an optional subject
// column. Without a subject column every row is its own subject.
inline FeatureTable parse_csv(std::istream& in, const CsvOptions& options = {}) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!detail::trim(line).empty()) return true;
    }
    return false;
  };
  if (!next_line()) fail(ErrorKind::kParse, "no header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  const auto header = detail::split_csv_line(line);
  std::ptrdiff_t label_col = -1;
  std::ptrdiff_t subject_col = -1;
  std::vector<std::size_t> feature_cols;
  FeatureTable t;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto name = detail::unquote(header[c]);
    if (name == options.label_column) {
      label_col = static_cast<std::ptrdiff_t>(c);
    } else if (name == options.subject_column) {
      subject_col = static_cast<std::ptrdiff_t>(c);
    } else {
      feature_cols.push_back(c);
      t.columns.push_back(name);
    }
  }
  if (label_col < 0) fail(ErrorKind::kParse, "missing label column '" + options.label_column + "'");
  if (t.columns.empty()) fail(ErrorKind::kParse, "no feature columns");
  if (!options.expected_columns.empty()) {
    if (options.expected_columns.size() != t.columns.size()) {
      fail(ErrorKind::kParse, "expected " + std::to_string(options.expected_columns.size()) + " feature columns, found " +
                                  std::to_string(t.columns.size()));
    }
    for (std::size_t i = 0; i < t.columns.size(); ++i) {
      if (normalize_feature_name(t.columns[i]) != normalize_feature_name(options.expected_columns[i])) {
        fail(ErrorKind::kParse, "missing column '" + options.expected_columns[i] + "' (column " +
                                    std::to_string(i + 1) + " is '" + t.columns[i] + "')");
      }
    }
  }

  std::vector<double> values;
  while (next_line()) {
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      fail(ErrorKind::kParse, "row " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                                  " cells, found " + std::to_string(cells.size()));
    }
    for (std::size_t f = 0; f < feature_cols.size(); ++f) {
      const auto cell = detail::trim(cells[feature_cols[f]]);
      double v = 0.0;
      const auto* end = cell.data() + cell.size();
      auto [ptr, ec] = std::from_chars(cell.data(), end, v);
      if (cell.empty() || ec != std::errc{} || ptr != end || !std::isfinite(v)) {
        fail(ErrorKind::kParse, "row " + std::to_string(line_no) + ", column '" + t.columns[f] +
                                    "': non-numeric cell '" + std::string(cell) + "'");
      }
      values.push_back(v);
    }
    try {
      t.y.push_back(encode_label(cells[static_cast<std::size_t>(label_col)]));
    } catch (const Error& e) {
      fail(ErrorKind::kParse, "row " + std::to_string(line_no) + ", column '" + options.label_column + "': " + e.what());
    }
    if (subject_col >= 0) {
      const auto cell = detail::trim(cells[static_cast<std::size_t>(subject_col)]);
      int s = 0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), s);
      if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size()) {
        fail(ErrorKind::kParse, "row " + std::to_string(line_no) + ", column '" + options.subject_column +
                                    "': invalid subject id '" + std::string(cell) + "'");
      }
      t.subject.push_back(s);
    } else {
      t.subject.push_back(static_cast<int>(t.y.size() - 1));
    }
    t.row_id.push_back(t.y.size() - 1);
  }
  if (t.y.empty()) fail(ErrorKind::kParse, "no data rows");
  t.x = Eigen::Map<Matrix>(values.data(), static_cast<Eigen::Index>(t.y.size()),
                           static_cast<Eigen::Index>(t.columns.size()));
  return t;
}

inline FeatureTable load_csv(const std::string& path, const CsvOptions& options = {}) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open '" + path + "'");
  try {
    return parse_csv(in, options);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kParse) fail(ErrorKind::kParse, path + ": " + e.what());
    throw;
  }
}

namespace detail {

// Shortest representation that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace detail

inline void write_csv(const FeatureTable& t, std::ostream& out, const CsvOptions& options = {}) {
  for (const auto& c : t.columns) out << c << ',';
  out << options.label_column << ',' << options.subject_column << '\n';
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) {
      out << detail::format_double(t.x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))) << ',';
    }
    out << t.y[r] << ',' << t.subject[r] << '\n';
  }
}

inline void save_csv(const FeatureTable& t, const std::string& path, const CsvOptions& options = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write '" + path + "'");
  write_csv(t, out, options);
  if (!out) fail(ErrorKind::kIo, "write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

struct ScalerParams {
  std::vector<std::string> columns;
  std::vector<double> mean;
  std::vector<double> sd;
  std::vector<bool> degenerate;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < columns.size(); ++i) {
      j[columns[i]] = {{"mean", mean[i]}, {"sd", sd[i]}, {"degenerate", static_cast<bool>(degenerate[i])}};
    }
    return j;
  }

  static ScalerParams from_json(const nlohmann::ordered_json& j) {
    ScalerParams p;
    for (const auto& [name, entry] : j.items()) {
      p.columns.push_back(name);
      p.mean.push_back(entry.at("mean").get<double>());
      p.sd.push_back(entry.at("sd").get<double>());
      p.degenerate.push_back(entry.at("degenerate").get<bool>());
    }
    return p;
  }

  bool operator==(const ScalerParams&) const = default;
};

// Population mean and sd per column.
inline ScalerParams standardize_fit(const FeatureTable& train) {
  if (train.rows() == 0) fail(ErrorKind::kSchema, "cannot fit a scaler on an empty table");
  ScalerParams p;
  p.columns = train.columns;
  const auto n = static_cast<double>(train.rows());
  for (Eigen::Index c = 0; c < train.x.cols(); ++c) {
    const double m = train.x.col(c).sum() / n;
    const double var = (train.x.col(c).array() - m).square().sum() / n;
    const double sd = std::sqrt(var);
    p.mean.push_back(m);
    // A column this flat relative to its magnitude is constant up to rounding.
    const bool flat = !(sd > 1e-12 * std::max(1.0, std::abs(m)));
    p.sd.push_back(flat ? 0.0 : sd);
    p.degenerate.push_back(flat);
  }
  return p;
}

inline FeatureTable standardize_apply(const ScalerParams& params, const FeatureTable& table) {
  if (params.columns.size() != table.cols()) {
    fail(ErrorKind::kSchema, "scaler has " + std::to_string(params.columns.size()) + " columns, table has " +
                                 std::to_string(table.cols()));
  }
  FeatureTable out = table;
  for (std::size_t c = 0; c < params.columns.size(); ++c) {
    if (params.degenerate[c]) continue;
    const auto col = static_cast<Eigen::Index>(c);
    out.x.col(col) = (table.x.col(col).array() - params.mean[c]) / params.sd[c];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Balancing and partitioning
// ---------------------------------------------------------------------------

// Keeps every minority row and a seeded uniform subset of the majority class
// of the same size. Rows keep their original relative order.
inline FeatureTable balance_downsample(const FeatureTable& table, std::uint64_t seed) {
  std::vector<std::size_t> by_class[2];
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const int label = table.y[r];
    if (label != 0 && label != 1) fail(ErrorKind::kBalance, "labels must be 0 or 1");
    by_class[label].push_back(r);
  }
  if (by_class[0].empty() || by_class[1].empty()) fail(ErrorKind::kBalance, "table contains a single class");
  const std::size_t target = std::min(by_class[0].size(), by_class[1].size());
  auto& majority = by_class[0].size() > target ? by_class[0] : by_class[1];
  Rng rng(seed);
  rng.shuffle(majority);
  majority.resize(target);
  std::vector<std::size_t> keep;
  keep.reserve(2 * target);
  keep.insert(keep.end(), by_class[0].begin(), by_class[0].end());
  keep.insert(keep.end(), by_class[1].begin(), by_class[1].end());
  std::sort(keep.begin(), keep.end());
  return table.select_rows(keep);
}

struct SplitPlan {
  std::set<int> train_subjects;
  std::set<int> validation_subjects;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> validation_rows;
  // k-fold plans only: fold of each row, in [0, k).
  std::vector<int> fold_of_row;
  int k = 0;

  std::vector<std::size_t> fold_rows(int fold) const {
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < fold_of_row.size(); ++r) {
      if (fold_of_row[r] == fold) rows.push_back(r);
    }
    return rows;
  }

  std::vector<std::size_t> rows_outside_fold(int fold) const {
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < fold_of_row.size(); ++r) {
      if (fold_of_row[r] != fold) rows.push_back(r);
    }
    return rows;
  }
};

// Subject-wise holdout: round(train_fraction * subjects) subjects train.
inline SplitPlan subject_split(const FeatureTable& table, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) fail(ErrorKind::kSplit, "train fraction must lie in (0,1)");
  const auto subjects = table.subjects();
  if (subjects.size() < 2) fail(ErrorKind::kSplit, "need at least 2 subjects, found " + std::to_string(subjects.size()));
  std::vector<int> order(subjects.begin(), subjects.end());
  Rng rng(seed);
  rng.shuffle(order);
  auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(order.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, order.size() - 1);
  SplitPlan plan;
  plan.train_subjects.insert(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  plan.validation_subjects.insert(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  for (std::size_t r = 0; r < table.rows(); ++r) {
    (plan.train_subjects.contains(table.subject[r]) ? plan.train_rows : plan.validation_rows).push_back(r);
  }
  return plan;
}

// Row-wise holdout, ignoring subject identity.
inline SplitPlan row_split(const FeatureTable& table, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) fail(ErrorKind::kSplit, "train fraction must lie in (0,1)");
  if (table.rows() < 2) fail(ErrorKind::kSplit, "need at least 2 rows");
  std::vector<std::size_t> order(table.rows());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(order.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, order.size() - 1);
  SplitPlan plan;
  plan.train_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  plan.validation_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(plan.train_rows.begin(), plan.train_rows.end());
  std::sort(plan.validation_rows.begin(), plan.validation_rows.end());
  for (auto r : plan.train_rows) plan.train_subjects.insert(table.subject[r]);
  for (auto r : plan.validation_rows) plan.validation_subjects.insert(table.subject[r]);
  return plan;
}

// Shuffled assignment of rows to k folds whose sizes differ by at most one.
inline SplitPlan kfold_partition(std::size_t row_count, int k, std::uint64_t seed) {
  if (k < 2) fail(ErrorKind::kPartition, "k must be at least 2, got " + std::to_string(k));
  if (static_cast<std::size_t>(k) > row_count) {
    fail(ErrorKind::kPartition, "k = " + std::to_string(k) + " exceeds row count " + std::to_string(row_count));
  }
  std::vector<std::size_t> order(row_count);
  for (std::size_t i = 0; i < row_count; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  SplitPlan plan;
  plan.k = k;
  plan.fold_of_row.assign(row_count, 0);
  for (std::size_t pos = 0; pos < row_count; ++pos) {
    plan.fold_of_row[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k));
  }
  return plan;
}

inline SplitPlan kfold_partition(const FeatureTable& table, int k, std::uint64_t seed) {
  return kfold_partition(table.rows(), k, seed);
}

}  // namespace trustsense
