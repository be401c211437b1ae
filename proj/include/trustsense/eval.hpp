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
#include <cmath>
#include <concepts>
#include <cstdint>
#include <cstdio>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "trustsense/dataset.hpp"
#include "trustsense/error.hpp"
#include "trustsense/mlp.hpp"
#include "trustsense/random.hpp"

namespace trustsense {

// Positive class is trust (1).
struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }

  static ConfusionMatrix from_predictions(std::span<const int> predicted, std::span<const int> truth) {
    if (predicted.size() != truth.size()) fail(ErrorKind::kEvaluation, "prediction and label counts differ");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const bool p = predicted[i] == 1;
      const bool t = truth[i] == 1;
      if (p && t) ++cm.tp;
      else if (p && !t) ++cm.fp;
      else if (!p && t) ++cm.fn;
      else ++cm.tn;
    }
    return cm;
  }

  bool operator==(const ConfusionMatrix&) const = default;
};

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  bool operator==(const Metrics&) const = default;
};

// Zero denominators yield 0 for precision, recall and F1.
inline Metrics metrics(const ConfusionMatrix& cm) {
  if (cm.total() == 0) fail(ErrorKind::kEvaluation, "empty confusion matrix");
  Metrics m;
  const auto tp = static_cast<double>(cm.tp);
  m.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
  m.precision = cm.tp + cm.fp == 0 ? 0.0 : tp / static_cast<double>(cm.tp + cm.fp);
  m.recall = cm.tp + cm.fn == 0 ? 0.0 : tp / static_cast<double>(cm.tp + cm.fn);
  m.f1 = m.precision + m.recall == 0.0 ? 0.0 : 2 * ((m.precision * m.recall) / (m.precision + m.recall));
  return m;
}

struct FoldResult {
  ConfusionMatrix confusion;
  Metrics metrics;
  // Held-out rows contained only one class.
  bool single_class = false;

  bool operator==(const FoldResult&) const = default;
};

struct Aggregate {
  double max = 0.0;
  double mean = 0.0;
  double min = 0.0;
  double sd = 0.0;  // population

  bool operator==(const Aggregate&) const = default;

  static Aggregate over(std::span<const double> values) {
    if (values.empty()) fail(ErrorKind::kEvaluation, "no fold values to aggregate");
    Aggregate a;
    a.max = *std::max_element(values.begin(), values.end());
    a.min = *std::min_element(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += v;
    // Rounding in the mean must not break min <= mean <= max.
    a.mean = std::clamp(sum / static_cast<double>(values.size()), a.min, a.max);
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.sd = std::sqrt(ss / static_cast<double>(values.size()));
    return a;
  }
};

struct MetricsSummary {
  std::vector<FoldResult> folds;
  Aggregate accuracy;
  Aggregate f1;
  Aggregate recall;
  Aggregate precision;

  bool operator==(const MetricsSummary&) const = default;

  // Aggregation runs in fold-index order, so it does not depend on the
  // order in which folds finished.
  static MetricsSummary from_folds(std::vector<FoldResult> folds) {
    MetricsSummary s;
    s.folds = std::move(folds);
    std::vector<double> acc, f1, rec, prec;
    for (const auto& f : s.folds) {
      acc.push_back(f.metrics.accuracy);
      f1.push_back(f.metrics.f1);
      rec.push_back(f.metrics.recall);
      prec.push_back(f.metrics.precision);
    }
    s.accuracy = Aggregate::over(acc);
    s.f1 = Aggregate::over(f1);
    s.recall = Aggregate::over(rec);
    s.precision = Aggregate::over(prec);
    return s;
  }

  nlohmann::ordered_json to_json() const {
    auto agg = [](const Aggregate& a) {
      return nlohmann::ordered_json{{"max", a.max}, {"mean", a.mean}, {"min", a.min}, {"sd", a.sd}};
    };
    nlohmann::ordered_json folds_json = nlohmann::ordered_json::array();
    for (const auto& f : folds) {
      folds_json.push_back({{"tp", f.confusion.tp},
                            {"fp", f.confusion.fp},
                            {"fn", f.confusion.fn},
                            {"tn", f.confusion.tn},
                            {"single_class", f.single_class},
                            {"accuracy", f.metrics.accuracy},
                            {"f1", f.metrics.f1},
                            {"recall", f.metrics.recall},
                            {"precision", f.metrics.precision}});
    }
    return {{"k", folds.size()},
            {"unit", "fraction"},
            {"aggregate",
             {{"accuracy", agg(accuracy)}, {"f1", agg(f1)}, {"recall", agg(recall)}, {"precision", agg(precision)}}},
            {"folds", folds_json}};
  }

  static MetricsSummary from_json(const nlohmann::ordered_json& j) {
    std::vector<FoldResult> folds;
    for (const auto& f : j.at("folds")) {
      FoldResult r;
      r.confusion = {f.at("tp").get<std::size_t>(), f.at("fp").get<std::size_t>(), f.at("fn").get<std::size_t>(),
                     f.at("tn").get<std::size_t>()};
      r.metrics = metrics(r.confusion);
      r.single_class = f.at("single_class").get<bool>();
      folds.push_back(r);
    }
    MetricsSummary s = from_folds(std::move(folds));
    if (j.at("k").get<std::size_t>() != s.folds.size()) fail(ErrorKind::kParse, "fold count does not match k");
    return s;
  }
};

enum class ReportFormat { kText, kJson };

// Text layout: header "Accuracy F1 Score Recall Precision", rows Max, Mean,
// Min, SD, values in percent with two decimals, each left-aligned under its
// header word.
inline std::string render_report(const MetricsSummary& summary, ReportFormat format = ReportFormat::kText) {
  if (format == ReportFormat::kJson) return summary.to_json().dump(2) + "\n";
  static constexpr const char* kHeaders[] = {"Accuracy", "F1 Score", "Recall", "Precision"};
  const Aggregate* cols[] = {&summary.accuracy, &summary.f1, &summary.recall, &summary.precision};
  std::ostringstream out;
  out << "    ";
  for (const char* h : kHeaders) out << ' ' << h;
  out << '\n';
  auto row = [&](const char* label, double Aggregate::*field) {
    char cell[32];
    std::string line = label;
    line.resize(4, ' ');
    for (std::size_t c = 0; c < 4; ++c) {
      std::snprintf(cell, sizeof cell, "%.2f", 100.0 * (cols[c]->*field));
      std::string text = cell;
      if (c + 1 < 4) text.resize(std::max(text.size(), std::string(kHeaders[c]).size()), ' ');
      line += ' ' + text;
    }
    out << line << '\n';
  };
  row("Max", &Aggregate::max);
  row("Mean", &Aggregate::mean);
  row("Min", &Aggregate::min);
  row("SD", &Aggregate::sd);
  return out.str();
}

// ---------------------------------------------------------------------------
// Learners
// ---------------------------------------------------------------------------

template <typename P>
concept Predictor = requires(const P& p, const Matrix& x) {
  { p.predict(x) } -> std::convertible_to<std::vector<int>>;
};

// fit() receives a standardized training table and a per-fold seed.
template <typename L>
concept Learner = requires(const L& l, const FeatureTable& t, std::uint64_t seed) {
  { l.fit(t, seed) } -> Predictor;
};

struct MlpPredictor {
  MlpModel model;
  std::vector<int> predict(const Matrix& x) const { return model.classify(x); }
};

struct MlpLearner {
  ModelSpec spec;  // input width is taken from the training table

  MlpPredictor fit(const FeatureTable& train, std::uint64_t seed) const {
    ModelSpec s = spec.with_input_width(static_cast<int>(train.cols()));
    s.seed = seed;
    MlpPredictor p{MlpModel::build(s)};
    p.model.train(train);
    return p;
  }
};

struct EvalOptions {
  // Refit the scaler on each fold's training rows. When false the whole
  // table is standardized once before partitioning.
  bool per_fold_scaling = true;
  unsigned threads = 0;  // 0: hardware concurrency
};

struct FoldData {
  FeatureTable train;
  FeatureTable test;
  ScalerParams scaler;
};

inline FoldData prepare_fold(const FeatureTable& table, const SplitPlan& plan, int fold) {
  const auto train_rows = plan.rows_outside_fold(fold);
  const auto test_rows = plan.fold_rows(fold);
  FoldData d;
  const auto raw_train = table.select_rows(train_rows);
  d.scaler = standardize_fit(raw_train);
  d.train = standardize_apply(d.scaler, raw_train);
  d.test = standardize_apply(d.scaler, table.select_rows(test_rows));
  return d;
}

namespace detail {

template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::jthread> workers;
  for (unsigned t = 0; t < threads; ++t) {
    workers.emplace_back([&, t] {
      for (std::size_t i = t; i < count; i += threads) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  workers.clear();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline FeatureTable subset_or_all(const FeatureTable& table, std::span<const std::string> features) {
  return features.empty() ? table : table.select_columns(features);
}

template <Predictor P>
FoldResult score_fold(const P& predictor, const FeatureTable& test) {
  FoldResult r;
  const auto predicted = predictor.predict(test.x);
  r.confusion = ConfusionMatrix::from_predictions(predicted, test.y);
  r.metrics = metrics(r.confusion);
  r.single_class = test.count_label(1) == 0 || test.count_label(0) == 0;
  return r;
}

template <Learner L>
FoldResult fit_and_score(const FeatureTable& train, const FeatureTable& validation, const L& learner,
                         std::span<const std::string> feature_subset, std::uint64_t seed) {
  const auto tr = subset_or_all(train, feature_subset);
  const auto va = subset_or_all(validation, feature_subset);
  const auto scaler = standardize_fit(tr);
  const auto predictor = learner.fit(standardize_apply(scaler, tr), derive_seed(seed, 100));
  return score_fold(predictor, standardize_apply(scaler, va));
}

}  // namespace detail

// k-fold cross validation. An empty feature_subset means all columns.
template <Learner L>
MetricsSummary kfold_evaluate(const FeatureTable& table, const L& learner, std::span<const std::string> feature_subset,
                              int k, std::uint64_t seed, const EvalOptions& options = {}) {
  FeatureTable data = detail::subset_or_all(table, feature_subset);
  if (!options.per_fold_scaling) data = standardize_apply(standardize_fit(data), data);
  const SplitPlan plan = kfold_partition(data, k, derive_seed(seed, 1));
  std::vector<FoldResult> folds(static_cast<std::size_t>(k));
  detail::parallel_for(folds.size(), options.threads, [&](std::size_t f) {
    const int fold = static_cast<int>(f);
    FoldData d;
    if (options.per_fold_scaling) {
      d = prepare_fold(data, plan, fold);
    } else {
      d.train = data.select_rows(plan.rows_outside_fold(fold));
      d.test = data.select_rows(plan.fold_rows(fold));
    }
    const auto predictor = learner.fit(d.train, derive_seed(seed, 100 + f));
    folds[f] = detail::score_fold(predictor, d.test);
  });
  return MetricsSummary::from_folds(std::move(folds));
}

inline MetricsSummary kfold_evaluate(const FeatureTable& table, const ModelSpec& spec,
                                     std::span<const std::string> feature_subset, int k, std::uint64_t seed,
                                     const EvalOptions& options = {}) {
  return kfold_evaluate(table, MlpLearner{spec}, feature_subset, k, seed, options);
}

// Single train/validation pass; the scaler is fit on the training table only.
template <Learner L>
FoldResult holdout_evaluate(const FeatureTable& train, const FeatureTable& validation, const L& learner,
                            std::span<const std::string> feature_subset, std::uint64_t seed) {
  const auto train_subjects = train.subjects();
  for (int s : validation.subjects()) {
    if (train_subjects.contains(s)) {
      fail(ErrorKind::kLeakage, "subject " + std::to_string(s) + " appears in both training and validation data");
    }
  }
  return detail::fit_and_score(train, validation, learner, feature_subset, seed);
}

inline FoldResult holdout_evaluate(const FeatureTable& train, const FeatureTable& validation, const ModelSpec& spec,
                                   std::span<const std::string> feature_subset, std::uint64_t seed) {
  return holdout_evaluate(train, validation, MlpLearner{spec}, feature_subset, seed);
}

}  // namespace trustsense
