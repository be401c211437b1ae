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

#include <gtest/gtest.h>

#include <mutex>
#include <set>

#include "trustsense/eval.hpp"
#include "trustsense/random.hpp"

namespace trustsense {
namespace {

TEST(Metrics, HandComputedExample) {
  const ConfusionMatrix cm{3, 1, 2, 4};
  const auto m = metrics(cm);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.7);
  EXPECT_DOUBLE_EQ(m.precision, 0.75);
  EXPECT_DOUBLE_EQ(m.recall, 0.6);
  EXPECT_DOUBLE_EQ(m.f1, 2.0 / 3.0);
}

TEST(Metrics, ZeroDenominatorsGiveZero) {
  const auto none_predicted = metrics({0, 0, 5, 5});
  EXPECT_EQ(none_predicted.precision, 0.0);
  EXPECT_EQ(none_predicted.recall, 0.0);
  EXPECT_EQ(none_predicted.f1, 0.0);
  EXPECT_EQ(none_predicted.accuracy, 0.5);
  const auto no_positives = metrics({0, 3, 0, 7});
  EXPECT_EQ(no_positives.recall, 0.0);
  EXPECT_EQ(no_positives.f1, 0.0);
  try {
    metrics({});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kEvaluation);
  }
}

TEST(Metrics, ConfusionCountsMatchBruteForce) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = 1 + rng.index(60);
    std::vector<int> pred(n), truth(n);
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = rng.bernoulli(0.5);
      truth[i] = rng.bernoulli(0.5);
    }
    const auto cm = ConfusionMatrix::from_predictions(pred, truth);
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < n; ++i) {
      tp += pred[i] == 1 && truth[i] == 1;
      fp += pred[i] == 1 && truth[i] == 0;
      fn += pred[i] == 0 && truth[i] == 1;
      tn += pred[i] == 0 && truth[i] == 0;
    }
    EXPECT_EQ(cm, (ConfusionMatrix{tp, fp, fn, tn}));
  }
  EXPECT_THROW(ConfusionMatrix::from_predictions(std::vector<int>{1}, std::vector<int>{1, 0}), Error);
}

TEST(Aggregate, PopulationStatistics) {
  const std::vector<double> v{0.5, 0.7, 0.9, 0.7};
  const auto a = Aggregate::over(v);
  EXPECT_DOUBLE_EQ(a.max, 0.9);
  EXPECT_DOUBLE_EQ(a.min, 0.5);
  EXPECT_DOUBLE_EQ(a.mean, 0.7);
  EXPECT_NEAR(a.sd, std::sqrt(0.02), 1e-15);
  const std::vector<double> same(7, 0.1);
  const auto s = Aggregate::over(same);
  EXPECT_EQ(s.mean, 0.1);
  EXPECT_EQ(s.sd, 0.0);
  EXPECT_THROW(Aggregate::over(std::vector<double>{}), Error);
}

MetricsSummary table_like_summary() {
  MetricsSummary s;
  s.accuracy = {0.8516, 0.75, 0.6953, 0.044};
  s.f1 = {0.8056, 0.7545, 0.7121, 0.0264};
  s.recall = {0.8906, 0.7202, 0.4375, 0.0847};
  s.precision = {0.8491, 0.7518, 0.6716, 0.0612};
  return s;
}

TEST(Report, TextLayout) {
  const std::string want =
      "     Accuracy F1 Score Recall Precision\n"
      "Max  85.16    80.56    89.06  84.91\n"
      "Mean 75.00    75.45    72.02  75.18\n"
      "Min  69.53    71.21    43.75  67.16\n"
      "SD   4.40     2.64     8.47   6.12\n";
  EXPECT_EQ(render_report(table_like_summary()), want);
}

TEST(Report, JsonRoundTrip) {
  std::vector<FoldResult> folds;
  for (const auto& cm : {ConfusionMatrix{5, 1, 2, 7}, ConfusionMatrix{4, 0, 3, 8}, ConfusionMatrix{0, 0, 0, 15}}) {
    folds.push_back({cm, metrics(cm), cm.tp + cm.fn == 0});
  }
  const auto s = MetricsSummary::from_folds(folds);
  const auto text = render_report(s, ReportFormat::kJson);
  const auto j = nlohmann::ordered_json::parse(text);
  EXPECT_EQ(j["k"], 3);
  EXPECT_EQ(j["unit"], "fraction");
  EXPECT_EQ(MetricsSummary::from_json(j), s);
  EXPECT_TRUE(j["folds"][2]["single_class"].get<bool>());
}

FeatureTable two_blobs(std::uint64_t seed, std::size_t rows, int subjects = 0) {
  Rng rng(seed);
  FeatureTable t;
  t.columns = {"a", "b", "c"};
  t.x.resize(static_cast<Eigen::Index>(rows), 3);
  for (std::size_t r = 0; r < rows; ++r) {
    const int label = static_cast<int>(r % 2);
    const auto row = static_cast<Eigen::Index>(r);
    t.x(row, 0) = 10.0 + (label ? 2.0 : -2.0) + rng.normal(0.0, 0.5);
    t.x(row, 1) = rng.normal(100.0, 20.0);
    t.x(row, 2) = rng.normal();
    t.y.push_back(label);
    t.subject.push_back(subjects ? static_cast<int>(r) % subjects : static_cast<int>(r));
    t.row_id.push_back(r);
  }
  return t;
}

// Records what it was trained on and thresholds column 0 at zero.
struct SpyLearner {
  struct Predict {
    std::vector<int> predict(const Matrix& x) const {
      std::vector<int> out;
      for (Eigen::Index r = 0; r < x.rows(); ++r) out.push_back(x(r, 0) > 0.0 ? 1 : 0);
      return out;
    }
  };
  mutable std::mutex mu;
  mutable std::vector<std::set<std::size_t>> trained_on;
  mutable std::vector<double> train_means;

  Predict fit(const FeatureTable& t, std::uint64_t) const {
    std::lock_guard lock(mu);
    trained_on.emplace_back(t.row_id.begin(), t.row_id.end());
    train_means.push_back(t.x.col(0).mean());
    return {};
  }
};

TEST(KFold, FoldsNeverLeakAndScalersAreFoldLocal) {
  const auto t = two_blobs(1, 103);
  SpyLearner spy;
  const auto s = kfold_evaluate(t, spy, {}, 5, 9, {.threads = 1});
  ASSERT_EQ(s.folds.size(), 5u);
  ASSERT_EQ(spy.trained_on.size(), 5u);
  const auto plan = kfold_partition(t, 5, derive_seed(9, 1));
  for (int f = 0; f < 5; ++f) {
    const auto test_rows = plan.fold_rows(f);
    const auto& train = spy.trained_on[static_cast<std::size_t>(f)];
    EXPECT_EQ(train.size() + test_rows.size(), t.rows());
    for (auto r : test_rows) EXPECT_FALSE(train.contains(r));
    EXPECT_NEAR(spy.train_means[static_cast<std::size_t>(f)], 0.0, 1e-12);
  }
  EXPECT_GE(s.accuracy.min, 0.95);
}

TEST(KFold, ThreadCountDoesNotChangeResults) {
  const auto t = two_blobs(2, 200);
  Hyperparameters h;
  h.epochs = 5;
  const auto spec = model2_spec(3, h);
  const auto serial = kfold_evaluate(t, spec, {}, 4, 3, {.threads = 1});
  const auto parallel = kfold_evaluate(t, spec, {}, 4, 3, {.threads = 4});
  EXPECT_EQ(render_report(serial, ReportFormat::kJson), render_report(parallel, ReportFormat::kJson));
  EXPECT_GE(serial.accuracy.mean, 0.95);
}

TEST(KFold, FeatureSubsetAndGlobalScaling) {
  const auto t = two_blobs(3, 120);
  const std::vector<std::string> only_noise{"c"};
  SpyLearner spy;
  const auto s = kfold_evaluate(t, spy, only_noise, 4, 1, {.per_fold_scaling = false, .threads = 1});
  EXPECT_LT(s.accuracy.mean, 0.8);
  EXPECT_THROW(kfold_evaluate(t, spy, {}, 1, 1), Error);
}

TEST(Holdout, RejectsSharedSubjects) {
  const auto t = two_blobs(4, 60, 6);
  std::vector<std::size_t> a, b;
  for (std::size_t r = 0; r < t.rows(); ++r) (r < 30 ? a : b).push_back(r);
  try {
    holdout_evaluate(t.select_rows(a), t.select_rows(b), SpyLearner{}, {}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kLeakage);
  }
}

TEST(Holdout, SubjectSplitEndToEnd) {
  const auto t = two_blobs(5, 300, 20);
  const auto plan = subject_split(t, 0.7, 2);
  const auto train = t.select_rows(plan.train_rows);
  const auto val = t.select_rows(plan.validation_rows);
  Hyperparameters h;
  h.epochs = 20;
  const auto r = holdout_evaluate(train, val, model1_spec(3, h), {}, 3);
  EXPECT_EQ(r.confusion.total(), val.rows());
  EXPECT_GE(r.metrics.accuracy, 0.95);
  const std::vector<std::string> subset{"a"};
  const auto again = holdout_evaluate(train, val, model1_spec(1, h), subset, 3);
  EXPECT_GE(again.metrics.accuracy, 0.95);
}

TEST(ScoreFold, FlagsSingleClassFolds) {
  FeatureTable t = two_blobs(6, 10);
  std::fill(t.y.begin(), t.y.end(), 0);
  const auto r = detail::score_fold(SpyLearner::Predict{}, standardize_apply(standardize_fit(t), t));
  EXPECT_TRUE(r.single_class);
}

}  // namespace
}  // namespace trustsense
