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

#include <cmath>
#include <set>

#include "trustsense/lime.hpp"

namespace trustsense {
namespace {

std::vector<std::string> names(std::size_t d) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < d; ++i) out.push_back("f" + std::to_string(i));
  return out;
}

ProbabilityFunction linear_box(Eigen::VectorXd w, double b) {
  return [w, b](const Matrix& x) -> Eigen::VectorXd { return (x * w).array() + b; };
}

// Penalized normal equations on [X 1] solved densely.
Eigen::VectorXd oracle_ridge(const Matrix& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w, double ridge) {
  const auto d = x.cols();
  Eigen::MatrixXd a(x.rows(), d + 1);
  a.leftCols(d) = x;
  a.col(d).setOnes();
  Eigen::MatrixXd lhs = a.transpose() * w.asDiagonal() * a;
  lhs.diagonal().head(d).array() += ridge;
  const Eigen::VectorXd rhs = a.transpose() * w.asDiagonal() * y;
  return lhs.colPivHouseholderQr().solve(rhs);
}

TEST(Perturb, AnchorsInstanceAndAddsUnitNoise) {
  const std::vector<double> x{1.0, -2.0, 0.5};
  const auto s = perturb(x, 4000, nullptr, 3);
  ASSERT_EQ(s.rows(), 4000);
  for (int c = 0; c < 3; ++c) EXPECT_EQ(s(0, c), x[static_cast<std::size_t>(c)]);
  for (int c = 0; c < 3; ++c) {
    const Eigen::VectorXd off = s.col(c).tail(3999).array() - x[static_cast<std::size_t>(c)];
    const double m = off.mean();
    EXPECT_NEAR(m, 0.0, 0.06);
    EXPECT_NEAR((off.array() - m).square().mean(), 1.0, 0.08);
  }
  EXPECT_TRUE(perturb(x, 100, nullptr, 3) == perturb(x, 100, nullptr, 3));
}

TEST(Perturb, FreezesDegenerateColumnsAndValidates) {
  ScalerParams stats;
  stats.columns = {"a", "b"};
  stats.mean = {0.0, 4.0};
  stats.sd = {1.0, 0.0};
  stats.degenerate = {false, true};
  const std::vector<double> x{0.0, 4.0};
  const auto s = perturb(x, 60, stats, 1);
  EXPECT_TRUE((s.col(1).array() == 4.0).all());
  EXPECT_FALSE((s.col(0).array() == 0.0).all());
  try {
    perturb(x, 49, nullptr, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kParameter);
  }
  const std::vector<double> wide{0.0, 1.0, 2.0};
  EXPECT_THROW(perturb(wide, 60, stats, 1), Error);
}

TEST(Kernel, ExponentialOfScaledSquaredDistance) {
  EXPECT_EQ(kernel_weight(0.0, 2.0), 1.0);
  EXPECT_DOUBLE_EQ(kernel_weight(2.0, 2.0), std::exp(-1.0));
  EXPECT_DOUBLE_EQ(kernel_weight(3.0, 1.5), std::exp(-4.0));
  EXPECT_THROW(kernel_weight(1.0, 0.0), Error);
  EXPECT_THROW(kernel_weight(-1.0, 1.0), Error);
  EXPECT_DOUBLE_EQ(default_kernel_width(16), 3.0);
}

TEST(Ridge, MatchesDenseNormalEquations) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const int n = 80, d = 4;
    Matrix x(n, d);
    Eigen::VectorXd y(n), w(n);
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < d; ++c) x(r, c) = rng.normal();
      y(r) = rng.normal();
      w(r) = rng.uniform(0.1, 2.0);
    }
    const double ridge = seed % 2 ? 1e-3 : 0.7;
    const auto fit = weighted_ridge(x, y, w, ridge);
    const auto want = oracle_ridge(x, y, w, ridge);
    for (int c = 0; c < d; ++c) EXPECT_NEAR(fit.coefficients(c), want(c), 1e-10);
    EXPECT_NEAR(fit.intercept, want(d), 1e-10);
  }
}

TEST(Ridge, IntegerWeightsEqualRepeatedRows) {
  Rng rng(4);
  Matrix x(20, 2);
  Eigen::VectorXd y(20), w(20);
  std::vector<Eigen::Index> expanded;
  for (int r = 0; r < 20; ++r) {
    x(r, 0) = rng.normal();
    x(r, 1) = rng.normal();
    y(r) = rng.normal();
    w(r) = static_cast<double>(1 + r % 3);
    for (int k = 0; k < 1 + r % 3; ++k) expanded.push_back(r);
  }
  Matrix xe(static_cast<Eigen::Index>(expanded.size()), 2);
  Eigen::VectorXd ye(static_cast<Eigen::Index>(expanded.size()));
  for (std::size_t i = 0; i < expanded.size(); ++i) {
    xe.row(static_cast<Eigen::Index>(i)) = x.row(expanded[i]);
    ye(static_cast<Eigen::Index>(i)) = y(expanded[i]);
  }
  const auto a = weighted_ridge(x, y, w, 0.5);
  const auto b = weighted_ridge(xe, ye, Eigen::VectorXd::Ones(ye.size()), 0.5);
  EXPECT_TRUE(a.coefficients.isApprox(b.coefficients, 1e-12));
  EXPECT_NEAR(a.intercept, b.intercept, 1e-12);
  EXPECT_THROW(weighted_ridge(x, y, Eigen::VectorXd::Zero(20), 0.5), Error);
}

TEST(Surrogate, RecoversExactLinearTarget) {
  Rng rng(2);
  Matrix x(300, 6);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = rng.normal();
  }
  Eigen::VectorXd truth(6);
  truth << 0.0, 3.0, -2.0, 0.01, 1.0, 0.0;
  const Eigen::VectorXd y = (x * truth).array() + 0.5;
  const auto fit = fit_surrogate(x, y, Eigen::VectorXd::Ones(300), 3, 1e-9);
  EXPECT_EQ(fit.features, (std::vector<std::size_t>{1, 2, 4}));
  // The dropped 0.01 term leaks into the refit through sample correlation.
  EXPECT_NEAR(fit.coefficients(0), 3.0, 5e-3);
  EXPECT_NEAR(fit.coefficients(1), -2.0, 5e-3);
  EXPECT_NEAR(fit.intercept, 0.5, 1e-2);
  EXPECT_GT(fit.r2, 0.99);
}

TEST(Surrogate, ConstantTargetAndValidation) {
  Rng rng(1);
  Matrix x(60, 3);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = rng.normal();
  }
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(60, 0.3);
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(60);
  const auto fit = fit_surrogate(x, y, w, 2);
  EXPECT_LT(fit.coefficients.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(fit.intercept, 0.3, 1e-12);
  EXPECT_EQ(fit.r2, 1.0);
  EXPECT_THROW(fit_surrogate(x, y, w, 0), Error);
  EXPECT_THROW(fit_surrogate(x, y, w, 4), Error);
  Eigen::VectorXd bad = w;
  bad(3) = -1.0;
  EXPECT_THROW(fit_surrogate(x, y, bad, 2), Error);
}

TEST(Explain, LinearBlackBoxRecoversWeights) {
  Eigen::VectorXd w(8);
  w << 0.30, -0.20, 0.0, 0.10, 0.0, -0.05, 0.0, 0.0;
  const std::vector<double> x{0.2, -0.1, 1.0, 0.0, 0.5, 0.3, -0.7, 0.1};
  LimeOptions opts;
  opts.k = 4;
  const auto e = explain(linear_box(w, 0.5), x, names(8), opts, 9);
  ASSERT_EQ(e.feature_weights.size(), 4u);
  EXPECT_EQ(e.feature_weights[0].name, "f0");
  EXPECT_EQ(e.feature_weights[1].name, "f1");
  EXPECT_EQ(e.feature_weights[2].name, "f3");
  EXPECT_EQ(e.feature_weights[3].name, "f5");
  for (const auto& f : e.feature_weights) {
    EXPECT_NEAR(f.weight, w(static_cast<Eigen::Index>(f.index)), 1e-3) << f.name;
    EXPECT_EQ(f.attributed_class, f.weight > 0.0 ? 1 : 0);
    EXPECT_EQ(f.value, x[f.index]);
  }
  const double p1 = 0.5 + Eigen::Map<const Eigen::VectorXd>(x.data(), 8).dot(w);
  EXPECT_DOUBLE_EQ(e.p1, p1);
  EXPECT_DOUBLE_EQ(e.p0 + e.p1, 1.0);
  EXPECT_NEAR(e.local_prediction, p1, 1e-3);
  EXPECT_GT(e.surrogate_r2, 0.999);
  EXPECT_EQ(e.n_samples, 5000);
  EXPECT_DOUBLE_EQ(e.kernel_width, 0.75 * std::sqrt(8.0));
}

TEST(Explain, ConstantBlackBoxHasNoWeight) {
  ProbabilityFunction flat = [](const Matrix& x) -> Eigen::VectorXd { return Eigen::VectorXd::Constant(x.rows(), 0.42); };
  const std::vector<double> x{0.1, 0.2, 0.3, 0.4};
  LimeOptions opts;
  opts.k = 3;
  const auto e = explain(flat, x, names(4), opts, 1);
  for (const auto& f : e.feature_weights) EXPECT_LT(std::abs(f.weight), 1e-6);
  EXPECT_DOUBLE_EQ(e.p1, 0.42);
}

TEST(Explain, DeterministicAndRendersThreeSections) {
  Eigen::VectorXd w(5);
  w << 0.2, -0.3, 0.1, 0.0, 0.05;
  const std::vector<double> x{0.0, 0.1, 0.2, 0.3, 0.4};
  LimeOptions opts;
  opts.k = 3;
  opts.n_samples = 500;
  const auto a = explain(linear_box(w, 0.4), x, names(5), opts, 2);
  const auto b = explain(linear_box(w, 0.4), x, names(5), opts, 2);
  EXPECT_EQ(a, b);
  const auto text = a.render_text();
  const auto pp = text.find("Prediction probabilities");
  const auto c1 = text.find("Class 1 (trust)");
  const auto c0 = text.find("Class 0 (distrust)");
  ASSERT_NE(pp, std::string::npos);
  ASSERT_NE(c1, std::string::npos);
  ASSERT_NE(c0, std::string::npos);
  EXPECT_LT(pp, c1);
  EXPECT_LT(c1, c0);
  EXPECT_GT(text.find("f1"), c0);  // negative weight pushes toward class 0
  EXPECT_GT(text.find("f0"), c1);
  EXPECT_LT(text.find("f0"), c0);
  const auto j = a.to_json();
  EXPECT_DOUBLE_EQ(j["class_probabilities"]["0"].get<double>() + j["class_probabilities"]["1"].get<double>(), 1.0);
  EXPECT_EQ(j["features"].size(), 3u);
}

TEST(Explain, ShapeErrors) {
  const std::vector<double> x{0.0, 1.0};
  EXPECT_THROW(explain(linear_box(Eigen::VectorXd::Ones(2), 0.0), x, names(3), {}, 1), Error);
  ProbabilityFunction short_box = [](const Matrix&) -> Eigen::VectorXd { return Eigen::VectorXd::Zero(3); };
  EXPECT_THROW(explain(short_box, x, names(2), {.k = 1}, 1), Error);
}

FeatureTable records(std::uint64_t seed, std::size_t rows, std::size_t cols) {
  Rng rng(seed);
  FeatureTable t;
  t.columns = names(cols);
  t.x.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) t.x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rng.normal();
    t.y.push_back(static_cast<int>(r % 2));
    t.subject.push_back(static_cast<int>(r));
    t.row_id.push_back(r);
  }
  return t;
}

TEST(Influence, RanksByMeanAbsoluteWeight) {
  Eigen::VectorXd w(6);
  w << 0.01, -0.4, 0.0, 0.2, 0.0, 0.1;
  LimeOptions opts;
  opts.k = 3;
  opts.n_samples = 400;
  const auto t = records(3, 12, 6);
  const auto list = aggregate_influence(linear_box(w, 0.5), t, opts, 7);
  EXPECT_EQ(list.records_examined, 12u);
  const auto ranked = list.ranked_names();
  EXPECT_EQ(std::vector<std::string>(ranked.begin(), ranked.begin() + 3), (std::vector<std::string>{"f1", "f3", "f5"}));
  EXPECT_EQ(list.entries[0].topk_count, 12u);
  EXPECT_NEAR(list.entries[0].mean_abs_weight, 0.4, 1e-3);
  EXPECT_EQ(list.entries.back().topk_count, 0u);
  const auto csv = list.render_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "feature,mean_abs_weight,topk_count");

  const auto threaded = aggregate_influence(linear_box(w, 0.5), t, opts, 7, nullptr, 4);
  EXPECT_EQ(threaded.render_csv(), csv);
}

FeatureInfluenceList lime_list(const std::vector<std::string>& order) {
  FeatureInfluenceList l;
  for (std::size_t i = 0; i < order.size(); ++i) {
    l.entries.push_back({order[i], i, 1.0 / static_cast<double>(i + 1), 1});
  }
  return l;
}

RfeResult rfe_result(const std::vector<std::string>& features, const std::vector<int>& ranks,
                     const std::vector<double>& coef) {
  RfeResult r;
  r.features = features;
  r.ranking = ranks;
  r.coefficients = coef;
  for (int rank : ranks) r.support.push_back(rank == 1);
  return r;
}

TEST(Combine, IntersectionFirstThenAlternate) {
  // RFE selects {b, d, e}; best first: d, b, e, then a (rank 2), c, f.
  const auto rfe = rfe_result({"a", "b", "c", "d", "e", "f"}, {2, 1, 3, 1, 1, 4}, {0, 0.5, 0, 0.9, 0.1, 0});
  const auto lime = lime_list({"c", "d", "b", "a", "f", "e"});
  const std::vector<int> sizes{2, 4, 6};
  const auto combos = combine_lists(lime, rfe, sizes);
  ASSERT_EQ(combos.size(), 3u);
  // LIME head of length 3 is {c, d, b}; shared with RFE: d, b.
  EXPECT_EQ(combos[0], (std::vector<std::string>{"d", "b"}));
  EXPECT_EQ(combos[1], (std::vector<std::string>{"d", "b", "c", "e"}));
  EXPECT_EQ(combos[2], (std::vector<std::string>{"d", "b", "c", "e", "a", "f"}));
}

TEST(Combine, SizesAreValidatedAndUnique) {
  const auto rfe = rfe_result({"a", "b", "c"}, {1, 2, 3}, {1.0, 0.0, 0.0});
  const auto lime = lime_list({"b", "c", "a"});
  for (int bad : {0, 4}) {
    const std::vector<int> sizes{bad};
    EXPECT_THROW(combine_lists(lime, rfe, sizes), Error);
  }
  const std::vector<int> sizes{3};
  const auto combo = combine_lists(lime, rfe, sizes)[0];
  EXPECT_EQ(std::set<std::string>(combo.begin(), combo.end()).size(), 3u);
}

}  // namespace
}  // namespace trustsense
