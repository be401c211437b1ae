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
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "trustsense/dataset.hpp"
#include "trustsense/error.hpp"
#include "trustsense/eval.hpp"

namespace trustsense {

struct LogisticOptions {
  double l2 = 1e-2;
  double tolerance = 1e-7;  // on the max-norm of the gradient
  int max_iterations = 20000;
};

struct LogisticFit {
  Eigen::VectorXd coefficients;
  double intercept = 0.0;
  int iterations = 0;
};

// L2-regularized logistic regression,
//   mean BCE(sigmoid(Xw + b), y) + l2/2 * |w|^2   (intercept unpenalized),
// minimized by accelerated gradient descent with step 1/L and adaptive
// restart. `warm_start` (coefficients, intercept) seeds the iterate.
inline LogisticFit fit_logistic(const Eigen::Ref<const Matrix>& x, std::span<const int> y,
                                const LogisticOptions& options = {}, const LogisticFit* warm_start = nullptr) {
  const auto n = x.rows();
  const auto d = x.cols();
  if (static_cast<std::size_t>(n) != y.size() || n == 0) fail(ErrorKind::kEstimator, "row and label counts differ");
  Eigen::VectorXd target(n);
  std::size_t positives = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int label = y[static_cast<std::size_t>(i)];
    if (label != 0 && label != 1) fail(ErrorKind::kEstimator, "labels must be 0 or 1");
    target(i) = label;
    positives += static_cast<std::size_t>(label);
  }
  if (positives == 0 || positives == static_cast<std::size_t>(n)) {
    fail(ErrorKind::kEstimator, "logistic regression needs both classes");
  }
  const double inv_n = 1.0 / static_cast<double>(n);

  // Largest eigenvalue of [X 1]^T [X 1] / n by power iteration.
  double top = 1.0;
  {
    Eigen::VectorXd v = Eigen::VectorXd::Ones(d + 1);
    v /= v.norm();
    for (int it = 0; it < 100; ++it) {
      const Eigen::VectorXd xv = x * v.head(d) + Eigen::VectorXd::Constant(n, v(d));
      Eigen::VectorXd w(d + 1);
      w.head(d) = x.transpose() * xv;
      w(d) = xv.sum();
      w *= inv_n;
      const double norm = w.norm();
      if (!(norm > 0.0)) break;
      const double next = norm;
      v = w / norm;
      if (std::abs(next - top) <= 1e-10 * next) {
        top = next;
        break;
      }
      top = next;
    }
  }
  // Power iteration approaches from below; pad so 1/L stays a safe step.
  const double lipschitz = 0.25 * top * 1.05 + options.l2;
  const double step = 1.0 / lipschitz;

  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  double b = 0.0;
  if (warm_start != nullptr && warm_start->coefficients.size() == d) {
    w = warm_start->coefficients;
    b = warm_start->intercept;
  }
  Eigen::VectorXd w_prev = w, w_look = w;
  double b_prev = b, b_look = b;
  double momentum = 1.0;

  auto gradient = [&](const Eigen::VectorXd& wv, double bv, Eigen::VectorXd& gw, double& gb) {
    Eigen::VectorXd z = x * wv;
    z.array() += bv;
    const Eigen::VectorXd residual = z.unaryExpr([](double v) { return sigmoid(v); }) - target;
    gw = inv_n * (x.transpose() * residual) + options.l2 * wv;
    gb = inv_n * residual.sum();
  };

  LogisticFit fit;
  Eigen::VectorXd gw(d);
  double gb = 0.0;
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    gradient(w_look, b_look, gw, gb);
    const double gmax = std::max(gw.size() ? gw.cwiseAbs().maxCoeff() : 0.0, std::abs(gb));
    if (gmax < options.tolerance) {
      w = w_look;
      b = b_look;
      break;
    }
    w_prev = w;
    b_prev = b;
    w = w_look - step * gw;
    b = b_look - step * gb;
    // Restart momentum when the step opposes the previous direction.
    const double progress = gw.dot(w - w_prev) + gb * (b - b_prev);
    double next_momentum = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    double beta = (momentum - 1.0) / next_momentum;
    if (progress > 0.0) {
      next_momentum = 1.0;
      beta = 0.0;
    }
    momentum = next_momentum;
    w_look = w + beta * (w - w_prev);
    b_look = b + beta * (b - b_prev);
  }
  fit.coefficients = w;
  fit.intercept = b;
  fit.iterations = it;
  for (Eigen::Index i = 0; i < d; ++i) {
    if (!std::isfinite(w(i))) fail(ErrorKind::kEstimator, "logistic regression diverged");
  }
  return fit;
}

struct RfeResult {
  std::vector<std::string> features;
  std::vector<bool> support;
  // 1 for selected features; features removed in the last elimination get 2,
  // earlier removals get larger ranks.
  std::vector<int> ranking;
  int n_features_target = 0;
  // Surviving feature indices before each elimination step, then the final
  // selection.
  std::vector<std::vector<std::size_t>> trace;
  // Coefficients of the final fit on the selected features (0 elsewhere).
  std::vector<double> coefficients;

  std::vector<std::string> selected() const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < support.size(); ++i) {
      if (support[i]) idx.push_back(i);
    }
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return std::abs(coefficients[a]) > std::abs(coefficients[b]); });
    std::vector<std::string> out;
    for (auto i : idx) out.push_back(features[i]);
    return out;
  }

  // All features, best first: by rank, then by final |coefficient|, then by
  // column order.
  std::vector<std::string> ranked() const {
    std::vector<std::size_t> idx(features.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      if (ranking[a] != ranking[b]) return ranking[a] < ranking[b];
      return std::abs(coefficients[a]) > std::abs(coefficients[b]);
    });
    std::vector<std::string> out;
    for (auto i : idx) out.push_back(features[i]);
    return out;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < features.size(); ++i) {
      j[features[i]] = {{"selected", static_cast<bool>(support[i])}, {"rank", ranking[i]}};
    }
    return j;
  }
};

struct RfeOptions {
  LogisticOptions estimator{};
};

// Recursive feature elimination with a logistic-regression base estimator.
// The table should be standardized so coefficient magnitudes are comparable.
// The estimator is deterministic; `seed` is accepted for interface symmetry
// with the other selection steps and does not change the result.
inline RfeResult rfe_select(const FeatureTable& table, int n_features, int step = 1, std::uint64_t seed = 0,
                            const RfeOptions& options = {}) {
  (void)seed;
  const auto total = static_cast<int>(table.cols());
  if (n_features < 1 || n_features >= total) {
    fail(ErrorKind::kParameter, "n_features must lie in [1, " + std::to_string(total - 1) + "], got " +
                                    std::to_string(n_features));
  }
  if (step < 1) fail(ErrorKind::kParameter, "step must be at least 1");

  RfeResult result;
  result.features = table.columns;
  result.n_features_target = n_features;
  result.support.assign(table.cols(), false);
  result.ranking.assign(table.cols(), 1);
  result.coefficients.assign(table.cols(), 0.0);

  std::vector<std::size_t> survivors(table.cols());
  std::iota(survivors.begin(), survivors.end(), std::size_t{0});
  std::vector<std::vector<std::size_t>> removed_per_step;
  LogisticFit warm;
  bool have_warm = false;

  auto fit_on = [&](const std::vector<std::size_t>& cols) {
    Matrix sub(table.x.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) {
      sub.col(static_cast<Eigen::Index>(c)) = table.x.col(static_cast<Eigen::Index>(cols[c]));
    }
    auto fit = fit_logistic(sub, table.y, options.estimator, have_warm ? &warm : nullptr);
    warm = fit;
    have_warm = true;
    return fit;
  };

  while (static_cast<int>(survivors.size()) > n_features) {
    result.trace.push_back(survivors);
    const auto fit = fit_on(survivors);
    const auto remove = std::min<std::size_t>(static_cast<std::size_t>(step), survivors.size() - static_cast<std::size_t>(n_features));
    std::vector<std::size_t> order(survivors.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return std::abs(fit.coefficients(static_cast<Eigen::Index>(a))) < std::abs(fit.coefficients(static_cast<Eigen::Index>(b)));
    });
    std::vector<bool> drop(survivors.size(), false);
    for (std::size_t i = 0; i < remove; ++i) drop[order[i]] = true;
    std::vector<std::size_t> next;
    std::vector<std::size_t> removed;
    Eigen::VectorXd kept_coef(static_cast<Eigen::Index>(survivors.size() - remove));
    Eigen::Index kc = 0;
    for (std::size_t i = 0; i < survivors.size(); ++i) {
      if (drop[i]) {
        removed.push_back(survivors[i]);
      } else {
        next.push_back(survivors[i]);
        kept_coef(kc++) = fit.coefficients(static_cast<Eigen::Index>(i));
      }
    }
    warm.coefficients = kept_coef;
    removed_per_step.push_back(std::move(removed));
    survivors = std::move(next);
  }
  result.trace.push_back(survivors);

  const auto steps = removed_per_step.size();
  for (std::size_t s = 0; s < steps; ++s) {
    for (auto f : removed_per_step[s]) result.ranking[f] = static_cast<int>(steps - s) + 1;
  }
  const auto final_fit = fit_on(survivors);
  for (std::size_t i = 0; i < survivors.size(); ++i) {
    result.support[survivors[i]] = true;
    result.coefficients[survivors[i]] = final_fit.coefficients(static_cast<Eigen::Index>(i));
  }
  return result;
}

struct SweepPoint {
  int n_features = 0;
  double mean_accuracy = 0.0;
  std::vector<std::string> selected;
};

// For each n in [lo, hi]: the RFE selection of size n, scored by k-fold mean
// accuracy of `learner`. With step 1 the elimination path is shared, so one
// RFE run to size lo yields every selection.
template <Learner L>
std::vector<SweepPoint> rfe_sweep(const FeatureTable& table, int lo, int hi, const L& learner, int k,
                                  std::uint64_t seed, int step = 1, const RfeOptions& options = {},
                                  const EvalOptions& eval_options = {}) {
  if (lo > hi) fail(ErrorKind::kParameter, "sweep range is empty");
  std::vector<SweepPoint> out;
  RfeResult shared;
  if (step == 1) shared = rfe_select(table, lo, 1, seed, options);
  for (int n = lo; n <= hi; ++n) {
    SweepPoint p;
    p.n_features = n;
    if (step == 1) {
      // trace holds survivor sets of size total, total-1, ..., lo
      const auto& survivors = shared.trace[shared.trace.size() - 1 - static_cast<std::size_t>(n - lo)];
      for (auto i : survivors) p.selected.push_back(table.columns[i]);
    } else {
      p.selected = rfe_select(table, n, step, seed, options).selected();
    }
    p.mean_accuracy = kfold_evaluate(table, learner, p.selected, k, seed, eval_options).accuracy.mean;
    out.push_back(std::move(p));
  }
  return out;
}

inline std::string render_sweep_csv(std::span<const SweepPoint> sweep) {
  std::string out = "n_features,mean_accuracy\n";
  for (const auto& p : sweep) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%d,%.6f\n", p.n_features, p.mean_accuracy);
    out += buf;
  }
  return out;
}

}  // namespace trustsense
