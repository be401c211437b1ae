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
#include <cstdio>
#include <functional>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "trustsense/dataset.hpp"
#include "trustsense/error.hpp"
#include "trustsense/eval.hpp"
#include "trustsense/random.hpp"
#include "trustsense/rfe.hpp"

namespace trustsense {

// Black box: P(class 1) for every row of a standardized sample matrix.
using ProbabilityFunction = std::function<Eigen::VectorXd(const Matrix&)>;

inline ProbabilityFunction probability_function(const MlpModel& model) {
  return [&model](const Matrix& x) { return model.predict_proba(x); };
}

struct LimeOptions {
  int k = 10;
  int n_samples = 5000;
  // Defaults to 0.75 * sqrt(feature count).
  std::optional<double> kernel_width;
  double ridge = 1e-3;
};

inline double default_kernel_width(std::size_t feature_count) {
  return 0.75 * std::sqrt(static_cast<double>(feature_count));
}

// Row 0 is the instance itself; every other row adds independent N(0, 1)
// noise per feature. Columns that were constant in training (degenerate in
// `stats`) are not perturbed.
inline Matrix perturb(std::span<const double> x, int n_samples, const ScalerParams* stats, std::uint64_t seed) {
  if (n_samples < 50) fail(ErrorKind::kParameter, "LIME needs at least 50 samples, got " + std::to_string(n_samples));
  if (stats != nullptr && stats->columns.size() != x.size()) {
    fail(ErrorKind::kShape, "training statistics do not match the instance width");
  }
  const auto d = static_cast<Eigen::Index>(x.size());
  Matrix samples(n_samples, d);
  const Eigen::Map<const Eigen::RowVectorXd> instance(x.data(), d);
  samples.row(0) = instance;
  Rng rng(seed);
  for (Eigen::Index r = 1; r < n_samples; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) {
      const double noise = rng.normal();
      const bool frozen = stats != nullptr && stats->degenerate[static_cast<std::size_t>(c)];
      samples(r, c) = instance(c) + (frozen ? 0.0 : noise);
    }
  }
  return samples;
}

inline Matrix perturb(std::span<const double> x, int n_samples, const ScalerParams& stats, std::uint64_t seed) {
  return perturb(x, n_samples, &stats, seed);
}

// exp(-distance^2 / width^2)
inline double kernel_weight(double distance, double width) {
  if (!(width > 0.0)) fail(ErrorKind::kParameter, "kernel width must be positive");
  if (!(distance >= 0.0)) fail(ErrorKind::kParameter, "distance must be nonnegative");
  return std::exp(-(distance * distance) / (width * width));
}

struct RidgeFit {
  double intercept = 0.0;
  Eigen::VectorXd coefficients;
};

// Closed-form weighted ridge regression with an unpenalized intercept.
inline RidgeFit weighted_ridge(const Eigen::Ref<const Matrix>& x, const Eigen::VectorXd& target,
                               const Eigen::VectorXd& weights, double ridge) {
  const double total = weights.sum();
  if (!(total > 0.0)) fail(ErrorKind::kNumeric, "sample weights sum to zero");
  const Eigen::RowVectorXd x_mean = (weights.transpose() * x) / total;
  const double y_mean = weights.dot(target) / total;
  Matrix centered = x.rowwise() - x_mean;
  const Eigen::VectorXd sqrt_w = weights.cwiseSqrt();
  centered = sqrt_w.asDiagonal() * centered;
  const Eigen::VectorXd y_centered = sqrt_w.cwiseProduct((target.array() - y_mean).matrix());
  Eigen::MatrixXd gram = centered.transpose() * centered;
  gram.diagonal().array() += ridge;
  const Eigen::VectorXd rhs = centered.transpose() * y_centered;
  Eigen::LDLT<Eigen::MatrixXd> solver(gram);
  if (solver.info() != Eigen::Success || !solver.isPositive()) fail(ErrorKind::kNumeric, "ridge system is singular");
  RidgeFit fit;
  fit.coefficients = solver.solve(rhs);
  if (!fit.coefficients.allFinite()) fail(ErrorKind::kNumeric, "ridge system is singular");
  fit.intercept = y_mean - x_mean.dot(fit.coefficients);
  return fit;
}

struct SurrogateFit {
  double intercept = 0.0;
  std::vector<std::size_t> features;  // chosen columns, by |coefficient| descending
  Eigen::VectorXd coefficients;       // aligned with `features`
  double r2 = 0.0;                    // weighted, on the refit
};

// Chooses the K largest-|coefficient| features of a ridge fit on all
// features, then refits on those K.
inline SurrogateFit fit_surrogate(const Eigen::Ref<const Matrix>& samples, const Eigen::VectorXd& target,
                                  const Eigen::VectorXd& weights, int k, double ridge = 1e-3) {
  const auto d = samples.cols();
  if (k < 1 || k > d) fail(ErrorKind::kParameter, "K must lie in [1, " + std::to_string(d) + "]");
  if (target.size() != samples.rows() || weights.size() != samples.rows()) {
    fail(ErrorKind::kShape, "samples, target and weights differ in length");
  }
  if ((weights.array() <= 0.0).any()) fail(ErrorKind::kParameter, "sample weights must be positive");

  const auto full = weighted_ridge(samples, target, weights, ridge);
  std::vector<std::size_t> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(full.coefficients(static_cast<Eigen::Index>(a))) > std::abs(full.coefficients(static_cast<Eigen::Index>(b)));
  });
  order.resize(static_cast<std::size_t>(k));

  Matrix chosen(samples.rows(), k);
  for (int c = 0; c < k; ++c) chosen.col(c) = samples.col(static_cast<Eigen::Index>(order[static_cast<std::size_t>(c)]));
  const auto refit = weighted_ridge(chosen, target, weights, ridge);

  // Reported order follows the refit magnitudes.
  std::vector<std::size_t> perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(refit.coefficients(static_cast<Eigen::Index>(a))) > std::abs(refit.coefficients(static_cast<Eigen::Index>(b)));
  });
  SurrogateFit out;
  out.intercept = refit.intercept;
  out.coefficients.resize(k);
  for (int i = 0; i < k; ++i) {
    const auto src = perm[static_cast<std::size_t>(i)];
    out.features.push_back(order[src]);
    out.coefficients(i) = refit.coefficients(static_cast<Eigen::Index>(src));
  }

  const Eigen::VectorXd fitted = (chosen * refit.coefficients).array() + refit.intercept;
  const double total = weights.sum();
  const double y_mean = weights.dot(target) / total;
  const double ss_res = weights.dot((target - fitted).cwiseAbs2());
  const double ss_tot = weights.dot((target.array() - y_mean).square().matrix());
  // A constant target is reproduced exactly by the intercept.
  out.r2 = ss_tot > 0.0 ? std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0) : 1.0;
  return out;
}

struct FeatureWeight {
  std::string name;
  std::size_t index = 0;
  double value = 0.0;   // instance value (standardized)
  double weight = 0.0;  // surrogate coefficient
  int attributed_class = 0;  // 1 when weight > 0

  bool operator==(const FeatureWeight&) const = default;
};

struct Explanation {
  double p0 = 0.5;
  double p1 = 0.5;
  std::vector<FeatureWeight> feature_weights;  // |weight| descending
  double intercept = 0.0;
  double surrogate_r2 = 0.0;
  double local_prediction = 0.0;  // surrogate value at the instance
  int n_samples = 0;
  double kernel_width = 0.0;

  bool operator==(const Explanation&) const = default;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json features = nlohmann::ordered_json::array();
    for (const auto& f : feature_weights) {
      features.push_back({{"feature", f.name}, {"value", f.value}, {"weight", f.weight}, {"class", f.attributed_class}});
    }
    return {{"class_probabilities", {{"0", p0}, {"1", p1}}},
            {"intercept", intercept},
            {"local_prediction", local_prediction},
            {"surrogate_r2", surrogate_r2},
            {"n_samples", n_samples},
            {"kernel_width", kernel_width},
            {"features", features}};
  }

  // Three sections: class probabilities, features pushing toward class 1,
  // features pushing toward class 0.
  std::string render_text() const {
    std::string out;
    char buf[512];
    out += "Prediction probabilities\n";
    std::snprintf(buf, sizeof buf, "  0 (distrust)  %.2f\n  1 (trust)     %.2f\n", p0, p1);
    out += buf;
    for (int cls : {1, 0}) {
      out += cls == 1 ? "\nClass 1 (trust)\n" : "\nClass 0 (distrust)\n";
      bool any = false;
      for (const auto& f : feature_weights) {
        if (f.attributed_class != cls) continue;
        std::snprintf(buf, sizeof buf, "  %-40s %+.4f  (value %.4f)\n", f.name.c_str(), f.weight, f.value);
        out += buf;
        any = true;
      }
      if (!any) out += "  (none)\n";
    }
    std::snprintf(buf, sizeof buf, "\nSurrogate: intercept %.4f, local prediction %.4f, weighted R^2 %.4f\n", intercept,
                  local_prediction, surrogate_r2);
    out += buf;
    return out;
  }
};

inline Explanation explain(const ProbabilityFunction& black_box, std::span<const double> x,
                           std::span<const std::string> feature_names, const LimeOptions& options, std::uint64_t seed,
                           const ScalerParams* stats = nullptr) {
  if (feature_names.size() != x.size()) fail(ErrorKind::kShape, "feature names do not match the instance width");
  const double width = options.kernel_width.value_or(default_kernel_width(x.size()));
  const Matrix samples = perturb(x, options.n_samples, stats, seed);
  const Eigen::VectorXd probabilities = black_box(samples);
  if (probabilities.size() != samples.rows()) fail(ErrorKind::kShape, "black box returned the wrong number of rows");

  const Eigen::Map<const Eigen::RowVectorXd> instance(x.data(), static_cast<Eigen::Index>(x.size()));
  Eigen::VectorXd weights(samples.rows());
  for (Eigen::Index r = 0; r < samples.rows(); ++r) {
    weights(r) = kernel_weight((samples.row(r) - instance).norm(), width);
  }
  // Far samples can underflow to 0; keep them strictly positive.
  weights = weights.cwiseMax(std::numeric_limits<double>::min());
  const auto fit = fit_surrogate(samples, probabilities, weights, options.k, options.ridge);

  Explanation e;
  e.p1 = probabilities(0);
  e.p0 = 1.0 - e.p1;
  e.intercept = fit.intercept;
  e.surrogate_r2 = fit.r2;
  e.n_samples = options.n_samples;
  e.kernel_width = width;
  e.local_prediction = fit.intercept;
  for (std::size_t i = 0; i < fit.features.size(); ++i) {
    const auto idx = fit.features[i];
    const double w = fit.coefficients(static_cast<Eigen::Index>(i));
    e.local_prediction += w * x[idx];
    e.feature_weights.push_back({feature_names[idx], idx, x[idx], w, w > 0.0 ? 1 : 0});
  }
  return e;
}

struct InfluenceEntry {
  std::string name;
  std::size_t index = 0;
  double mean_abs_weight = 0.0;
  std::size_t topk_count = 0;
};

struct FeatureInfluenceList {
  std::vector<InfluenceEntry> entries;  // mean |weight| descending
  std::size_t records_examined = 0;

  std::vector<std::string> ranked_names() const {
    std::vector<std::string> out;
    for (const auto& e : entries) out.push_back(e.name);
    return out;
  }

  std::string render_csv() const {
    std::string out = "feature,mean_abs_weight,topk_count\n";
    char buf[64];
    for (const auto& e : entries) {
      std::snprintf(buf, sizeof buf, ",%.9g,%zu\n", e.mean_abs_weight, e.topk_count);
      out += '"' + e.name + '"' + buf;
    }
    return out;
  }
};

// Explains every row of `records` (already standardized) and aggregates mean
// |weight| (0 when a feature is outside a record's top K) and top-K counts.
inline FeatureInfluenceList aggregate_influence(const ProbabilityFunction& black_box, const FeatureTable& records,
                                                const LimeOptions& options, std::uint64_t seed,
                                                const ScalerParams* stats = nullptr, unsigned threads = 1) {
  if (records.rows() == 0) fail(ErrorKind::kParameter, "no records to explain");
  std::vector<Explanation> explanations(records.rows());
  detail::parallel_for(records.rows(), threads, [&](std::size_t r) {
    const Eigen::RowVectorXd row = records.x.row(static_cast<Eigen::Index>(r));
    explanations[r] = explain(black_box, std::span<const double>(row.data(), static_cast<std::size_t>(row.size())),
                              records.columns, options, derive_seed(seed, r), stats);
  });
  FeatureInfluenceList list;
  list.records_examined = records.rows();
  std::vector<double> sums(records.cols(), 0.0);
  std::vector<std::size_t> counts(records.cols(), 0);
  for (const auto& e : explanations) {
    for (const auto& f : e.feature_weights) {
      sums[f.index] += std::abs(f.weight);
      ++counts[f.index];
    }
  }
  for (std::size_t c = 0; c < records.cols(); ++c) {
    list.entries.push_back({records.columns[c], c, sums[c] / static_cast<double>(records.rows()), counts[c]});
  }
  std::stable_sort(list.entries.begin(), list.entries.end(),
                   [](const InfluenceEntry& a, const InfluenceEntry& b) { return a.mean_abs_weight > b.mean_abs_weight; });
  return list;
}

// Feature combinations from the LIME and RFE rankings. For each size: the
// features in both the RFE selection and the equally long LIME head (in LIME
// order), then alternately the next unused LIME and RFE features.
inline std::vector<std::vector<std::string>> combine_lists(const FeatureInfluenceList& lime, const RfeResult& rfe,
                                                           std::span<const int> sizes) {
  const auto lime_ranked = lime.ranked_names();
  const auto rfe_ranked = rfe.ranked();
  std::set<std::string> universe(lime_ranked.begin(), lime_ranked.end());
  universe.insert(rfe_ranked.begin(), rfe_ranked.end());
  const auto selected = rfe.selected();
  const std::set<std::string> rfe_set(selected.begin(), selected.end());
  const std::size_t head = std::min(selected.size(), lime_ranked.size());

  std::vector<std::vector<std::string>> out;
  for (int size : sizes) {
    if (size < 1 || static_cast<std::size_t>(size) > universe.size()) {
      fail(ErrorKind::kParameter, "combination size " + std::to_string(size) + " is out of range");
    }
    const auto target = static_cast<std::size_t>(size);
    std::vector<std::string> combo;
    std::set<std::string> used;
    auto take = [&](const std::string& name) {
      if (combo.size() < target && used.insert(name).second) combo.push_back(name);
    };
    for (std::size_t i = 0; i < head; ++i) {
      if (rfe_set.contains(lime_ranked[i])) take(lime_ranked[i]);
    }
    std::size_t li = 0, ri = 0;
    bool lime_turn = true;
    while (combo.size() < target && (li < lime_ranked.size() || ri < rfe_ranked.size())) {
      auto& list = lime_turn ? lime_ranked : rfe_ranked;
      auto& pos = lime_turn ? li : ri;
      while (pos < list.size() && used.contains(list[pos])) ++pos;
      if (pos < list.size()) take(list[pos++]);
      lime_turn = !lime_turn;
    }
    out.push_back(std::move(combo));
  }
  return out;
}

}  // namespace trustsense
