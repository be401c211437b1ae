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
#include <chrono>
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
#include "trustsense/random.hpp"

namespace trustsense {

enum class Activation { kRelu, kSigmoid, kLinear };
enum class OptimizerKind { kAdam, kRmsprop };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kLinear: return "linear";
  }
  return "?";
}

inline std::string to_string(OptimizerKind o) { return o == OptimizerKind::kAdam ? "adam" : "rmsprop"; }

inline Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "sigmoid") return Activation::kSigmoid;
  if (s == "linear") return Activation::kLinear;
  fail(ErrorKind::kBuild, "unknown activation '" + std::string(s) + "'");
}

inline OptimizerKind parse_optimizer(std::string_view s) {
  if (s == "adam") return OptimizerKind::kAdam;
  if (s == "rmsprop") return OptimizerKind::kRmsprop;
  fail(ErrorKind::kParameter, "unknown optimizer '" + std::string(s) + "'");
}

struct LayerSpec {
  enum class Kind { kDense, kDropout };
  Kind kind = Kind::kDense;
  int width = 0;  // dense only
  Activation activation = Activation::kRelu;
  double rate = 0.0;  // dropout only

  static LayerSpec dense(int width, Activation act) { return {Kind::kDense, width, act, 0.0}; }
  static LayerSpec dropout(double rate) { return {Kind::kDropout, 0, Activation::kLinear, rate}; }

  bool operator==(const LayerSpec&) const = default;
};

struct Hyperparameters {
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double learning_rate = 0.01;
  double dropout_rate = 0.2;
  int batch_size = 64;
  int epochs = 130;
  std::uint64_t seed = 0;
};

struct ModelSpec {
  int input_width = 0;
  // Hidden and output layers in order; the last one is the output unit.
  std::vector<LayerSpec> layers;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double learning_rate = 0.01;
  int batch_size = 64;
  int epochs = 130;
  std::uint64_t seed = 0;
  // Adam: beta1, beta2, epsilon. RMSprop uses rho and epsilon.
  double beta1 = 0.9;
  double beta2 = 0.999;
  double rho = 0.9;
  double epsilon = 1e-8;

  bool operator==(const ModelSpec&) const = default;

  void validate() const {
    if (input_width < 1) fail(ErrorKind::kBuild, "input width must be at least 1");
    if (layers.empty()) fail(ErrorKind::kBuild, "model needs an output layer");
    for (const auto& l : layers) {
      if (l.kind == LayerSpec::Kind::kDense && l.width < 1) fail(ErrorKind::kBuild, "layer widths must be at least 1");
      if (l.kind == LayerSpec::Kind::kDropout && !(l.rate >= 0.0 && l.rate < 1.0)) {
        fail(ErrorKind::kBuild, "dropout rate must lie in [0,1)");
      }
    }
    const auto& out = layers.back();
    if (out.kind != LayerSpec::Kind::kDense || out.width != 1 || out.activation != Activation::kSigmoid) {
      fail(ErrorKind::kBuild, "output layer must be a single sigmoid unit");
    }
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
      fail(ErrorKind::kBuild, "learning rate must be nonnegative");
    }
    if (batch_size < 1) fail(ErrorKind::kBuild, "batch size must be at least 1");
    if (epochs < 0) fail(ErrorKind::kBuild, "epochs must be nonnegative");
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json layers_json = nlohmann::ordered_json::array();
    for (const auto& l : layers) {
      if (l.kind == LayerSpec::Kind::kDense) {
        layers_json.push_back({{"type", "dense"}, {"width", l.width}, {"activation", to_string(l.activation)}});
      } else {
        layers_json.push_back({{"type", "dropout"}, {"rate", l.rate}});
      }
    }
    return {{"input_width", input_width}, {"layers", layers_json},      {"optimizer", to_string(optimizer)},
            {"learning_rate", learning_rate}, {"batch_size", batch_size}, {"epochs", epochs},
            {"seed", seed},                 {"beta1", beta1},           {"beta2", beta2},
            {"rho", rho},                   {"epsilon", epsilon}};
  }

  static ModelSpec from_json(const nlohmann::ordered_json& j) {
    ModelSpec s;
    s.input_width = j.at("input_width").get<int>();
    for (const auto& l : j.at("layers")) {
      const auto type = l.at("type").get<std::string>();
      if (type == "dense") {
        s.layers.push_back(LayerSpec::dense(l.at("width").get<int>(), parse_activation(l.at("activation").get<std::string>())));
      } else if (type == "dropout") {
        s.layers.push_back(LayerSpec::dropout(l.at("rate").get<double>()));
      } else {
        fail(ErrorKind::kBuild, "unknown layer type '" + type + "'");
      }
    }
    s.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
    s.learning_rate = j.at("learning_rate").get<double>();
    s.batch_size = j.at("batch_size").get<int>();
    s.epochs = j.at("epochs").get<int>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.beta1 = j.value("beta1", 0.9);
    s.beta2 = j.value("beta2", 0.999);
    s.rho = j.value("rho", 0.9);
    s.epsilon = j.value("epsilon", 1e-8);
    return s;
  }

  ModelSpec with_input_width(int width) const {
    ModelSpec s = *this;
    s.input_width = width;
    return s;
  }
};

inline ModelSpec apply_hyperparameters(ModelSpec spec, const Hyperparameters& h) {
  spec.optimizer = h.optimizer;
  spec.learning_rate = h.learning_rate;
  spec.batch_size = h.batch_size;
  spec.epochs = h.epochs;
  spec.seed = h.seed;
  return spec;
}

// Shallow network: two relu layers of 100, rmsprop.
inline ModelSpec model1_spec(int input_width, Hyperparameters h = {.optimizer = OptimizerKind::kRmsprop}) {
  ModelSpec s;
  s.input_width = input_width;
  s.layers = {LayerSpec::dense(100, Activation::kRelu), LayerSpec::dense(100, Activation::kRelu),
              LayerSpec::dense(1, Activation::kSigmoid)};
  return apply_hyperparameters(s, h);
}

// Deep network: four relu layers of 100 with dropout after the second, adam.
inline ModelSpec model2_spec(int input_width, Hyperparameters h = {}) {
  ModelSpec s;
  s.input_width = input_width;
  s.layers = {LayerSpec::dense(100, Activation::kRelu), LayerSpec::dense(100, Activation::kRelu),
              LayerSpec::dropout(h.dropout_rate),       LayerSpec::dense(100, Activation::kRelu),
              LayerSpec::dense(100, Activation::kRelu), LayerSpec::dense(1, Activation::kSigmoid)};
  return apply_hyperparameters(s, h);
}

struct TrainReport {
  std::vector<double> epoch_loss;
  double training_accuracy = 0.0;
  double wall_time_s = 0.0;
};

// Probabilities are clamped to [kProbFloor, 1 - kProbFloor] inside the log.
inline constexpr double kProbFloor = 1e-12;
// Logits are clamped so the sigmoid never rounds to exactly 0 or 1.
inline constexpr double kLogitClamp = 30.0;

inline double sigmoid(double z) {
  z = std::clamp(z, -kLogitClamp, kLogitClamp);
  return 1.0 / (1.0 + std::exp(-z));
}

inline double binary_cross_entropy(double p, int y) {
  p = std::clamp(p, kProbFloor, 1.0 - kProbFloor);
  return y == 1 ? -std::log(p) : -std::log(1.0 - p);
}

class MlpModel {
 public:
  struct Layer {
    LayerSpec spec;
    Eigen::MatrixXd weights;   // fan_in x fan_out
    Eigen::RowVectorXd bias;   // fan_out
  };

  MlpModel() = default;

  // He-uniform weights for relu layers, Glorot-uniform otherwise, zero
  // biases, all drawn from the spec's seed.
  static MlpModel build(const ModelSpec& spec) {
    spec.validate();
    MlpModel m;
    m.spec_ = spec;
    Rng rng(derive_seed(spec.seed, 0x1417));
    int width = spec.input_width;
    for (const auto& ls : spec.layers) {
      Layer layer{ls, {}, {}};
      if (ls.kind == LayerSpec::Kind::kDense) {
        const double limit = ls.activation == Activation::kRelu ? std::sqrt(6.0 / width)
                                                                 : std::sqrt(6.0 / (width + ls.width));
        layer.weights.resize(width, ls.width);
        for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
          for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) layer.weights(r, c) = rng.uniform(-limit, limit);
        }
        layer.bias = Eigen::RowVectorXd::Zero(ls.width);
        width = ls.width;
      }
      m.layers_.push_back(std::move(layer));
    }
    m.reset_optimizer_state();
    return m;
  }

  const ModelSpec& spec() const { return spec_; }
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
    return n;
  }

  // Flat parameter order: per dense layer, weights column-major then bias.
  Eigen::VectorXd parameters() const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index pos = 0;
    for (const auto& l : layers_) {
      out.segment(pos, l.weights.size()) = l.weights.reshaped();
      pos += l.weights.size();
      out.segment(pos, l.bias.size()) = l.bias.transpose();
      pos += l.bias.size();
    }
    return out;
  }

  void set_parameters(const Eigen::VectorXd& flat) {
    if (flat.size() != static_cast<Eigen::Index>(parameter_count())) {
      fail(ErrorKind::kShape, "parameter vector has the wrong length");
    }
    Eigen::Index pos = 0;
    for (auto& l : layers_) {
      l.weights.reshaped() = flat.segment(pos, l.weights.size());
      pos += l.weights.size();
      l.bias = flat.segment(pos, l.bias.size()).transpose();
      pos += l.bias.size();
    }
  }

  // P(class 1) per row, inference mode (dropout is the identity).
  Eigen::VectorXd predict_proba(const Eigen::Ref<const Matrix>& x) const {
    if (x.cols() != spec_.input_width) {
      fail(ErrorKind::kShape, "input has " + std::to_string(x.cols()) + " features, model expects " +
                                  std::to_string(spec_.input_width));
    }
    Eigen::VectorXd out(x.rows());
    constexpr Eigen::Index kChunk = 1024;
    for (Eigen::Index start = 0; start < x.rows(); start += kChunk) {
      const auto len = std::min(kChunk, x.rows() - start);
      Eigen::MatrixXd a = x.middleRows(start, len);
      for (const auto& l : layers_) {
        if (l.spec.kind == LayerSpec::Kind::kDropout) continue;
        Eigen::MatrixXd z = a * l.weights;
        z.rowwise() += l.bias;
        a = activate(z, l.spec.activation);
      }
      out.segment(start, len) = a.col(0);
    }
    return out;
  }

  double predict_proba(std::span<const double> x) const {
    Matrix row = Eigen::Map<const Eigen::RowVectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    return predict_proba(row)(0);
  }

  // Tie at the threshold goes to class 1.
  int classify(std::span<const double> x, double threshold = 0.5) const {
    return predict_proba(x) >= threshold ? 1 : 0;
  }

  std::vector<int> classify(const Eigen::Ref<const Matrix>& x, double threshold = 0.5) const {
    const auto p = predict_proba(x);
    std::vector<int> out(static_cast<std::size_t>(p.size()));
    for (Eigen::Index i = 0; i < p.size(); ++i) out[static_cast<std::size_t>(i)] = p(i) >= threshold ? 1 : 0;
    return out;
  }

  struct LossAndGradient {
    double loss = 0.0;
    Eigen::VectorXd gradient;  // flat, same order as parameters()
  };

  // Mean binary cross-entropy over the batch and its gradient, with dropout
  // disabled.
  LossAndGradient loss_and_gradient(const Eigen::Ref<const Matrix>& x, std::span<const int> y) const {
    Pass pass = forward(x, nullptr);
    std::vector<Eigen::MatrixXd> grad_w, grad_b;
    const double loss = backward(pass, y, grad_w, grad_b);
    LossAndGradient out;
    out.loss = loss;
    out.gradient.resize(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index pos = 0;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      out.gradient.segment(pos, grad_w[i].size()) = grad_w[i].reshaped();
      pos += grad_w[i].size();
      out.gradient.segment(pos, grad_b[i].size()) = grad_b[i].reshaped();
      pos += grad_b[i].size();
    }
    return out;
  }

  double loss(const Eigen::Ref<const Matrix>& x, std::span<const int> y) const {
    const auto p = predict_proba(x);
    double total = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) total += binary_cross_entropy(p(i), y[static_cast<std::size_t>(i)]);
    return total / static_cast<double>(p.size());
  }

  // Mini-batch training on binary cross-entropy. Rows are reshuffled every
  // epoch and dropout masks drawn from the same seeded stream.
  TrainReport train(const Eigen::Ref<const Matrix>& x, std::span<const int> y) {
    if (static_cast<std::size_t>(x.rows()) != y.size()) fail(ErrorKind::kShape, "row and label counts differ");
    if (x.cols() != spec_.input_width) {
      fail(ErrorKind::kShape, "input has " + std::to_string(x.cols()) + " features, model expects " +
                                  std::to_string(spec_.input_width));
    }
    if (x.rows() == 0) fail(ErrorKind::kTraining, "no training rows");
    for (int label : y) {
      if (label != 0 && label != 1) fail(ErrorKind::kTraining, "labels must be 0 or 1");
    }
    const auto started = std::chrono::steady_clock::now();
    TrainReport report;
    Rng rng(derive_seed(spec_.seed, 0x7A1));
    std::vector<std::size_t> order(static_cast<std::size_t>(x.rows()));
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto batch = static_cast<std::size_t>(spec_.batch_size);
    Matrix xb;
    std::vector<int> yb;
    std::vector<Eigen::MatrixXd> grad_w, grad_b;

    for (int epoch = 0; epoch < spec_.epochs; ++epoch) {
      rng.shuffle(order);
      double epoch_total = 0.0;
      for (std::size_t start = 0; start < order.size(); start += batch) {
        const std::size_t len = std::min(batch, order.size() - start);
        xb.resize(static_cast<Eigen::Index>(len), x.cols());
        yb.resize(len);
        for (std::size_t i = 0; i < len; ++i) {
          xb.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(order[start + i]));
          yb[i] = y[order[start + i]];
        }
        Pass pass = forward(xb, &rng);
        const double batch_loss = backward(pass, yb, grad_w, grad_b);
        epoch_total += batch_loss * static_cast<double>(len);
        step(grad_w, grad_b);
      }
      const double epoch_loss = epoch_total / static_cast<double>(order.size());
      if (!std::isfinite(epoch_loss)) {
        fail(ErrorKind::kTraining, "loss diverged at epoch " + std::to_string(epoch + 1));
      }
      report.epoch_loss.push_back(epoch_loss);
    }
    const auto predicted = classify(x);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == y[i] ? 1 : 0;
    report.training_accuracy = static_cast<double>(correct) / static_cast<double>(predicted.size());
    report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
  }

  TrainReport train(const FeatureTable& table) { return train(table.x, table.y); }

  void reset_optimizer_state() {
    step_count_ = 0;
    moment1_w_.clear();
    moment1_b_.clear();
    moment2_w_.clear();
    moment2_b_.clear();
    for (const auto& l : layers_) {
      moment1_w_.push_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
      moment2_w_.push_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
      moment1_b_.push_back(Eigen::MatrixXd::Zero(1, l.bias.size()));
      moment2_b_.push_back(Eigen::MatrixXd::Zero(1, l.bias.size()));
    }
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json layers = nlohmann::ordered_json::array();
    for (const auto& l : layers_) {
      if (l.spec.kind != LayerSpec::Kind::kDense) continue;
      std::vector<double> w(l.weights.data(), l.weights.data() + l.weights.size());
      std::vector<double> b(l.bias.data(), l.bias.data() + l.bias.size());
      layers.push_back({{"fan_in", l.weights.rows()}, {"fan_out", l.weights.cols()}, {"weights", w}, {"bias", b}});
    }
    return {{"format", "trustsense-mlp"}, {"version", 1}, {"spec", spec_.to_json()}, {"dense_layers", layers}};
  }

  static MlpModel from_json(const nlohmann::ordered_json& j) {
    if (j.value("format", "") != "trustsense-mlp") fail(ErrorKind::kParse, "not a trustsense model file");
    MlpModel m = build(ModelSpec::from_json(j.at("spec")));
    const auto& dense = j.at("dense_layers");
    std::size_t d = 0;
    for (auto& l : m.layers_) {
      if (l.spec.kind != LayerSpec::Kind::kDense) continue;
      if (d >= dense.size()) fail(ErrorKind::kParse, "model file has too few dense layers");
      const auto w = dense[d].at("weights").get<std::vector<double>>();
      const auto b = dense[d].at("bias").get<std::vector<double>>();
      if (w.size() != static_cast<std::size_t>(l.weights.size()) || b.size() != static_cast<std::size_t>(l.bias.size())) {
        fail(ErrorKind::kParse, "dense layer " + std::to_string(d) + " has the wrong shape");
      }
      l.weights.reshaped() = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
      l.bias = Eigen::Map<const Eigen::RowVectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
      ++d;
    }
    if (d != dense.size()) fail(ErrorKind::kParse, "model file has too many dense layers");
    return m;
  }

 private:
  struct Pass {
    std::vector<Eigen::MatrixXd> inputs;  // input to each layer
    std::vector<Eigen::MatrixXd> pre;     // dense: pre-activation; dropout: scaled mask
    Eigen::MatrixXd output;
  };

  static Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Activation act) {
    switch (act) {
      case Activation::kRelu: return z.cwiseMax(0.0);
      case Activation::kSigmoid: return z.unaryExpr([](double v) { return sigmoid(v); });
      case Activation::kLinear: return z;
    }
    return z;
  }

  // rng == nullptr means inference mode.
  Pass forward(const Eigen::Ref<const Matrix>& x, Rng* rng) const {
    Pass pass;
    Eigen::MatrixXd a = x;
    for (const auto& l : layers_) {
      pass.inputs.push_back(a);
      if (l.spec.kind == LayerSpec::Kind::kDropout) {
        Eigen::MatrixXd mask = Eigen::MatrixXd::Ones(a.rows(), a.cols());
        if (rng != nullptr && l.spec.rate > 0.0) {
          const double keep = 1.0 - l.spec.rate;
          for (Eigen::Index c = 0; c < mask.cols(); ++c) {
            for (Eigen::Index r = 0; r < mask.rows(); ++r) mask(r, c) = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
          }
        }
        a = a.cwiseProduct(mask);
        pass.pre.push_back(std::move(mask));
        continue;
      }
      Eigen::MatrixXd z = a * l.weights;
      z.rowwise() += l.bias;
      a = activate(z, l.spec.activation);
      pass.pre.push_back(std::move(z));
    }
    pass.output = std::move(a);
    return pass;
  }

  // Fills per-layer gradients of the mean loss; returns the mean loss.
  double backward(const Pass& pass, std::span<const int> y, std::vector<Eigen::MatrixXd>& grad_w,
                  std::vector<Eigen::MatrixXd>& grad_b) const {
    const auto m = pass.output.rows();
    grad_w.resize(layers_.size());
    grad_b.resize(layers_.size());
    double total = 0.0;
    // Sigmoid output with cross-entropy: dL/dz = (p - y) / m.
    Eigen::MatrixXd delta(m, 1);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double p = pass.output(i, 0);
      const int label = y[static_cast<std::size_t>(i)];
      total += binary_cross_entropy(p, label);
      delta(i, 0) = (p - static_cast<double>(label)) / static_cast<double>(m);
    }
    bool at_output = true;
    for (std::size_t idx = layers_.size(); idx-- > 0;) {
      const auto& l = layers_[idx];
      if (l.spec.kind == LayerSpec::Kind::kDropout) {
        delta = delta.cwiseProduct(pass.pre[idx]);
        grad_w[idx].resize(0, 0);
        grad_b[idx].resize(0, 0);
        continue;
      }
      if (!at_output) {
        if (l.spec.activation == Activation::kRelu) {
          delta = delta.cwiseProduct((pass.pre[idx].array() > 0.0).cast<double>().matrix());
        } else if (l.spec.activation == Activation::kSigmoid) {
          const Eigen::MatrixXd s = activate(pass.pre[idx], Activation::kSigmoid);
          delta = delta.cwiseProduct(s.cwiseProduct((1.0 - s.array()).matrix()));
        }
      }
      at_output = false;
      grad_w[idx].noalias() = pass.inputs[idx].transpose() * delta;
      grad_b[idx] = delta.colwise().sum();
      if (idx > 0) delta = delta * l.weights.transpose();
    }
    return total / static_cast<double>(m);
  }

  void step(const std::vector<Eigen::MatrixXd>& grad_w, const std::vector<Eigen::MatrixXd>& grad_b) {
    ++step_count_;
    const double lr = spec_.learning_rate;
    const double eps = spec_.epsilon;
    if (spec_.optimizer == OptimizerKind::kAdam) {
      const double b1 = spec_.beta1;
      const double b2 = spec_.beta2;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_count_));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_count_));
      auto update = [&](auto& param, const Eigen::MatrixXd& g, Eigen::MatrixXd& m1, Eigen::MatrixXd& m2) {
        m1 = b1 * m1 + (1.0 - b1) * g;
        m2 = b2 * m2 + (1.0 - b2) * g.cwiseProduct(g);
        param.reshaped() -= (lr * (m1.array() / c1) / ((m2.array() / c2).sqrt() + eps)).matrix().reshaped();
      };
      for (std::size_t i = 0; i < layers_.size(); ++i) {
        if (layers_[i].spec.kind != LayerSpec::Kind::kDense) continue;
        update(layers_[i].weights, grad_w[i], moment1_w_[i], moment2_w_[i]);
        update(layers_[i].bias, grad_b[i], moment1_b_[i], moment2_b_[i]);
      }
    } else {
      const double rho = spec_.rho;
      auto update = [&](auto& param, const Eigen::MatrixXd& g, Eigen::MatrixXd& ms) {
        ms = rho * ms + (1.0 - rho) * g.cwiseProduct(g);
        param.reshaped() -= (lr * g.array() / (ms.array().sqrt() + eps)).matrix().reshaped();
      };
      for (std::size_t i = 0; i < layers_.size(); ++i) {
        if (layers_[i].spec.kind != LayerSpec::Kind::kDense) continue;
        update(layers_[i].weights, grad_w[i], moment2_w_[i]);
        update(layers_[i].bias, grad_b[i], moment2_b_[i]);
      }
    }
  }

  ModelSpec spec_;
  std::vector<Layer> layers_;
  long long step_count_ = 0;
  std::vector<Eigen::MatrixXd> moment1_w_, moment1_b_, moment2_w_, moment2_b_;
};

inline MlpModel build(const ModelSpec& spec) { return MlpModel::build(spec); }

// Largest relative difference between the analytic gradient and central
// finite differences (step h) over every parameter. Dropout is disabled.
inline double gradient_check(const MlpModel& model, const Eigen::Ref<const Matrix>& x, std::span<const int> y,
                             double h = 1e-5) {
  const auto analytic = model.loss_and_gradient(x, y).gradient;
  MlpModel probe = model;
  const Eigen::VectorXd base = model.parameters();
  Eigen::VectorXd params = base;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < base.size(); ++i) {
    params(i) = base(i) + h;
    probe.set_parameters(params);
    const double up = probe.loss(x, y);
    params(i) = base(i) - h;
    probe.set_parameters(params);
    const double down = probe.loss(x, y);
    params(i) = base(i);
    const double numeric = (up - down) / (2.0 * h);
    const double scale = std::max(std::abs(analytic(i)), std::abs(numeric));
    if (scale == 0.0) continue;
    worst = std::max(worst, std::abs(analytic(i) - numeric) / scale);
  }
  return worst;
}

}  // namespace trustsense
