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
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "trustsense/error.hpp"
#include "trustsense/random.hpp"
#include "trustsense/signal_features.hpp"
#include "trustsense/strings.hpp"

namespace trustsense {

// Per-class generative profile. Band gains scale the oscillatory power of the
// target channels; coupling mixes a shared source into C3/C4/F3/F4.
struct ClassProfile {
  std::array<double, 4> band_gain{1.0, 1.0, 1.0, 1.0};
  double coupling = 0.3;
  double posterior_delta_gain = 1.0;
  double gsr_event_rate = 0.3;       // events per second
  double gsr_event_amplitude = 0.3;  // microsiemens
};

struct SynthSpec {
  double sampling_rate = 128.0;
  double duration_s = 2.0;
  double noise_level = 1.0;
  int subjects = 45;
  std::uint64_t seed = 7;
  std::array<double, 4> band_amplitude{12.0, 8.0, 6.0, 4.0};  // microvolts
  std::vector<std::string> target_channels{"C3", "C4", "Cz", "P4"};
  std::array<ClassProfile, 2> profiles{
      ClassProfile{},
      ClassProfile{{1.0, 0.8, 0.8, 2.2}, 0.7, 1.6, 1.0, 0.6},
  };

  void validate() const {
    if (!(sampling_rate > 0.0)) fail(ErrorKind::kParameter, "sampling_rate must be positive");
    if (!(duration_s > 0.0)) fail(ErrorKind::kParameter, "duration_s must be positive");
    if (static_cast<std::size_t>(std::llround(sampling_rate * duration_s)) < 4) {
      fail(ErrorKind::kParameter, "recording must hold at least 4 samples");
    }
    if (!(noise_level >= 0.0)) fail(ErrorKind::kParameter, "noise_level must be nonnegative");
    if (subjects < 1) fail(ErrorKind::kParameter, "subjects must be at least 1");
    for (const auto& ch : target_channels) {
      if (std::find(kEegChannels.begin(), kEegChannels.end(), ch) == kEegChannels.end()) {
        fail(ErrorKind::kParameter, "unknown target channel '" + ch + "'");
      }
    }
    for (const auto& p : profiles) {
      for (double g : p.band_gain) {
        if (!(g >= 0.0)) fail(ErrorKind::kParameter, "band gains must be nonnegative");
      }
      if (!(p.coupling >= 0.0 && p.coupling <= 1.0)) fail(ErrorKind::kParameter, "coupling must lie in [0,1]");
      if (!(p.gsr_event_rate >= 0.0) || !(p.gsr_event_amplitude >= 0.0) || !(p.posterior_delta_gain >= 0.0)) {
        fail(ErrorKind::kParameter, "GSR and posterior parameters must be nonnegative");
      }
    }
  }
};

struct SynthRecord {
  SignalRecording recording;
  int label = 0;
  int subject_id = 0;
};

namespace detail {

inline double parse_real(std::string_view key, std::string_view text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end || !std::isfinite(v)) {
    fail(ErrorKind::kParameter, "value for '" + std::string(key) + "' is not a number: '" + std::string(text) + "'");
  }
  return v;
}

inline int poisson(Rng& rng, double lambda) {
  const double limit = std::exp(-lambda);
  int k = 0;
  double p = rng.uniform();
  while (p > limit) {
    ++k;
    p *= rng.uniform();
  }
  return k;
}

}  // namespace detail

// Reads "key = value" lines; '#' starts a comment. Keys:
//   sampling_rate duration_s noise_level subjects seed
//   delta_amplitude theta_amplitude alpha_amplitude beta_amplitude
//   target_channels = C3,C4,...
//   <class>.<band>_gain <class>.coupling <class>.posterior_delta_gain
//   <class>.gsr_event_rate <class>.gsr_event_amplitude
// where <class> is "trust" or "distrust" and <band> is delta/theta/alpha/beta.
inline SynthSpec parse_synth_config(std::istream& in, SynthSpec spec = {}) {
  static constexpr std::array<std::string_view, 4> kBandKeys = {"delta", "theta", "alpha", "beta"};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = detail::trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorKind::kParameter, "line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = detail::trim(view.substr(0, eq));
    const auto value = detail::trim(view.substr(eq + 1));
    auto real = [&] { return detail::parse_real(key, value); };

    if (key == "sampling_rate") { spec.sampling_rate = real(); continue; }
    if (key == "duration_s") { spec.duration_s = real(); continue; }
    if (key == "noise_level") { spec.noise_level = real(); continue; }
    if (key == "subjects") { spec.subjects = static_cast<int>(real()); continue; }
    if (key == "seed") { spec.seed = static_cast<std::uint64_t>(real()); continue; }
    if (key == "target_channels") {
      spec.target_channels = detail::split_list(value);
      continue;
    }
    bool handled = false;
    for (std::size_t b = 0; b < kBandKeys.size() && !handled; ++b) {
      if (key == std::string(kBandKeys[b]) + "_amplitude") {
        spec.band_amplitude[b] = real();
        handled = true;
      }
    }
    if (handled) continue;

    const auto dot = key.find('.');
    if (dot != std::string_view::npos) {
      const auto cls = key.substr(0, dot);
      const auto field = key.substr(dot + 1);
      int index = -1;
      if (cls == "trust") index = 1;
      if (cls == "distrust") index = 0;
      if (index >= 0) {
        auto& p = spec.profiles[static_cast<std::size_t>(index)];
        for (std::size_t b = 0; b < kBandKeys.size() && !handled; ++b) {
          if (field == std::string(kBandKeys[b]) + "_gain") {
            p.band_gain[b] = real();
            handled = true;
          }
        }
        if (field == "coupling") { p.coupling = real(); handled = true; }
        if (field == "posterior_delta_gain") { p.posterior_delta_gain = real(); handled = true; }
        if (field == "gsr_event_rate") { p.gsr_event_rate = real(); handled = true; }
        if (field == "gsr_event_amplitude") { p.gsr_event_amplitude = real(); handled = true; }
      }
    }
    if (!handled) {
      fail(ErrorKind::kParameter, "line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
    }
  }
  spec.validate();
  return spec;
}

inline SynthSpec parse_synth_config(const std::string& text, SynthSpec spec = {}) {
  std::istringstream in(text);
  return parse_synth_config(in, std::move(spec));
}

// One labelled recording. When no label is given it is drawn from the seed.
inline SynthRecord synth_generate(const SynthSpec& spec, std::uint64_t seed,
                                  std::optional<int> label = std::nullopt, int subject_id = 0) {
  spec.validate();
  Rng rng(seed);
  SynthRecord out;
  out.label = label ? *label : (rng.bernoulli(0.5) ? 1 : 0);
  if (out.label != 0 && out.label != 1) fail(ErrorKind::kParameter, "label must be 0 or 1");
  out.subject_id = subject_id;
  const auto& profile = spec.profiles[static_cast<std::size_t>(out.label)];

  const double fs = spec.sampling_rate;
  const auto n = static_cast<std::size_t>(std::llround(fs * spec.duration_s));
  const double nyquist = 0.5 * fs;
  auto time = [fs](std::size_t i) { return static_cast<double>(i) / fs; };

  // Shared source for coupled channels: theta/alpha rhythm.
  std::vector<double> shared(n, 0.0);
  for (int comp = 0; comp < 3; ++comp) {
    const double f = rng.uniform(4.0, 12.0);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double amp = rng.uniform(4.0, 8.0);
    for (std::size_t i = 0; i < n; ++i) shared[i] += amp * std::sin(2.0 * std::numbers::pi * f * time(i) + phase);
  }
  static constexpr std::array<std::string_view, 4> kCoupled = {"C3", "C4", "F3", "F4"};
  static constexpr std::array<std::pair<double, double>, 4> kBandDraw = {
      std::pair{0.5, 4.0}, std::pair{4.0, 8.0}, std::pair{8.0, 12.0}, std::pair{16.0, 30.0}};

  auto is_target = [&spec](std::string_view ch) {
    return std::find(spec.target_channels.begin(), spec.target_channels.end(), ch) != spec.target_channels.end();
  };

  for (auto ch : kEegChannels) {
    std::vector<double> x(n, 0.0);
    const double jitter = std::exp(rng.normal(0.0, 0.2));
    for (std::size_t b = 0; b < kBandDraw.size(); ++b) {
      double gain = is_target(ch) ? profile.band_gain[b] : 1.0;
      if (b == 0 && (ch == "POz" || ch == "P3")) gain *= profile.posterior_delta_gain;
      for (int comp = 0; comp < 2; ++comp) {
        const double f = std::min(rng.uniform(kBandDraw[b].first, kBandDraw[b].second), nyquist);
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double amp = spec.band_amplitude[b] * gain * jitter * rng.uniform(0.6, 1.0);
        for (std::size_t i = 0; i < n; ++i) x[i] += amp * std::sin(2.0 * std::numbers::pi * f * time(i) + phase);
      }
    }
    if (std::find(kCoupled.begin(), kCoupled.end(), ch) != kCoupled.end()) {
      const double weight = 3.0 * profile.coupling;
      for (std::size_t i = 0; i < n; ++i) x[i] += weight * shared[i];
    }
    for (std::size_t i = 0; i < n; ++i) x[i] += rng.normal(0.0, 2.0 * spec.noise_level);
    out.recording.channels.emplace(std::string(ch), std::move(x));
  }

  std::vector<double> gsr(n);
  const double level = 5.0 + rng.uniform(-1.0, 1.0);
  const double drift = rng.uniform(-0.05, 0.05);
  for (std::size_t i = 0; i < n; ++i) gsr[i] = level + drift * time(i);
  const int events = detail::poisson(rng, profile.gsr_event_rate * spec.duration_s);
  constexpr double kRise = 0.4;  // seconds to peak
  for (int e = 0; e < events; ++e) {
    const double onset = rng.uniform(0.0, spec.duration_s);
    const double amp = profile.gsr_event_amplitude * rng.uniform(0.5, 1.5);
    for (std::size_t i = 0; i < n; ++i) {
      const double dt = time(i) - onset;
      if (dt <= 0.0) continue;
      gsr[i] += amp * (dt / kRise) * std::exp(1.0 - dt / kRise);
    }
  }
  for (auto& v : gsr) v = std::max(0.0, v + rng.normal(0.0, 0.005 * spec.noise_level));
  out.recording.channels.emplace(std::string(kGsrChannel), std::move(gsr));
  out.recording.sampling_rate = fs;
  return out;
}

// Balanced corpus of feature vectors: classes alternate, subjects are
// assigned round-robin, record i uses a seed derived from (seed, i).
inline std::vector<FeatureVector> synth_feature_corpus(const SynthSpec& spec, std::size_t per_class,
                                                       std::uint64_t seed, const ExtractOptions& options = {}) {
  if (per_class == 0) fail(ErrorKind::kParameter, "records per class must be positive");
  spec.validate();
  std::vector<FeatureVector> out;
  out.reserve(2 * per_class);
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    const int label = static_cast<int>(i % 2);
    const int subject = static_cast<int>((i / 2) % static_cast<std::size_t>(spec.subjects));
    auto rec = synth_generate(spec, derive_seed(seed, i), label, subject);
    auto fv = extract_features(rec.recording, options);
    fv.label = rec.label;
    fv.subject_id = rec.subject_id;
    out.push_back(std::move(fv));
  }
  return out;
}

}  // namespace trustsense
