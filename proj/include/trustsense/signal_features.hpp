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
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trustsense/error.hpp"
#include "trustsense/spectrum.hpp"

namespace trustsense {

// EEG electrodes in schema order, followed by the skin-conductance channel.
inline constexpr std::array<std::string_view, 8> kEegChannels = {
    "C3", "C4", "Cz", "F3", "F4", "P3", "P4", "POz"};
inline constexpr std::string_view kGsrChannel = "GSR";

inline constexpr std::size_t kFeatureCount = 200;

struct FrequencyBand {
  std::string_view name;
  double low_hz;
  double high_hz;

  // Half-open membership test [low, high).
  bool contains(double hz) const { return hz >= low_hz && hz < high_hz; }
};

// Alpha and Beta overlap on [12, 16) Hz. The ranges are kept as published.
inline constexpr FrequencyBand kDelta{"Delta", 0.0, 4.0};
inline constexpr FrequencyBand kTheta{"Theta", 4.0, 8.0};
inline constexpr FrequencyBand kAlpha{"Alpha", 8.0, 16.0};
inline constexpr FrequencyBand kBeta{"Beta", 12.0, 30.0};
inline constexpr std::array<FrequencyBand, 4> kBands = {kDelta, kTheta, kAlpha, kBeta};

struct SignalRecording {
  std::map<std::string, std::vector<double>> channels;
  double sampling_rate = 128.0;

  std::size_t sample_count() const {
    return channels.empty() ? 0 : channels.begin()->second.size();
  }

  const std::vector<double>& channel(std::string_view name) const {
    auto it = channels.find(std::string(name));
    if (it == channels.end()) {
      fail(ErrorKind::kSchema, "recording is missing channel '" + std::string(name) + "'");
    }
    return it->second;
  }

  void validate() const {
    if (!(sampling_rate > 0.0) || !std::isfinite(sampling_rate)) {
      fail(ErrorKind::kInvalidSignal, "sampling rate must be positive");
    }
    const std::size_t n = sample_count();
    if (n < 2) fail(ErrorKind::kInvalidSignal, "channels need at least 2 samples");
    for (const auto& [name, samples] : channels) {
      const bool known = name == kGsrChannel ||
                         std::find(kEegChannels.begin(), kEegChannels.end(), name) !=
                             kEegChannels.end();
      if (!known) fail(ErrorKind::kSchema, "unknown channel '" + name + "'");
      if (samples.size() != n) {
        fail(ErrorKind::kInvalidSignal, "channel '" + name + "' has a different sample count");
      }
      for (double v : samples) {
        if (!std::isfinite(v)) fail(ErrorKind::kInvalidSignal, "channel '" + name + "' has non-finite samples");
      }
    }
  }
};

struct FeatureVector {
  std::vector<double> values;
  std::optional<int> label;
  int subject_id = 0;
  // Indices of entries whose definition was degenerate for this input
  // (zero-variance correlation, zero-power spectrum, zero-energy ratios).
  // Those entries hold 0.
  std::vector<std::size_t> degenerate;
};

struct TimeDomainStats {
  double mean = 0.0;
  double variance = 0.0;
  double peak_to_peak = 0.0;
  double rms = 0.0;
  double signal_energy = 0.0;
};

struct BandFeatures {
  double sum_square = 0.0;
  double variance = 0.0;
};

struct GsrComponents {
  std::vector<double> tonic;
  std::vector<double> phasic;
  double max_phasic = 0.0;
};

namespace detail {

inline void require_signal(std::span<const double> samples, std::size_t min_len) {
  if (samples.size() < min_len) {
    fail(ErrorKind::kInvalidSignal,
         "signal needs at least " + std::to_string(min_len) + " samples, got " +
             std::to_string(samples.size()));
  }
  for (double v : samples) {
    if (!std::isfinite(v)) fail(ErrorKind::kInvalidSignal, "signal contains non-finite samples");
  }
}

inline void require_rate(double sampling_rate) {
  if (!(sampling_rate > 0.0) || !std::isfinite(sampling_rate)) {
    fail(ErrorKind::kInvalidSignal, "sampling rate must be positive");
  }
}

inline double mean_of(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

inline double population_variance(std::span<const double> x) {
  const double m = mean_of(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size());
}

inline std::optional<double> centroid_from_bins(std::span<const spectrum::Complex> bins,
                                                double sampling_rate) {
  const std::size_t n = bins.size();
  double weighted = 0.0;
  double total = 0.0;
  for (std::size_t k = 0; k <= n / 2; ++k) {
    const double power = std::norm(bins[k]);
    weighted += spectrum::bin_frequency(k, n, sampling_rate) * power;
    total += power;
  }
  if (!(total > 0.0)) return std::nullopt;
  return weighted / total;
}

inline bool band_has_bins(std::size_t n, double sampling_rate, const FrequencyBand& band) {
  for (std::size_t k = 0; k <= n / 2; ++k) {
    if (band.contains(spectrum::bin_frequency(k, n, sampling_rate))) return true;
  }
  return false;
}

inline std::vector<double> band_limit_from_bins(std::span<const spectrum::Complex> bins,
                                                double sampling_rate, const FrequencyBand& band) {
  const std::size_t n = bins.size();
  std::vector<spectrum::Complex> kept(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (band.contains(spectrum::bin_frequency(k, n, sampling_rate))) kept[k] = bins[k];
  }
  return spectrum::inverse_real(std::move(kept));
}

inline BandFeatures band_features_of(std::span<const double> limited) {
  BandFeatures out;
  for (double v : limited) out.sum_square += v * v;
  out.variance = population_variance(limited);
  return out;
}

}  // namespace detail

inline TimeDomainStats time_domain_features(std::span<const double> samples) {
  detail::require_signal(samples, 2);
  TimeDomainStats s;
  s.mean = detail::mean_of(samples);
  double lo = samples[0];
  double hi = samples[0];
  double centered = 0.0;
  for (double v : samples) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    centered += (v - s.mean) * (v - s.mean);
    s.signal_energy += v * v;
  }
  const auto n = static_cast<double>(samples.size());
  s.variance = centered / n;
  s.peak_to_peak = hi - lo;
  s.rms = std::sqrt(s.signal_energy / n);
  return s;
}

// Power-weighted spectral centroid over bins 0..n/2.
inline double mean_frequency(std::span<const double> samples, double sampling_rate) {
  detail::require_signal(samples, 4);
  detail::require_rate(sampling_rate);
  const auto bins = spectrum::forward(samples);
  const auto centroid = detail::centroid_from_bins(bins, sampling_rate);
  if (!centroid) fail(ErrorKind::kUndefinedSpectrum, "signal has zero spectral power");
  return *centroid;
}

// Signal restricted to the DFT bins whose frequency lies in the band.
inline std::vector<double> band_limit(std::span<const double> samples, double sampling_rate,
                                      const FrequencyBand& band) {
  detail::require_signal(samples, 4);
  detail::require_rate(sampling_rate);
  if (!detail::band_has_bins(samples.size(), sampling_rate, band)) {
    fail(ErrorKind::kEmptyBand, std::string(band.name) + " band has no DFT bins below Nyquist");
  }
  const auto bins = spectrum::forward(samples);
  return detail::band_limit_from_bins(bins, sampling_rate, band);
}

inline BandFeatures band_features(std::span<const double> samples, double sampling_rate,
                                  const FrequencyBand& band) {
  return detail::band_features_of(band_limit(samples, sampling_rate, band));
}

inline double channel_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorKind::kInvalidSignal, "correlation inputs differ in length");
  detail::require_signal(a, 2);
  detail::require_signal(b, 2);
  const double ma = detail::mean_of(a);
  const double mb = detail::mean_of(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) {
    fail(ErrorKind::kUndefinedCorrelation, "correlation of a zero-variance signal");
  }
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

// Tonic level is a centered moving median; phasic is the remainder, so
// tonic + phasic == samples exactly.
inline GsrComponents gsr_decompose(std::span<const double> samples, double sampling_rate,
                                   double tonic_window_s = 4.0) {
  detail::require_rate(sampling_rate);
  detail::require_signal(samples, 1);
  const double window_samples = std::round(tonic_window_s * sampling_rate);
  if (!(window_samples >= 1.0)) fail(ErrorKind::kInvalidWindow, "tonic window is shorter than one sample");
  if (window_samples > static_cast<double>(samples.size())) {
    fail(ErrorKind::kInvalidWindow, "tonic window of " + std::to_string(tonic_window_s) +
                                        " s is longer than the signal");
  }
  for (double v : samples) {
    if (v < 0.0) fail(ErrorKind::kInvalidSignal, "skin conductance must be nonnegative");
  }
  const std::size_t n = samples.size();
  const auto half = static_cast<std::size_t>(window_samples) / 2;

  GsrComponents out;
  out.tonic.resize(n);
  out.phasic.resize(n);
  std::vector<double> scratch;
  scratch.reserve(2 * half + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n - 1, i + half);
    scratch.assign(samples.begin() + static_cast<std::ptrdiff_t>(lo),
                   samples.begin() + static_cast<std::ptrdiff_t>(hi + 1));
    const std::size_t mid = scratch.size() / 2;
    std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(mid), scratch.end());
    double median = scratch[mid];
    if (scratch.size() % 2 == 0) {
      const double lower = *std::max_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(mid));
      median = 0.5 * (lower + median);
    }
    out.tonic[i] = median;
    out.phasic[i] = samples[i] - median;
  }
  out.max_phasic = *std::max_element(out.phasic.begin(), out.phasic.end());
  return out;
}

// ---------------------------------------------------------------------------
// Feature schema
//
// 200 entries, in this order:
//   [  0, 54)  per channel (EEG then GSR): Mean, Variance, Peak-to-peak, RMS,
//              Energy, Mean Frequency
//   [ 54,118)  per EEG channel and band: SumSquare, Variance of the
//              band-limited signal
//   [118,146)  Pearson correlation for every EEG channel pair (schema order)
//   [146,178)  per EEG channel and band: band SumSquare / channel Energy
//   [178,186)  per EEG channel: Theta/Beta SumSquare ratio
//   [186,194)  per EEG channel: Beta / (Alpha + Theta) SumSquare ratio
//   [194,200)  GSR tonic/phasic statistics
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> build_schema() {
  std::vector<std::string> names;
  names.reserve(kFeatureCount);
  std::vector<std::string> all_channels(kEegChannels.begin(), kEegChannels.end());
  all_channels.emplace_back(kGsrChannel);
  for (const auto& ch : all_channels) {
    for (const char* stat : {"Mean", "Variance", "Peak-to-peak", "RMS", "Energy", "Mean Frequency"}) {
      names.push_back(std::string(stat) + " - " + ch);
    }
  }
  for (auto ch : kEegChannels) {
    for (const auto& band : kBands) {
      names.push_back("SumSquare of " + std::string(band.name) + " band - " + std::string(ch));
      names.push_back("Variance of " + std::string(band.name) + " band - " + std::string(ch));
    }
  }
  for (std::size_t i = 0; i < kEegChannels.size(); ++i) {
    for (std::size_t j = i + 1; j < kEegChannels.size(); ++j) {
      names.push_back("Correlation - " + std::string(kEegChannels[i]) + "_" + std::string(kEegChannels[j]));
    }
  }
  for (auto ch : kEegChannels) {
    for (const auto& band : kBands) {
      names.push_back("Relative Power of " + std::string(band.name) + " band - " + std::string(ch));
    }
  }
  for (auto ch : kEegChannels) names.push_back("Theta/Beta Ratio - " + std::string(ch));
  for (auto ch : kEegChannels) names.push_back("Engagement Index - " + std::string(ch));
  for (const char* g : {"GSR_MaxPhasic", "GSR_MeanPhasic", "GSR_PhasicVariance", "GSR_PhasicEnergy",
                        "GSR_TonicMean", "GSR_TonicSlope"}) {
    names.emplace_back(g);
  }
  return names;
}

}  // namespace detail

inline const std::vector<std::string>& feature_schema() {
  static const std::vector<std::string> schema = detail::build_schema();
  return schema;
}

// Canonical spelling of a feature name: en/em dashes become '-', runs of
// whitespace collapse to one space, ends are trimmed. Lets names copied from
// typeset tables ("Mean Frequency – P4") resolve against the schema.
inline std::string normalize_feature_name(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto c = static_cast<unsigned char>(raw[i]);
    if (c == 0xE2 && i + 2 < raw.size() && static_cast<unsigned char>(raw[i + 1]) == 0x80 &&
        (static_cast<unsigned char>(raw[i + 2]) == 0x93 || static_cast<unsigned char>(raw[i + 2]) == 0x94)) {
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back('-');
      i += 2;
      continue;
    }
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(c));
  }
  return out;
}

// The ten features reported as the final reduced set.
inline const std::vector<std::string>& reduced_feature_names() {
  static const std::vector<std::string> names = {
      "Peak-to-peak - P3",
      "Mean Frequency - P4",
      "Mean Frequency - C3",
      "Mean Frequency - C4",
      "Correlation - C3_C4",
      "Correlation - C3_F3",
      "Correlation - C4_F4",
      "GSR_MaxPhasic",
      "SumSquare of Delta band - POz",
      "Variance of Beta band - C4",
  };
  return names;
}

struct ExtractOptions {
  // Clamped to the recording length so that short windows still decompose.
  double gsr_tonic_window_s = 4.0;
};

inline FeatureVector extract_features(const SignalRecording& rec, const ExtractOptions& options = {}) {
  rec.validate();
  for (auto ch : kEegChannels) rec.channel(ch);
  const auto& gsr = rec.channel(kGsrChannel);

  const double fs = rec.sampling_rate;
  const std::size_t n = rec.sample_count();
  if (n < 4) fail(ErrorKind::kInvalidSignal, "feature extraction needs at least 4 samples");

  FeatureVector fv;
  fv.values.reserve(kFeatureCount);
  auto push = [&fv](double v) { fv.values.push_back(v); };
  auto push_degenerate = [&fv] {
    fv.degenerate.push_back(fv.values.size());
    fv.values.push_back(0.0);
  };

  std::vector<const std::vector<double>*> channels;
  for (auto ch : kEegChannels) channels.push_back(&rec.channel(ch));
  channels.push_back(&gsr);

  std::vector<std::vector<spectrum::Complex>> bins;
  bins.reserve(channels.size());
  for (const auto* samples : channels) bins.push_back(spectrum::forward(*samples));

  std::vector<double> energy(channels.size());
  for (std::size_t c = 0; c < channels.size(); ++c) {
    const auto td = time_domain_features(*channels[c]);
    energy[c] = td.signal_energy;
    push(td.mean);
    push(td.variance);
    push(td.peak_to_peak);
    push(td.rms);
    push(td.signal_energy);
    if (auto mf = detail::centroid_from_bins(bins[c], fs)) {
      push(*mf);
    } else {
      push_degenerate();
    }
  }

  // band_power[c][b] = SumSquare of band b on EEG channel c
  std::vector<std::array<double, 4>> band_power(kEegChannels.size());
  for (std::size_t c = 0; c < kEegChannels.size(); ++c) {
    for (std::size_t b = 0; b < kBands.size(); ++b) {
      if (!detail::band_has_bins(n, fs, kBands[b])) {
        band_power[c][b] = 0.0;
        push_degenerate();
        push_degenerate();
        continue;
      }
      const auto limited = detail::band_limit_from_bins(bins[c], fs, kBands[b]);
      const auto bf = detail::band_features_of(limited);
      band_power[c][b] = bf.sum_square;
      push(bf.sum_square);
      push(bf.variance);
    }
  }

  for (std::size_t i = 0; i < kEegChannels.size(); ++i) {
    for (std::size_t j = i + 1; j < kEegChannels.size(); ++j) {
      const auto& a = *channels[i];
      const auto& b = *channels[j];
      if (detail::population_variance(a) > 0.0 && detail::population_variance(b) > 0.0) {
        push(channel_correlation(a, b));
      } else {
        push_degenerate();
      }
    }
  }

  auto push_ratio = [&](double num, double den) {
    if (den > 0.0) {
      push(num / den);
    } else {
      push_degenerate();
    }
  };
  for (std::size_t c = 0; c < kEegChannels.size(); ++c) {
    for (std::size_t b = 0; b < kBands.size(); ++b) push_ratio(band_power[c][b], energy[c]);
  }
  for (std::size_t c = 0; c < kEegChannels.size(); ++c) push_ratio(band_power[c][1], band_power[c][3]);
  for (std::size_t c = 0; c < kEegChannels.size(); ++c) {
    push_ratio(band_power[c][3], band_power[c][2] + band_power[c][1]);
  }

  const double duration_s = static_cast<double>(n) / fs;
  const double window_s = std::min(options.gsr_tonic_window_s, duration_s);
  const auto parts = gsr_decompose(gsr, fs, window_s);
  const auto phasic = time_domain_features(parts.phasic);
  push(parts.max_phasic);
  push(phasic.mean);
  push(phasic.variance);
  push(phasic.signal_energy);
  push(detail::mean_of(parts.tonic));
  {
    // least-squares slope of the tonic level, per second
    const double t_mean = 0.5 * static_cast<double>(n - 1) / fs;
    const double y_mean = detail::mean_of(parts.tonic);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dt = static_cast<double>(i) / fs - t_mean;
      sxy += dt * (parts.tonic[i] - y_mean);
      sxx += dt * dt;
    }
    push(sxy / sxx);
  }
  return fv;
}

}  // namespace trustsense
