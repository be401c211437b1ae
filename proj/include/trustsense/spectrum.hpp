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

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

namespace trustsense::spectrum {

using Complex = std::complex<double>;

namespace detail {

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline void radix2_in_place(std::vector<Complex>& data, bool inverse) {
  const std::size_t n = data.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double angle = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
    const std::size_t half = len / 2;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        // Twiddles computed directly rather than by recurrence to keep the
        // rounding error at O(eps log n).
        const Complex w = std::polar(1.0, angle * static_cast<double>(k));
        const Complex u = data[start + k];
        const Complex v = data[start + k + half] * w;
        data[start + k] = u + v;
        data[start + k + half] = u - v;
      }
    }
  }
}

inline std::vector<Complex> naive_dft(std::span<const Complex> input, bool inverse) {
  const std::size_t n = input.size();
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<Complex> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    Complex acc{};
    for (std::size_t t = 0; t < n; ++t) {
      const double angle = sign * 2.0 * std::numbers::pi *
                           static_cast<double>((k * t) % n) / static_cast<double>(n);
      acc += input[t] * std::polar(1.0, angle);
    }
    out[k] = acc;
  }
  return out;
}

}  // namespace detail

// Unnormalized forward DFT: X[k] = sum_t x[t] exp(-2 pi i k t / n).
// Radix-2 for power-of-two lengths, direct summation otherwise.
inline std::vector<Complex> forward(std::span<const double> samples) {
  std::vector<Complex> data(samples.begin(), samples.end());
  if (detail::is_power_of_two(data.size())) {
    detail::radix2_in_place(data, false);
    return data;
  }
  return detail::naive_dft(data, false);
}

// Inverse DFT including the 1/n factor; returns the real part.
inline std::vector<double> inverse_real(std::vector<Complex> bins) {
  const std::size_t n = bins.size();
  if (detail::is_power_of_two(n)) {
    detail::radix2_in_place(bins, true);
  } else {
    bins = detail::naive_dft(bins, true);
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = bins[i].real() / static_cast<double>(n);
  return out;
}

// Frequency (Hz) represented by bin k of an n-point transform, folded so that
// bins above n/2 map to their negative-frequency magnitude.
inline double bin_frequency(std::size_t k, std::size_t n, double sampling_rate) {
  const std::size_t folded = k <= n / 2 ? k : n - k;
  return static_cast<double>(folded) * sampling_rate / static_cast<double>(n);
}

}  // namespace trustsense::spectrum
