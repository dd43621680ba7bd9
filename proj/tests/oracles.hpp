// Copyright 2026 The pulsealign Authors
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

// Independent reference implementations used by the tests. None of these
// share code with the library; they trade speed for obviousness.

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

namespace oracle {

/// Grid-scan allocation: walk samples from last to first and give each the
/// highest grid index <= its timestamp that is below the previous pick,
/// testing indices one at a time with the explicit point formula.
inline std::optional<std::vector<std::int64_t>> allocate_scan(std::span<const double> t,
                                                              double anchor, double period,
                                                              std::int64_t k_min,
                                                              std::int64_t k_max) {
  std::vector<std::int64_t> alloc(t.size());
  std::int64_t limit = k_max;
  for (std::size_t r = t.size(); r-- > 0;) {
    std::int64_t k = limit;
    while (k >= k_min && anchor + static_cast<double>(k) * period > t[r]) --k;
    if (k < k_min) return std::nullopt;
    alloc[r] = k;
    limit = k - 1;
  }
  return alloc;
}

/// Closed-form quadratic/cubic Savitzky-Golay smoothing weights for a
/// centred window of half-width m (classical tabulated formula).
inline std::vector<double> savgol_quadratic(int m) {
  const double mm = m;
  const double den = (4.0 * mm * mm - 1.0) * (2.0 * mm + 3.0);
  std::vector<double> w;
  for (int i = -m; i <= m; ++i) {
    w.push_back(3.0 * (3.0 * mm * mm + 3.0 * mm - 1.0 - 5.0 * i * i) / den);
  }
  return w;
}

/// Least-squares centre weights by orthogonal projection: Gram-Schmidt the
/// monomials 1, x, ..., x^p over the abscissae and evaluate the projection
/// of each unit vector at x = 0.
inline std::vector<double> savgol_projection(int half, int degree) {
  const int n = 2 * half + 1;
  std::vector<std::vector<double>> basis;
  for (int d = 0; d <= degree; ++d) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = std::pow(static_cast<double>(i - half) / half, d);
    for (const auto& q : basis) {
      double dot = 0.0;
      for (int i = 0; i < n; ++i) dot += v[i] * q[i];
      for (int i = 0; i < n; ++i) v[i] -= dot * q[i];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  // weight_j = sum_q q[centre] * q[j]
  std::vector<double> w(n, 0.0);
  for (const auto& q : basis) {
    for (int j = 0; j < n; ++j) w[j] += q[half] * q[j];
  }
  return w;
}

/// Analog-prototype Butterworth bandpass magnitude mapped through the
/// bilinear transform: |H(f)| = 1 / sqrt(1 + ((W^2 - W0^2) / (B W))^(2N)),
/// W = 2 fs tan(pi f / fs), with prewarped band edges.
inline double butter_bandpass_mag(double f, double low, double high, double fs, int order) {
  auto warp = [fs](double x) { return 2.0 * fs * std::tan(std::numbers::pi * x / fs); };
  if (f <= 0.0 || f >= fs / 2.0) return 0.0;
  const double w = warp(f);
  const double wl = warp(low);
  const double wh = warp(high);
  const double x = (w * w - wl * wh) / ((wh - wl) * w);
  return 1.0 / std::sqrt(1.0 + std::pow(x * x, order));
}

/// Power at frequency f by direct DFT projection (no FFT), mean removed.
inline double dft_power(std::span<const double> x, double fs, double f) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  std::complex<double> acc = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double a = 2.0 * std::numbers::pi * f * static_cast<double>(j) / fs;
    acc += (x[j] - mean) * std::complex<double>(std::cos(a), -std::sin(a));
  }
  return std::norm(acc);
}

/// Frequency of the largest DFT power over [f_lo, f_hi] scanned at `step`.
inline double periodogram_peak(std::span<const double> x, double fs, double f_lo, double f_hi,
                               double step) {
  double best_f = f_lo;
  double best_p = -1.0;
  for (double f = f_lo; f <= f_hi + 1e-12; f += step) {
    const double p = dft_power(x, fs, f);
    if (p > best_p) {
      best_p = p;
      best_f = f;
    }
  }
  return best_f;
}

inline double rms(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / static_cast<double>(x.size()));
}

}  // namespace oracle
