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

#pragma once

// Savitzky-Golay smoothing followed by a zero-phase Butterworth bandpass.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "pulsealign/error.hpp"

namespace pulsealign {

struct SavGolConfig {
  int window = 101;
  int order = 2;

  void validate() const {
    detail::require(window >= 1 && window % 2 == 1, "savgol window must be a positive odd number");
    detail::require(order >= 0 && order < window, "savgol order must satisfy 0 <= order < window");
  }
};

namespace detail {

// Solves a small dense system in place (Gaussian elimination, partial
// pivoting). `a` is row-major n x n.
inline std::vector<double> solve_dense(std::vector<double> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
    }
    require(a[piv * n + col] != 0.0, "singular least-squares system");
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[piv * n + c]);
      std::swap(b[col], b[piv]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r * n + col] / a[col * n + col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a[i * n + c] * x[c];
    x[i] = s / a[i * n + i];
  }
  return x;
}

// Weights w over sample offsets lo..hi such that sum w_j y_j is the value at
// offset 0 of the degree-`degree` least-squares polynomial through the
// samples. Abscissae are centered on 0 and scaled to [-1, 1].
inline std::vector<double> lsq_point_weights(int lo, int hi, int degree) {
  const int len = hi - lo + 1;
  const auto terms = static_cast<std::size_t>(degree + 1);
  const double scale = std::max({std::abs(lo), std::abs(hi), 1});
  std::vector<double> x(static_cast<std::size_t>(len));
  for (int j = 0; j < len; ++j) x[static_cast<std::size_t>(j)] = (lo + j) / scale;

  std::vector<double> moments(2 * terms - 1, 0.0);
  for (double xv : x) {
    double p = 1.0;
    for (auto& m : moments) {
      m += p;
      p *= xv;
    }
  }
  std::vector<double> normal(terms * terms);
  for (std::size_t r = 0; r < terms; ++r) {
    for (std::size_t c = 0; c < terms; ++c) normal[r * terms + c] = moments[r + c];
  }
  std::vector<double> e0(terms, 0.0);
  e0[0] = 1.0;
  const auto coef = solve_dense(std::move(normal), std::move(e0));

  std::vector<double> w(static_cast<std::size_t>(len));
  for (std::size_t j = 0; j < w.size(); ++j) {
    double p = 1.0;
    double s = 0.0;
    for (double c : coef) {
      s += c * p;
      p *= x[j];
    }
    w[j] = s;
  }
  return w;
}

}  // namespace detail

/// Central-point weights of a degree-`order` least-squares fit over
/// `window` equally spaced samples.
inline std::vector<double> savgol_coefficients(int window, int order) {
  SavGolConfig{window, order}.validate();
  const int h = window / 2;
  return detail::lsq_point_weights(-h, h, order);
}

/// Interior points use the central weights; within half a window of either
/// end the fit runs over the truncated window that is actually available
/// (degree capped by its length).
inline std::vector<double> savgol_smooth(std::span<const double> x, const SavGolConfig& cfg) {
  cfg.validate();
  detail::require(x.size() >= static_cast<std::size_t>(cfg.window),
                  "signal shorter than the smoothing window");
  const auto n = static_cast<int>(x.size());
  const int h = cfg.window / 2;
  const auto center = savgol_coefficients(cfg.window, cfg.order);
  std::vector<double> y(x.size());
  for (int i = h; i < n - h; ++i) {
    double s = 0.0;
    for (int j = -h; j <= h; ++j) s += center[static_cast<std::size_t>(j + h)] * x[i + j];
    y[static_cast<std::size_t>(i)] = s;
  }
  for (int i = 0; i < std::min(h, n); ++i) {
    const int lo = -i;
    const int hi = std::min(h, n - 1 - i);
    const auto w = detail::lsq_point_weights(lo, hi, std::min(cfg.order, hi - lo));
    double s = 0.0;
    for (int j = lo; j <= hi; ++j) s += w[static_cast<std::size_t>(j - lo)] * x[i + j];
    y[static_cast<std::size_t>(i)] = s;
  }
  for (int i = std::max(n - h, h); i < n; ++i) {
    const int lo = -std::min(h, i);
    const int hi = n - 1 - i;
    const auto w = detail::lsq_point_weights(lo, hi, std::min(cfg.order, hi - lo));
    double s = 0.0;
    for (int j = lo; j <= hi; ++j) s += w[static_cast<std::size_t>(j - lo)] * x[i + j];
    y[static_cast<std::size_t>(i)] = s;
  }
  return y;
}

struct BandpassConfig {
  double low_hz = 0.7;
  double high_hz = 2.5;
  double fs = 0.0;
  int order = 2;  // analog prototype order; the bandpass has twice this

  void validate() const {
    detail::require(fs > 0.0 && std::isfinite(fs), "sampling rate must be positive");
    detail::require(order >= 1, "bandpass order must be at least 1");
    detail::require(low_hz > 0.0 && low_hz < high_hz, "bandpass needs 0 < low < high");
    detail::require(high_hz < fs / 2.0, "bandpass cutoff at or above Nyquist (" +
                                            std::to_string(fs / 2.0) + " Hz)");
  }
};

/// Second-order section, a0 normalized to 1:
/// H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2).
struct BiquadSection {
  double b0 = 1.0;
  double b1 = 0.0;
  double b2 = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;

  std::complex<double> response(double omega) const {
    const auto z1 = std::polar(1.0, -omega);
    const auto z2 = z1 * z1;
    return (b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2);
  }

  // Both roots of z^2 + a1 z + a2 strictly inside the unit circle.
  bool stable() const { return std::abs(a2) < 1.0 && std::abs(a1) < 1.0 + a2; }
};

inline std::complex<double> frequency_response(std::span<const BiquadSection> sections,
                                               double f_hz, double fs) {
  const double omega = 2.0 * std::numbers::pi * f_hz / fs;
  std::complex<double> h = 1.0;
  for (const auto& s : sections) h *= s.response(omega);
  return h;
}

/// Butterworth lowpass prototype -> lowpass-to-bandpass -> bilinear
/// transform with prewarped edges. Each section holds one conjugate pole
/// pair and the zero pair at z = +1 / -1; sections are ordered by ascending
/// pole Q and each has unit gain at the band center.
inline std::vector<BiquadSection> design_bandpass(const BandpassConfig& cfg) {
  cfg.validate();
  using cd = std::complex<double>;
  const double pi = std::numbers::pi;
  const double w1 = 2.0 * cfg.fs * std::tan(pi * cfg.low_hz / cfg.fs);
  const double w2 = 2.0 * cfg.fs * std::tan(pi * cfg.high_hz / cfg.fs);
  const double w0 = std::sqrt(w1 * w2);
  const double bw = w2 - w1;

  std::vector<cd> analog;
  for (int k = 1; k <= cfg.order; ++k) {
    const cd p = std::polar(1.0, pi * (2.0 * k + cfg.order - 1) / (2.0 * cfg.order));
    const cd disc = std::sqrt(p * p * bw * bw - 4.0 * w0 * w0);
    analog.push_back((p * bw + disc) / 2.0);
    analog.push_back((p * bw - disc) / 2.0);
  }

  // Pair poles into conjugates (complex) or into twos (real).
  std::vector<std::pair<cd, cd>> pairs;
  std::vector<cd> reals;
  constexpr double kImagTol = 1e-9;
  for (const auto& s : analog) {
    if (s.imag() > kImagTol * std::abs(s)) {
      pairs.emplace_back(s, std::conj(s));
    } else if (std::abs(s.imag()) <= kImagTol * std::abs(s)) {
      reals.emplace_back(s.real(), 0.0);
    }
  }
  std::sort(reals.begin(), reals.end(), [](cd a, cd b) { return a.real() < b.real(); });
  for (std::size_t i = 0; i + 1 < reals.size(); i += 2) pairs.emplace_back(reals[i], reals[i + 1]);
  detail::require(pairs.size() == static_cast<std::size_t>(cfg.order),
                  "bandpass pole pairing failed");

  auto q_of = [](const std::pair<cd, cd>& pr) {
    const double wn = std::sqrt(std::abs(pr.first * pr.second));
    const double sum = -(pr.first + pr.second).real();
    return wn / sum;
  };
  std::stable_sort(pairs.begin(), pairs.end(),
                   [&](const auto& a, const auto& b) { return q_of(a) < q_of(b); });

  const double k2 = 2.0 * cfg.fs;
  const double omega_c = 2.0 * std::atan(w0 / k2);  // digital image of w0
  std::vector<BiquadSection> out;
  for (const auto& [sa, sb] : pairs) {
    const cd za = (k2 + sa) / (k2 - sa);
    const cd zb = (k2 + sb) / (k2 - sb);
    BiquadSection s;
    s.a1 = -(za + zb).real();
    s.a2 = (za * zb).real();
    s.b0 = 1.0;
    s.b1 = 0.0;
    s.b2 = -1.0;
    const double g = 1.0 / std::abs(s.response(omega_c));
    s.b0 = g;
    s.b2 = -g;
    detail::require(s.stable(), "designed bandpass section is unstable");
    out.push_back(s);
  }
  return out;
}

namespace detail {

// Transposed direct form II state giving a steady-state response to a unit
// step, per section (scaled by the first sample before use).
inline std::vector<std::array<double, 2>> step_state(std::span<const BiquadSection> sections) {
  std::vector<std::array<double, 2>> zi(sections.size());
  double in = 1.0;
  for (std::size_t i = 0; i < sections.size(); ++i) {
    const auto& s = sections[i];
    const double dc = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    const double out = dc * in;
    zi[i][1] = s.b2 * in - s.a2 * out;
    zi[i][0] = s.b1 * in - s.a1 * out + zi[i][1];
    in = out;
  }
  return zi;
}

inline void sosfilt_inplace(std::span<const BiquadSection> sections, std::vector<double>& x,
                            const std::vector<std::array<double, 2>>& zi) {
  const double x0 = x.empty() ? 0.0 : x.front();
  for (std::size_t k = 0; k < sections.size(); ++k) {
    const auto& s = sections[k];
    double z1 = zi[k][0] * x0;
    double z2 = zi[k][1] * x0;
    for (auto& v : x) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
}

}  // namespace detail

/// Single causal pass through the cascade, starting from rest.
inline std::vector<double> sosfilt(std::span<const BiquadSection> sections,
                                   std::span<const double> x) {
  std::vector<double> y(x.begin(), x.end());
  const std::vector<std::array<double, 2>> rest(sections.size(), {0.0, 0.0});
  detail::sosfilt_inplace(sections, y, rest);
  return y;
}

/// Zero-phase filtering: odd-reflection padding of 3 x filter order samples
/// per end, forward pass, reverse, forward pass, reverse, unpad. Each pass
/// starts from the step steady state scaled by its first sample.
inline std::vector<double> filtfilt(std::span<const BiquadSection> sections,
                                    std::span<const double> x) {
  const std::size_t pad = 3 * 2 * sections.size();
  detail::require(x.size() > pad, "signal too short for zero-phase filtering (need more than " +
                                      std::to_string(pad) + " samples)");
  const std::size_t n = x.size();
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  const auto zi = detail::step_state(sections);
  detail::sosfilt_inplace(sections, ext, zi);
  std::reverse(ext.begin(), ext.end());
  detail::sosfilt_inplace(sections, ext, zi);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad),
          ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

struct ProcessedSignal {
  std::vector<double> timestamps;  // de-jittered
  std::vector<double> raw;
  std::vector<double> smoothed;
  std::vector<double> filtered;  // label source

  std::size_t size() const { return timestamps.size(); }
};

/// Smoothing then zero-phase bandpass; `band.fs` is the stream's sampling
/// rate.
inline ProcessedSignal process_signal(std::span<const double> values,
                                      std::span<const double> timestamps,
                                      const SavGolConfig& smooth, const BandpassConfig& band) {
  detail::require(values.size() == timestamps.size(),
                  "signal values and timestamps differ in length");
  for (double v : values) detail::require(std::isfinite(v), "non-finite signal value");
  ProcessedSignal p;
  p.timestamps.assign(timestamps.begin(), timestamps.end());
  p.raw.assign(values.begin(), values.end());
  p.smoothed = savgol_smooth(values, smooth);
  const auto sections = design_bandpass(band);
  p.filtered = filtfilt(sections, p.smoothed);
  return p;
}

}  // namespace pulsealign
