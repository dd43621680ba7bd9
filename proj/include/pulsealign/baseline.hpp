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

// Kalman-filter timestamp correction used as the comparison baseline, and the
// raw / kalman / dejitter / theoretical gap-statistics table.

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pulsealign/error.hpp"
#include "pulsealign/timebase.hpp"

namespace pulsealign {

struct KalmanConfig {
  double q_time = 0.0;    // process noise on event time, s^2
  double q_period = 0.0;  // process noise on period, s^2
  double r = 0.0;         // measurement noise, s^2
  double initial_period = 0.0;

  void validate() const {
    detail::require(q_time > 0.0 && q_period > 0.0 && r > 0.0,
                    "kalman variances must be positive");
    detail::require(initial_period > 0.0, "kalman initial period must be positive");
  }
};

/// q_t = (0.1 T)^2, q_T = (0.001 T)^2, r = raw gap variance.
inline KalmanConfig default_kalman_config(std::span<const double> t, double period) {
  const GapStats g = timegap_stats(t);
  KalmanConfig c;
  c.q_time = (0.1 * period) * (0.1 * period);
  c.q_period = (0.001 * period) * (0.001 * period);
  c.r = g.std > 0.0 ? g.std * g.std : (1e-6 * period) * (1e-6 * period);
  c.initial_period = period;
  return c;
}

/// Constant-period filter on (event time, period), measuring the raw
/// timestamp each step. Output is the filtered event time, clamped to be
/// nondecreasing.
inline std::vector<double> kalman_correct(std::span<const double> t, const KalmanConfig& cfg) {
  cfg.validate();
  detail::require(t.size() >= 3, "kalman correction needs at least 3 timestamps");
  double x0 = t[0];
  double x1 = cfg.initial_period;
  // Covariance [[p00, p01], [p01, p11]].
  double p00 = cfg.r;
  double p01 = 0.0;
  double p11 = cfg.q_period;
  std::vector<double> out(t.size());
  out[0] = x0;
  for (std::size_t i = 1; i < t.size(); ++i) {
    // Predict with F = [[1, 1], [0, 1]].
    x0 += x1;
    const double n00 = p00 + 2.0 * p01 + p11 + cfg.q_time;
    const double n01 = p01 + p11;
    const double n11 = p11 + cfg.q_period;
    // Update with H = [1, 0].
    const double s = n00 + cfg.r;
    const double k0 = n00 / s;
    const double k1 = n01 / s;
    const double innov = t[i] - x0;
    x0 += k0 * innov;
    x1 += k1 * innov;
    // Joseph form: P = (I - K H) N (I - K H)^T + K r K^T.
    const double a = 1.0 - k0;
    p00 = a * a * n00 + k0 * k0 * cfg.r;
    p01 = a * (n01 - k1 * n00) + k0 * k1 * cfg.r;
    p11 = n11 - 2.0 * k1 * n01 + k1 * k1 * n00 + k1 * k1 * cfg.r;
    if (!std::isfinite(x0) || !std::isfinite(x1) || !std::isfinite(p00) || !std::isfinite(p11)) {
      detail::fail("kalman filter diverged at step " + std::to_string(i));
    }
    out[i] = std::max(x0, out[i - 1] + 1e-9);
  }
  return out;
}

struct ComparisonReport {
  GapStats raw;
  GapStats kalman;
  GapStats dejitter;
  GapStats theoretical;
  double period = 0.0;               // grid spacing used by de-jittering
  double dejitter_drop_adjusted = 0.0;
  std::size_t drops = 0;
};

/// Builds the table from an existing de-jittering of `t`.
inline ComparisonReport compare_methods(std::span<const double> t, const DejitterResult& dj,
                                        std::optional<KalmanConfig> kcfg = std::nullopt) {
  detail::require(dj.corrected.size() == t.size(), "de-jitter result does not match the stream");
  ComparisonReport rep;
  rep.raw = timegap_stats(t);
  rep.period = dj.period;
  rep.dejitter = dj.after;
  rep.dejitter_drop_adjusted = dj.drop_adjusted_mean();
  rep.drops = dj.drops.count();
  const KalmanConfig kc = kcfg ? *kcfg : default_kalman_config(t, dj.estimate.period);
  rep.kalman = timegap_stats(kalman_correct(t, kc));
  rep.theoretical = GapStats{dj.period, 0.0, rep.raw.n};
  return rep;
}

inline ComparisonReport compare_methods(std::span<const double> t, const DejitterConfig& dcfg,
                                        std::optional<KalmanConfig> kcfg = std::nullopt) {
  return compare_methods(t, dejitter(t, dcfg), kcfg);
}

}  // namespace pulsealign
