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

// Timestamp de-jittering: every raw timestamp is moved onto an evenly spaced
// synthetic grid whose spacing is the stream's measured mean timestep. Raw
// timestamps are visited from last to first and each takes the highest free
// grid point not later than itself, so a corrected time never exceeds its
// recording. Grid points left unused between allocated ones are dropped
// samples.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pulsealign/error.hpp"
#include "pulsealign/ingest.hpp"

namespace pulsealign {

/// Mean and population standard deviation of consecutive differences.
struct GapStats {
  double mean = 0.0;
  double std = 0.0;
  std::size_t n = 0;
};

inline GapStats timegap_stats(std::span<const double> t) {
  detail::require(t.size() >= 2, "timegap statistics need at least 2 timestamps");
  GapStats s;
  s.n = t.size() - 1;
  double sum = 0.0;
  for (std::size_t i = 1; i < t.size(); ++i) sum += t[i] - t[i - 1];
  s.mean = sum / static_cast<double>(s.n);
  double ss = 0.0;
  for (std::size_t i = 1; i < t.size(); ++i) {
    const double d = (t[i] - t[i - 1]) - s.mean;
    ss += d * d;
  }
  s.std = std::sqrt(ss / static_cast<double>(s.n));
  return s;
}

struct TimestepEstimate {
  double period = 0.0;  // seconds
  double rate = 0.0;    // Hz
  std::size_t n_gaps = 0;
  std::size_t n_excluded = 0;
  double raw_mean = 0.0;
  double raw_std = 0.0;
};

/// Mean timestep after one pass of outlier exclusion: gaps farther than
/// m standard deviations from the mean gap are dropped before re-averaging.
inline TimestepEstimate robust_timestep(std::span<const double> t, double m) {
  detail::require(t.size() >= 3, "timestep estimation needs at least 3 timestamps");
  detail::require(m > 0.0, "outlier threshold m must be positive");
  const GapStats all = timegap_stats(t);
  const double limit = m * all.std;
  double sum = 0.0;
  std::size_t kept = 0;
  for (std::size_t i = 1; i < t.size(); ++i) {
    const double d = t[i] - t[i - 1];
    if (std::abs(d - all.mean) <= limit) {
      sum += d;
      ++kept;
    }
  }
  detail::require(kept > 0, "all timesteps excluded as outliers");
  TimestepEstimate e;
  e.period = sum / static_cast<double>(kept);
  detail::require(e.period > 0.0 && std::isfinite(e.period), "nonpositive mean timestep");
  e.rate = 1.0 / e.period;
  e.n_gaps = all.n;
  e.n_excluded = all.n - kept;
  e.raw_mean = all.mean;
  e.raw_std = all.std;
  return e;
}

/// Lattice anchor + k * period, restricted to [k_min, k_max].
struct SyntheticGrid {
  double anchor = 0.0;
  double period = 0.0;
  std::int64_t k_min = 0;
  std::int64_t k_max = 0;

  double point(std::int64_t k) const { return anchor + static_cast<double>(k) * period; }

  /// Largest k with point(k) <= t, exact under floating point.
  std::int64_t floor_index(double t) const {
    auto k = static_cast<std::int64_t>(std::floor((t - anchor) / period));
    while (point(k) > t) --k;
    while (point(k + 1) <= t) ++k;
    return k;
  }

  std::size_t size() const { return static_cast<std::size_t>(k_max - k_min + 1); }
};

inline SyntheticGrid make_grid(double anchor, double period, double lower, double upper) {
  detail::require(period > 0.0 && std::isfinite(period), "grid period must be positive");
  SyntheticGrid g;
  g.anchor = anchor;
  g.period = period;
  g.k_min = g.floor_index(lower);
  g.k_max = g.floor_index(upper);
  return g;
}

inline double mean_of(std::span<const double> t) {
  double sum = 0.0;
  for (double v : t) sum += v;
  return sum / static_cast<double>(t.size());
}

/// Grid anchored at the mean raw timestamp, covering [t_first - delta, t_last].
inline SyntheticGrid synthesize_grid(std::span<const double> t, double period, double delta) {
  detail::require(!t.empty(), "cannot build a grid for an empty stream");
  detail::require(delta >= 0.0, "delta must be nonnegative");
  return make_grid(mean_of(t), period, t.front() - delta, t.back());
}

/// One grid index per raw timestamp.
struct DejitterMapping {
  std::vector<std::int64_t> alloc;
};

/// End-to-start allocation. Each timestamp takes the largest grid index at or
/// below it that is still free; since later timestamps were placed first,
/// "free" reduces to "below the successor's index".
inline DejitterMapping allocate(std::span<const double> t, const SyntheticGrid& grid) {
  DejitterMapping m;
  m.alloc.resize(t.size());
  for (std::size_t r = t.size(); r-- > 0;) {
    std::int64_t k = grid.floor_index(t[r]);
    if (r + 1 < t.size()) k = std::min(k, m.alloc[r + 1] - 1);
    if (k < grid.k_min) {
      detail::fail("grid underflow at raw index " + std::to_string(r) + "; increase delta");
    }
    m.alloc[r] = k;
  }
  return m;
}

struct DropReport {
  std::vector<std::int64_t> dropped_k;
  std::size_t count() const { return dropped_k.size(); }
};

/// Grid indices left unallocated between the first and last allocated ones.
inline DropReport detect_drops(const DejitterMapping& mapping, const SyntheticGrid& /*grid*/) {
  DropReport r;
  const auto& a = mapping.alloc;
  for (std::size_t i = 1; i < a.size(); ++i) {
    for (std::int64_t k = a[i - 1] + 1; k < a[i]; ++k) r.dropped_k.push_back(k);
  }
  return r;
}

/// Normalized magnitude of sum_j exp(2 pi i (t_j - t_0) / period), in [0, 1].
inline double phase_coherence(std::span<const double> t, double period) {
  if (t.empty()) return 0.0;
  const double f = 1.0 / period;
  double re = 0.0;
  double im = 0.0;
  for (double v : t) {
    double cycles = (v - t.front()) * f;
    cycles -= std::floor(cycles);
    const double ph = 2.0 * std::numbers::pi * cycles;
    re += std::cos(ph);
    im += std::sin(ph);
  }
  return std::hypot(re, im) / static_cast<double>(t.size());
}

struct PeriodRefinement {
  double period = 0.0;
  double coherence = 0.0;          // at `period`
  double initial_coherence = 0.0;  // at the starting estimate
  bool applied = false;
};

namespace detail {

// Frequency in [lo, hi] (step `step`) maximizing |sum exp(2 pi i f u_j)|.
// Phasors are advanced by complex rotation rather than recomputed.
inline double coherence_scan(std::span<const double> u, double lo, double hi, double step) {
  const std::size_t n = u.size();
  std::vector<double> zr(n), zi(n), wr(n), wi(n);
  for (std::size_t j = 0; j < n; ++j) {
    double c = lo * u[j];
    c -= std::floor(c);
    zr[j] = std::cos(2.0 * std::numbers::pi * c);
    zi[j] = std::sin(2.0 * std::numbers::pi * c);
    double s = step * u[j];
    s -= std::floor(s);
    wr[j] = std::cos(2.0 * std::numbers::pi * s);
    wi[j] = std::sin(2.0 * std::numbers::pi * s);
  }
  const auto steps = static_cast<std::size_t>(std::ceil((hi - lo) / step)) + 1;
  double best_f = lo;
  double best = -1.0;
  for (std::size_t s = 0; s < steps; ++s) {
    double re = 0.0;
    double im = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      re += zr[j];
      im += zi[j];
      const double r = zr[j] * wr[j] - zi[j] * wi[j];
      zi[j] = zr[j] * wi[j] + zi[j] * wr[j];
      zr[j] = r;
    }
    const double mag = re * re + im * im;
    if (mag > best) {
      best = mag;
      best_f = lo + static_cast<double>(s) * step;
    }
  }
  return best_f;
}

}  // namespace detail

/// Sharpens a period estimate by locating the phase-coherence peak of the
/// timestamps within +-range (relative) of `initial`. Dropped samples do not
/// disturb the peak, unlike a mean of gaps. The result is only applied when
/// the peak is coherent enough to trust and beats the starting estimate.
inline PeriodRefinement refine_period(std::span<const double> t, double initial, double range,
                                      double min_coherence) {
  detail::require(initial > 0.0, "initial period must be positive");
  detail::require(range > 0.0 && range < 0.5, "refinement range must be in (0, 0.5)");
  PeriodRefinement out;
  out.period = initial;
  out.initial_coherence = phase_coherence(t, initial);
  out.coherence = out.initial_coherence;
  if (t.size() < 3 || !(t.back() > t.front())) return out;

  std::vector<double> u(t.size());
  for (std::size_t j = 0; j < t.size(); ++j) u[j] = t[j] - t.front();

  const double f0 = 1.0 / initial;
  double lo = f0 * (1.0 - range);
  double hi = f0 * (1.0 + range);
  constexpr std::size_t kCoarseBlock = std::size_t{1} << 15;
  std::size_t block = std::min(u.size(), kCoarseBlock);
  double step = 0.0;
  while (true) {
    const auto part = std::span<const double>(u).first(block);
    if (!(part.back() > 0.0)) break;
    step = 0.25 / part.back();
    const double best = detail::coherence_scan(part, lo, hi, step);
    const double reach = block == u.size() ? 1.0 : 2.0;
    lo = std::max(lo, best - reach * step);
    hi = std::min(hi, best + reach * step);
    if (block == u.size()) break;
    block = std::min(u.size(), block * 4);
  }

  auto score = [&](double f) { return phase_coherence(t, 1.0 / f); };
  constexpr double kInvPhi = 0.6180339887498949;
  double a = lo;
  double b = hi;
  double x1 = b - kInvPhi * (b - a);
  double x2 = a + kInvPhi * (b - a);
  double s1 = score(x1);
  double s2 = score(x2);
  for (int it = 0; it < 64 && (b - a) > 1e-15 * f0; ++it) {
    if (s1 > s2) {
      b = x2;
      x2 = x1;
      s2 = s1;
      x1 = b - kInvPhi * (b - a);
      s1 = score(x1);
    } else {
      a = x1;
      x1 = x2;
      s1 = s2;
      x2 = a + kInvPhi * (b - a);
      s2 = score(x2);
    }
  }
  const double f_best = s1 > s2 ? x1 : x2;
  const double c_best = std::max(s1, s2);
  if (c_best >= min_coherence && c_best > out.initial_coherence * (1.0 + 1e-9)) {
    out.period = 1.0 / f_best;
    out.coherence = c_best;
    out.applied = true;
  }
  return out;
}

/// Grid phase from the timestamps' positions modulo the period. With
/// residues r_i in [0, 1), the phase p minimizing the mean forward distance
/// mean((r_i - p) mod 1) sits at the sharp rising edge of the residue
/// density, which for nonnegative delays is the delay-free lattice. The
/// minimum is attained at a residue; over sorted residues it equals
/// (sum r - n r_j + j) / n. Returns an anchor below that phase by
/// `margin` times the minimum mean residue, or nullopt when the minimum
/// exceeds `max_spread` (no usable concentration). The margin absorbs the
/// edge estimate's upward bias and residual period drift: a grid slightly
/// early only risks the final sample, one slightly late shifts whole runs.
inline std::optional<double> lattice_phase_anchor(std::span<const double> t, double period,
                                                  double anchor, double max_spread,
                                                  double margin = 0.0) {
  if (t.empty()) return std::nullopt;
  std::vector<double> r(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double c = (t[i] - anchor) / period;
    r[i] = c - std::floor(c);
  }
  std::sort(r.begin(), r.end());
  const auto n = static_cast<double>(r.size());
  double sum = 0.0;
  for (double v : r) sum += v;
  std::size_t best = 0;
  double best_m = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < r.size(); ++j) {
    const double m = (sum - n * r[j] + static_cast<double>(j)) / n;
    if (m < best_m) {
      best_m = m;
      best = j;
    }
  }
  if (best_m > max_spread) return std::nullopt;
  const double guard = std::min(1e-10, 1e-6 * period) + margin * best_m * period;
  return anchor + r[best] * period - guard;
}

struct DejitterConfig {
  double m = 3.0;        // outlier threshold, standard deviations
  double delta = 0.100;  // grid extension before the first timestamp, seconds
  bool refine_period = true;
  double refine_range = 0.005;
  double min_coherence = 0.1;
  bool align_phase = true;
  double max_phase_spread = 0.45;  // mean forward residue, periods
  double phase_margin = 0.1;        // grid lowered by this fraction of the mean residue

  void validate() const {
    detail::require(m > 0.0, "m must be positive");
    detail::require(delta >= 0.0, "delta must be nonnegative");
    detail::require(refine_range > 0.0 && refine_range < 0.5, "refine_range must be in (0, 0.5)");
    detail::require(max_phase_spread > 0.0 && max_phase_spread < 1.0,
                    "max_phase_spread must be in (0, 1)");
    detail::require(phase_margin >= 0.0 && phase_margin < 1.0, "phase_margin must be in [0, 1)");
  }
};

struct DejitterResult {
  TimestepEstimate estimate;
  PeriodRefinement refinement;
  double period = 0.0;  // grid spacing actually used
  double delta = 0.0;
  bool phase_aligned = false;
  SyntheticGrid grid;
  DejitterMapping mapping;
  std::vector<double> corrected;
  DropReport drops;
  GapStats before;
  GapStats after;

  /// Corrected span divided by grid slots spanned; equals `period` and is
  /// unaffected by dropped samples, unlike after.mean.
  double drop_adjusted_mean() const {
    const auto slots = mapping.alloc.back() - mapping.alloc.front();
    return (corrected.back() - corrected.front()) / static_cast<double>(slots);
  }
};

inline DejitterResult dejitter(std::span<const double> t, const DejitterConfig& cfg = {}) {
  cfg.validate();
  detail::require(t.size() >= 3, "de-jittering needs at least 3 timestamps");
  DejitterResult r;
  r.delta = cfg.delta;
  r.estimate = robust_timestep(t, cfg.m);
  r.period = r.estimate.period;
  r.refinement.period = r.period;
  if (cfg.refine_period) {
    r.refinement = refine_period(t, r.period, cfg.refine_range, cfg.min_coherence);
    r.period = r.refinement.period;
  }
  r.grid = synthesize_grid(t, r.period, cfg.delta);
  if (cfg.align_phase) {
    if (auto a = lattice_phase_anchor(t, r.period, r.grid.anchor, cfg.max_phase_spread,
                                          cfg.phase_margin)) {
      r.grid = make_grid(*a, r.period, t.front() - cfg.delta, t.back());
      r.phase_aligned = true;
    }
  }
  r.mapping = allocate(t, r.grid);
  r.corrected.resize(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) r.corrected[i] = r.grid.point(r.mapping.alloc[i]);
  r.drops = detect_drops(r.mapping, r.grid);
  r.before = timegap_stats(t);
  r.after = timegap_stats(r.corrected);
  return r;
}

inline DejitterResult dejitter(const SampleStream& s, const DejitterConfig& cfg = {}) {
  return dejitter(std::span<const double>(s.timestamps), cfg);
}

}  // namespace pulsealign
