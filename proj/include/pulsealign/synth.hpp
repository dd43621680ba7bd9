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

// Synthetic timestamp streams with known ground truth, and pulse-like
// sensor signals.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>
#include <variant>
#include <vector>

#include "pulsealign/error.hpp"

namespace pulsealign {

/// std::mt19937_64 (bit-exact by the C++ standard) with hand-written
/// conversions so draws do not depend on the standard library's
/// distribution implementations:
///   uniform() = (x >> 11) * 2^-53, in [0, 1)
///   normal()  = sqrt(-2 ln(1 - u1)) * cos(2 pi u2)   (Box-Muller, one output)
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

/// |N(0, sigma^2)| delay.
struct HalfNormalDelay {
  double sigma = 0.0;
};

/// U[0, max) delay.
struct UniformDelay {
  double max = 0.0;
};

/// Samples are stamped when a transport buffer is flushed. Flushes happen
/// every `period` seconds, each late by |N(0, jitter^2)|; a sample's stamp is
/// the first flush at or after its capture.
struct BatchedDelay {
  double period = 0.0;
  double jitter = 0.0;
};

using DelayModel = std::variant<HalfNormalDelay, UniformDelay, BatchedDelay>;

struct JitterModel {
  double period = 0.0;  // true sampling period, seconds
  DelayModel delay = HalfNormalDelay{};
  double drop_rate = 0.0;
  std::uint64_t seed = 0;
};

struct SynthTruth {
  std::vector<double> event_times;  // ideal capture time of each emitted sample
  std::vector<std::size_t> slots;   // ideal slot index of each emitted sample
  std::vector<std::size_t> dropped_indices;
};

struct SynthStream {
  std::vector<double> timestamps;
  SynthTruth truth;
};

/// Ideal slots s * period; each slot is dropped with probability drop_rate,
/// otherwise stamped at event + delay. Stamps are made nondecreasing
/// (a stamp can be delayed by its predecessor, never advanced), so every
/// delay stays nonnegative.
inline SynthStream gen_timestamps(std::size_t n_ideal, const JitterModel& model) {
  detail::require(n_ideal >= 3, "need at least 3 ideal slots");
  detail::require(model.period > 0.0, "period must be positive");
  detail::require(model.drop_rate >= 0.0 && model.drop_rate < 1.0, "drop rate must be in [0, 1)");
  Rng rng(model.seed);
  SynthStream out;
  out.timestamps.reserve(n_ideal);

  // Flush schedule for the batched model, extended lazily.
  std::vector<double> flushes;
  auto flush_at_or_after = [&](double t, const BatchedDelay& b) {
    while (flushes.empty() || flushes.back() < t) {
      const double late = std::abs(rng.normal()) * b.jitter;
      const double next = static_cast<double>(flushes.size()) * b.period + late;
      flushes.push_back(flushes.empty() ? next : std::max(next, flushes.back()));
    }
    return *std::lower_bound(flushes.begin(), flushes.end(), t);
  };
  if (const auto* b = std::get_if<BatchedDelay>(&model.delay)) {
    detail::require(b->period > 0.0 && b->jitter >= 0.0, "invalid batched delay model");
  }

  for (std::size_t s = 0; s < n_ideal; ++s) {
    const double event = static_cast<double>(s) * model.period;
    const bool dropped = rng.uniform() < model.drop_rate;
    double stamp = event;
    if (const auto* h = std::get_if<HalfNormalDelay>(&model.delay)) {
      stamp += std::abs(rng.normal()) * h->sigma;
    } else if (const auto* u = std::get_if<UniformDelay>(&model.delay)) {
      stamp += rng.uniform() * u->max;
    } else {
      stamp = flush_at_or_after(event, std::get<BatchedDelay>(model.delay));
    }
    if (dropped) {
      out.truth.dropped_indices.push_back(s);
      continue;
    }
    if (!out.timestamps.empty()) stamp = std::max(stamp, out.timestamps.back());
    out.timestamps.push_back(stamp);
    out.truth.event_times.push_back(event);
    out.truth.slots.push_back(s);
  }
  detail::require(out.timestamps.size() >= 2, "all samples dropped");
  return out;
}

/// Peaked periodic waveform cos(x) + 0.6 cos(2x) + 0.3 cos(3x) at hr_bpm/60
/// Hz plus white noise. The phase is reduced exactly in sample units so the
/// noiseless waveform repeats bit-for-bit when fs*60/hr_bpm is an integer.
inline std::vector<double> gen_pulse_signal(double duration, double fs, double hr_bpm,
                                            double noise_std, std::uint64_t seed) {
  detail::require(fs > 0.0 && std::isfinite(fs), "sampling rate must be positive");
  detail::require(duration > 0.0 && std::isfinite(duration), "duration must be positive");
  detail::require(hr_bpm > 0.0, "heart rate must be positive");
  const auto n = static_cast<std::size_t>(std::llround(duration * fs));
  detail::require(n >= 1, "duration shorter than one sample");
  Rng rng(seed);
  const double cycle = 60.0 * fs;  // samples * bpm per beat
  std::vector<double> x(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double phase = std::fmod(static_cast<double>(j) * hr_bpm, cycle) / cycle;
    const double a = 2.0 * std::numbers::pi * phase;
    const double wave = std::cos(a) + 0.6 * std::cos(2.0 * a) + 0.3 * std::cos(3.0 * a);
    x[j] = wave + (noise_std > 0.0 ? noise_std * rng.normal() : 0.0);
  }
  return x;
}

}  // namespace pulsealign
