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

// JSON and CSV renderings of de-jitter and comparison results. User-facing
// times are milliseconds.

#include <cstdio>
#include <string>

#include <json.hpp>

#include "pulsealign/baseline.hpp"
#include "pulsealign/ingest.hpp"
#include "pulsealign/timebase.hpp"

namespace pulsealign {

inline nlohmann::json gap_json(const GapStats& g) {
  return {{"mean_ms", g.mean * 1e3}, {"std_ms", g.std * 1e3}, {"n", g.n}};
}

inline nlohmann::json dejitter_json(const DejitterResult& r, const StreamOrigin& origin) {
  nlohmann::json drops = nlohmann::json::array();
  for (auto k : r.drops.dropped_k) {
    drops.push_back({{"k", k}, {"t_s", r.grid.point(k)}});
  }
  return {
      {"T_s", r.period},
      {"rate_hz", 1.0 / r.period},
      {"n_excluded", r.estimate.n_excluded},
      {"delta_s", r.delta},
      {"T_initial_s", r.estimate.period},
      {"period_refined", r.refinement.applied},
      {"coherence", r.refinement.coherence},
      {"phase_aligned", r.phase_aligned},
      {"origin_us", origin.epoch_us},
      {"drop_count", r.drops.count()},
      {"drops", std::move(drops)},
      {"gaps_before", gap_json(r.before)},
      {"gaps_after", gap_json(r.after)},
      {"drop_adjusted_mean_ms", r.drop_adjusted_mean() * 1e3},
  };
}

inline nlohmann::json comparison_json(const ComparisonReport& c) {
  return {
      {"raw", gap_json(c.raw)},
      {"kalman", gap_json(c.kalman)},
      {"dejitter", gap_json(c.dejitter)},
      {"theoretical", gap_json(c.theoretical)},
      {"T_s", c.period},
      {"dejitter_drop_adjusted_mean_ms", c.dejitter_drop_adjusted * 1e3},
      {"drop_count", c.drops},
  };
}

inline std::string ms3(double seconds) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", seconds * 1e3);
  return buf;
}

/// `method,mean_ms,std_ms` with rows raw, kalman, dejitter, theoretical.
inline std::string comparison_csv(const ComparisonReport& c) {
  std::string out = "method,mean_ms,std_ms\n";
  auto row = [&](const char* name, const GapStats& g) {
    out += std::string(name) + "," + ms3(g.mean) + "," + ms3(g.std) + "\n";
  };
  row("raw", c.raw);
  row("kalman", c.kalman);
  row("dejitter", c.dejitter);
  row("theoretical", c.theoretical);
  return out;
}

}  // namespace pulsealign
