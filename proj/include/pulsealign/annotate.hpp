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

// Per-frame labeling: each frame takes the processed sensor value of the
// latest sensor sample at or before the frame's de-jittered time.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pulsealign/error.hpp"
#include "pulsealign/ingest.hpp"
#include "pulsealign/sigproc.hpp"

namespace pulsealign {

/// Frame times on the common (frame-origin) time base.
struct FrameTimeline {
  std::vector<std::int64_t> index;
  std::vector<double> raw;
  std::vector<double> dejittered;

  std::size_t size() const { return dejittered.size(); }
};

struct AnnotationResult {
  std::vector<AnnotatedFrame> frames;
  std::size_t skipped_head = 0;
  std::size_t sensor_visits = 0;  // sensor-sample comparisons performed
};

namespace detail {

inline void require_strictly_increasing(std::span<const double> t, const char* what) {
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (!(t[i] > t[i - 1])) {
      fail(std::string(what) + " timestamps not strictly increasing at index " +
           std::to_string(i));
    }
  }
}

inline void check_join_inputs(const FrameTimeline& frames, const ProcessedSignal& sensor) {
  require(frames.index.size() == frames.size() && frames.raw.size() == frames.size(),
          "frame timeline columns differ in length");
  require(sensor.filtered.size() == sensor.size(), "processed signal columns differ in length");
  require(sensor.size() > 0, "no sensor samples to annotate from");
  require_strictly_increasing(frames.dejittered, "frame");
  require_strictly_increasing(sensor.timestamps, "sensor");
}

inline AnnotatedFrame make_annotation(const FrameTimeline& frames, std::size_t i,
                                      const ProcessedSignal& sensor, std::size_t j) {
  return {frames.index[i], frames.raw[i], frames.dejittered[i], sensor.filtered[j], j,
          sensor.timestamps[j]};
}

}  // namespace detail

/// Linear-time join with a cursor that only moves forward. Frames earlier
/// than the first sensor sample are skipped and counted.
inline AnnotationResult annotate_frames(const FrameTimeline& frames, const ProcessedSignal& sensor) {
  detail::check_join_inputs(frames, sensor);
  AnnotationResult r;
  const auto& st = sensor.timestamps;
  std::size_t cursor = 0;
  bool started = false;
  r.frames.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const double f = frames.dejittered[i];
    if (!started) {
      ++r.sensor_visits;
      if (st[0] > f) {
        ++r.skipped_head;
        continue;
      }
      started = true;
    }
    while (cursor + 1 < st.size()) {
      ++r.sensor_visits;
      if (st[cursor + 1] > f) break;
      ++cursor;
    }
    r.frames.push_back(detail::make_annotation(frames, i, sensor, cursor));
  }
  detail::require(!r.frames.empty(), "no frame has a preceding sensor sample");
  return r;
}

/// Quadratic reference: full scan of the sensor samples for every frame.
inline AnnotationResult annotate_brute(const FrameTimeline& frames, const ProcessedSignal& sensor) {
  detail::check_join_inputs(frames, sensor);
  AnnotationResult r;
  const auto& st = sensor.timestamps;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    bool found = false;
    std::size_t best = 0;
    for (std::size_t j = 0; j < st.size(); ++j) {
      ++r.sensor_visits;
      if (st[j] <= frames.dejittered[i] && (!found || st[j] > st[best])) {
        best = j;
        found = true;
      }
    }
    if (!found) {
      ++r.skipped_head;
      continue;
    }
    r.frames.push_back(detail::make_annotation(frames, i, sensor, best));
  }
  detail::require(!r.frames.empty(), "no frame has a preceding sensor sample");
  return r;
}

enum class OverlaySeries { sensor, frame_labels };

struct OverlayRow {
  OverlaySeries series = OverlaySeries::sensor;
  double t = 0.0;
  double value = 0.0;
};

/// Long-format rows: the full-rate filtered signal followed by the
/// per-frame labels (placed at their frame times).
inline std::vector<OverlayRow> overlay_export(std::span<const AnnotatedFrame> annotations,
                                              const ProcessedSignal& sensor) {
  detail::require(!annotations.empty(), "no annotations to overlay");
  std::vector<OverlayRow> rows;
  rows.reserve(sensor.size() + annotations.size());
  for (std::size_t j = 0; j < sensor.size(); ++j) {
    rows.push_back({OverlaySeries::sensor, sensor.timestamps[j], sensor.filtered[j]});
  }
  for (const auto& a : annotations) rows.push_back({OverlaySeries::frame_labels, a.frame_ts, a.label});
  return rows;
}

inline void write_overlay(const std::filesystem::path& path, std::span<const OverlayRow> rows,
                          const StreamOrigin& origin) {
  AtomicFile file(path);
  auto& out = file.stream();
  out << "series,t_us,value\n";
  for (const auto& r : rows) {
    out << (r.series == OverlaySeries::sensor ? "sensor" : "frame_labels") << ','
        << format_us(origin, r.t) << ',' << detail::format_double(r.value) << '\n';
  }
  file.commit();
}

/// `ts_us,raw,smoothed,filtered`, timestamps de-jittered.
inline void write_processed(const std::filesystem::path& path, const ProcessedSignal& p,
                            const StreamOrigin& origin) {
  AtomicFile file(path);
  auto& out = file.stream();
  out << "ts_us,raw,smoothed,filtered\n";
  for (std::size_t j = 0; j < p.size(); ++j) {
    out << format_us(origin, p.timestamps[j]) << ',' << detail::format_double(p.raw[j]) << ','
        << detail::format_double(p.smoothed[j]) << ',' << detail::format_double(p.filtered[j])
        << '\n';
  }
  file.commit();
}

inline ProcessedSignal read_processed(const std::filesystem::path& path,
                                      const StreamOrigin& origin) {
  detail::CsvReader csv(path, "ts_us,raw,smoothed,filtered");
  ProcessedSignal p;
  std::vector<std::string_view> f;
  while (csv.next(f)) {
    p.timestamps.push_back(parse_us(f[0], origin, csv.line()));
    p.raw.push_back(detail::parse_double(f[1], csv.line(), "raw"));
    p.smoothed.push_back(detail::parse_double(f[2], csv.line(), "smoothed"));
    p.filtered.push_back(detail::parse_double(f[3], csv.line(), "filtered"));
  }
  detail::require(p.size() >= 1, path.string() + ": no samples");
  return p;
}

}  // namespace pulsealign
