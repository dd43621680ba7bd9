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

// Full dataset pipeline: exclusions -> de-jitter -> smoothing/bandpass ->
// frame annotation, with every artifact written atomically once all stages
// have succeeded.

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pulsealign/annotate.hpp"
#include "pulsealign/baseline.hpp"
#include "pulsealign/error.hpp"
#include "pulsealign/ingest.hpp"
#include "pulsealign/report.hpp"
#include "pulsealign/sigproc.hpp"
#include "pulsealign/timebase.hpp"

namespace pulsealign {

/// Error tagged with the pipeline stage that raised it.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// Tunables shared by the subcommands and the pipeline.
struct Settings {
  DejitterConfig frame_dejitter;
  DejitterConfig sensor_dejitter;
  SavGolConfig savgol;
  BandpassConfig bandpass;  // fs is filled in from the sensor stream
  std::optional<KalmanConfig> frame_kalman;
  std::optional<KalmanConfig> sensor_kalman;
};

namespace detail {

inline void read_dejitter(const nlohmann::json& j, DejitterConfig& c) {
  c.m = j.value("m", c.m);
  if (j.contains("delta_ms")) c.delta = j.at("delta_ms").get<double>() * 1e-3;
  c.refine_period = j.value("refine_period", c.refine_period);
  c.refine_range = j.value("refine_range", c.refine_range);
  c.min_coherence = j.value("min_coherence", c.min_coherence);
  c.align_phase = j.value("align_phase", c.align_phase);
  c.max_phase_spread = j.value("max_phase_spread", c.max_phase_spread);
  c.phase_margin = j.value("phase_margin", c.phase_margin);
}

inline KalmanConfig read_kalman(const nlohmann::json& j) {
  KalmanConfig k;
  k.q_time = j.at("q_time_s2").get<double>();
  k.q_period = j.at("q_period_s2").get<double>();
  k.r = j.at("r_s2").get<double>();
  k.initial_period = j.at("initial_period_s").get<double>();
  return k;
}

}  // namespace detail

/// Reads the tunables from a config document. `dejitter` applies to both
/// streams; `frame_dejitter` / `sensor_dejitter` refine it per stream.
inline Settings settings_from_json(const nlohmann::json& j) {
  Settings s;
  try {
    if (j.contains("dejitter")) {
      detail::read_dejitter(j.at("dejitter"), s.frame_dejitter);
      detail::read_dejitter(j.at("dejitter"), s.sensor_dejitter);
    }
    if (j.contains("frame_dejitter")) detail::read_dejitter(j.at("frame_dejitter"), s.frame_dejitter);
    if (j.contains("sensor_dejitter")) {
      detail::read_dejitter(j.at("sensor_dejitter"), s.sensor_dejitter);
    }
    if (j.contains("savgol")) {
      s.savgol.window = j.at("savgol").value("window", s.savgol.window);
      s.savgol.order = j.at("savgol").value("order", s.savgol.order);
    }
    if (j.contains("bandpass")) {
      const auto& b = j.at("bandpass");
      s.bandpass.low_hz = b.value("low_hz", s.bandpass.low_hz);
      s.bandpass.high_hz = b.value("high_hz", s.bandpass.high_hz);
      s.bandpass.order = b.value("order", s.bandpass.order);
    }
    if (j.contains("kalman")) {
      const auto& k = j.at("kalman");
      if (k.contains("frame")) s.frame_kalman = detail::read_kalman(k.at("frame"));
      if (k.contains("sensor")) s.sensor_kalman = detail::read_kalman(k.at("sensor"));
    }
  } catch (const nlohmann::json::exception& e) {
    detail::fail(std::string("invalid config: ") + e.what());
  }
  return s;
}

struct PipelineConfig {
  std::filesystem::path frames;
  std::filesystem::path sensor;
  std::optional<std::filesystem::path> frame_exclusions;
  std::optional<std::filesystem::path> sensor_exclusions;
  std::filesystem::path output_dir;
  Settings settings;
};

/// Paths in the document are resolved against `base_dir`.
inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j,
                                                const std::filesystem::path& base_dir) {
  PipelineConfig c;
  auto path_of = [&](const char* key) -> std::optional<std::filesystem::path> {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    std::filesystem::path p = j.at(key).get<std::string>();
    return p.is_absolute() ? p : base_dir / p;
  };
  try {
    if (auto p = path_of("frames")) c.frames = *p;
    if (auto p = path_of("sensor")) c.sensor = *p;
    c.frame_exclusions = path_of("frame_exclusions");
    c.sensor_exclusions = path_of("sensor_exclusions");
    if (auto p = path_of("output_dir")) c.output_dir = *p;
  } catch (const nlohmann::json::exception& e) {
    detail::fail(std::string("invalid config: ") + e.what());
  }
  c.settings = settings_from_json(j);
  return c;
}

inline nlohmann::json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) detail::fail("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    detail::fail("invalid JSON in " + path.string() + ": " + e.what());
  }
}

/// A stream together with its de-jittered timestamps (same origin).
struct DejitteredStream {
  SampleStream stream;
  std::vector<double> dejittered;
};

inline std::string_view dejittered_header(StreamKind kind) {
  return kind == StreamKind::frame ? "index,ts_us,dejittered_ts_us"
                                   : "ts_us,value,dejittered_ts_us";
}

inline void write_dejittered(const std::filesystem::path& path, const DejitteredStream& d) {
  const auto& s = d.stream;
  AtomicFile file(path);
  auto& out = file.stream();
  out << dejittered_header(s.kind) << '\n';
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto ts = s.origin.absolute_us(s.timestamps[i]);
    if (s.kind == StreamKind::frame) {
      out << s.indices[i] << ',' << ts;
    } else {
      out << ts << ',' << detail::format_double(s.values[i]);
    }
    out << ',' << format_us(s.origin, d.dejittered[i]) << '\n';
  }
  file.commit();
}

/// Origin is the first raw timestamp in the file.
inline DejitteredStream load_dejittered(const std::filesystem::path& path, StreamKind kind) {
  detail::CsvReader csv(path, dejittered_header(kind));
  DejitteredStream d;
  d.stream.kind = kind;
  std::vector<std::int64_t> raw;
  std::vector<std::string> dj_text;
  std::vector<std::size_t> lines;
  std::vector<std::string_view> f;
  std::int64_t ordinal = 0;
  while (csv.next(f)) {
    if (kind == StreamKind::frame) {
      d.stream.indices.push_back(detail::parse_int(f[0], csv.line(), "index"));
      raw.push_back(detail::parse_int(f[1], csv.line(), "ts_us"));
    } else {
      raw.push_back(detail::parse_int(f[0], csv.line(), "ts_us"));
      d.stream.values.push_back(detail::parse_double(f[1], csv.line(), "value"));
      d.stream.indices.push_back(ordinal++);
    }
    dj_text.emplace_back(f[2]);
    lines.push_back(csv.line());
  }
  detail::require(raw.size() >= 2, path.string() + ": fewer than 2 samples");
  d.stream.origin.epoch_us = raw.front();
  for (std::size_t i = 0; i < raw.size(); ++i) {
    d.stream.timestamps.push_back(d.stream.origin.relative(raw[i]));
    d.dejittered.push_back(parse_us(dj_text[i], d.stream.origin, lines[i]));
  }
  return d;
}

/// Sampling rate implied by de-jittered timestamps: span over grid slots,
/// with slot counts taken relative to the outlier-excluded mean gap.
inline double grid_rate(std::span<const double> dejittered) {
  const auto est = robust_timestep(dejittered, 3.0);
  double slots = 0.0;
  for (std::size_t i = 1; i < dejittered.size(); ++i) {
    slots += std::round((dejittered[i] - dejittered[i - 1]) / est.period);
  }
  return slots / (dejittered.back() - dejittered.front());
}

inline FrameTimeline frame_timeline(const DejitteredStream& frames) {
  FrameTimeline tl;
  tl.index = frames.stream.indices;
  tl.raw = frames.stream.timestamps;
  tl.dejittered = frames.dejittered;
  return tl;
}

/// Processed signal with timestamps moved onto the frame origin.
inline ProcessedSignal rebased(ProcessedSignal p, const StreamOrigin& from, const StreamOrigin& to) {
  p.timestamps = rebase(p.timestamps, from, to);
  return p;
}

struct PipelineResult {
  std::size_t frames = 0;
  std::size_t annotations = 0;
  std::size_t skipped_head = 0;
  nlohmann::json summary;
  std::vector<std::filesystem::path> artifacts;
};

namespace detail {

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

}  // namespace detail

inline PipelineResult run_pipeline(const PipelineConfig& cfg) {
  const Settings& st = cfg.settings;
  auto [frames, sensor] = detail::stage("load", [&] {
    detail::require(!cfg.frames.empty(), "no frame stream configured");
    detail::require(!cfg.sensor.empty(), "no sensor stream configured");
    detail::require(!cfg.output_dir.empty(), "no output directory configured");
    return std::pair{load_stream(cfg.frames, StreamKind::frame),
                     load_stream(cfg.sensor, StreamKind::sensor)};
  });

  std::size_t removed_frames = 0;
  std::size_t removed_sensor = 0;
  detail::stage("exclude", [&] {
    if (cfg.frame_exclusions) {
      auto r = apply_exclusions(frames, load_exclusions(*cfg.frame_exclusions));
      frames = std::move(r.stream);
      removed_frames = r.removed;
    }
    if (cfg.sensor_exclusions) {
      auto r = apply_exclusions(sensor, load_exclusions(*cfg.sensor_exclusions));
      sensor = std::move(r.stream);
      removed_sensor = r.removed;
    }
  });

  auto [frame_dj, sensor_dj] = detail::stage("dejitter", [&] {
    return std::pair{dejitter(frames, st.frame_dejitter), dejitter(sensor, st.sensor_dejitter)};
  });

  auto [frame_cmp, sensor_cmp] = detail::stage("compare", [&] {
    return std::pair{compare_methods(frames.timestamps, frame_dj, st.frame_kalman),
                     compare_methods(sensor.timestamps, sensor_dj, st.sensor_kalman)};
  });

  const ProcessedSignal processed = detail::stage("filter", [&] {
    BandpassConfig band = st.bandpass;
    band.fs = 1.0 / sensor_dj.period;
    return process_signal(sensor.values, sensor_dj.corrected, st.savgol, band);
  });

  const DejitteredStream frame_stream{frames, frame_dj.corrected};
  const DejitteredStream sensor_stream{sensor, sensor_dj.corrected};
  const ProcessedSignal on_frame_base = rebased(processed, sensor.origin, frames.origin);
  const AnnotationResult ann = detail::stage("annotate", [&] {
    return annotate_frames(frame_timeline(frame_stream), on_frame_base);
  });
  const auto overlay = overlay_export(ann.frames, on_frame_base);

  PipelineResult result;
  result.frames = frames.size();
  result.annotations = ann.frames.size();
  result.skipped_head = ann.skipped_head;
  result.summary = {
      {"frames",
       {{"input", cfg.frames.string()},
        {"samples", frames.size()},
        {"excluded", removed_frames},
        {"dejitter", dejitter_json(frame_dj, frames.origin)},
        {"comparison", comparison_json(frame_cmp)}}},
      {"sensor",
       {{"input", cfg.sensor.string()},
        {"samples", sensor.size()},
        {"excluded", removed_sensor},
        {"dejitter", dejitter_json(sensor_dj, sensor.origin)},
        {"comparison", comparison_json(sensor_cmp)}}},
      {"filter",
       {{"savgol_window", st.savgol.window},
        {"savgol_order", st.savgol.order},
        {"band_low_hz", st.bandpass.low_hz},
        {"band_high_hz", st.bandpass.high_hz},
        {"band_order", st.bandpass.order},
        {"fs_hz", 1.0 / sensor_dj.period}}},
      {"annotation",
       {{"annotated", ann.frames.size()},
        {"skipped_head", ann.skipped_head},
        {"sensor_visits", ann.sensor_visits}}},
  };

  detail::stage("write", [&] {
    const auto& dir = cfg.output_dir;
    std::filesystem::create_directories(dir);
    auto out = [&](const char* name) {
      result.artifacts.push_back(dir / name);
      return dir / name;
    };
    write_dejittered(out("frames_dejittered.csv"), frame_stream);
    write_dejittered(out("sensor_dejittered.csv"), sensor_stream);
    write_text_atomic(out("dejitter_frames.json"),
                      dejitter_json(frame_dj, frames.origin).dump(2) + "\n");
    write_text_atomic(out("dejitter_sensor.json"),
                      dejitter_json(sensor_dj, sensor.origin).dump(2) + "\n");
    write_processed(out("processed_signal.csv"), processed, sensor.origin);
    write_overlay(out("overlay.csv"), overlay, frames.origin);
    write_annotations(out("annotations.csv"), ann.frames, frames.origin);
    write_text_atomic(out("summary.json"), result.summary.dump(2) + "\n");
  });
  return result;
}

}  // namespace pulsealign
