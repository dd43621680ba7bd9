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

// pulsealign command-line front end.
//
//   pulsealign <stats|dejitter|compare|filter|annotate|synth|pipeline> [--config cfg.json] ...
//
// Exit status: 0 success, 1 data error, 2 usage error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "pulsealign/pulsealign.hpp"

namespace fs = std::filesystem;
using namespace pulsealign;

namespace {

struct Overrides {
  std::optional<double> delta_ms;
  std::optional<double> m;
  std::optional<int> sg_window;
  std::optional<int> sg_order;
  std::optional<double> band_low;
  std::optional<double> band_high;
  std::optional<int> order;
  bool no_refine = false;
  bool no_align = false;
};

void add_override_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--delta-ms", o.delta_ms, "grid extension before the first timestamp (ms)");
  cmd->add_option("--m", o.m, "outlier threshold in standard deviations");
  cmd->add_option("--sg-window", o.sg_window, "Savitzky-Golay window (odd)");
  cmd->add_option("--sg-order", o.sg_order, "Savitzky-Golay polynomial degree");
  cmd->add_option("--band-low-hz", o.band_low, "bandpass lower cutoff (Hz)");
  cmd->add_option("--band-high-hz", o.band_high, "bandpass upper cutoff (Hz)");
  cmd->add_option("--order", o.order, "Butterworth prototype order");
  cmd->add_flag("--no-refine", o.no_refine, "use the outlier-excluded mean timestep as is");
  cmd->add_flag("--no-align", o.no_align, "keep the grid anchored at the mean timestamp");
}

void apply(const Overrides& o, Settings& s) {
  for (DejitterConfig* d : {&s.frame_dejitter, &s.sensor_dejitter}) {
    if (o.delta_ms) d->delta = *o.delta_ms * 1e-3;
    if (o.m) d->m = *o.m;
    if (o.no_refine) d->refine_period = false;
    if (o.no_align) d->align_phase = false;
  }
  if (o.sg_window) s.savgol.window = *o.sg_window;
  if (o.sg_order) s.savgol.order = *o.sg_order;
  if (o.band_low) s.bandpass.low_hz = *o.band_low;
  if (o.band_high) s.bandpass.high_hz = *o.band_high;
  if (o.order) s.bandpass.order = *o.order;
}

StreamKind parse_kind(const std::string& k) {
  if (k == "frame") return StreamKind::frame;
  if (k == "sensor") return StreamKind::sensor;
  throw CLI::ValidationError("--kind", "must be 'frame' or 'sensor'");
}

struct SynthOptions {
  fs::path out_dir;
  std::uint64_t seed = 1;
  double duration_s = 60.0;
  double frame_period_ms = 33.33;
  double frame_jitter_ms = 13.4;
  double frame_drop_rate = 0.003;
  double sensor_fs = 1000.0;
  double flush_ms = 7.9;
  double flush_jitter_ms = 0.2;
  double sensor_drop_rate = 1e-5;
  double hr_bpm = 72.0;
  double noise = 0.3;
  double sensor_lead_ms = 500.0;
  std::int64_t epoch_us = 1'700'000'000'000'000;
};

int run_synth(const SynthOptions& o) {
  fs::create_directories(o.out_dir);
  const auto n_frames = static_cast<std::size_t>(o.duration_s / (o.frame_period_ms * 1e-3));
  const auto frames = gen_timestamps(
      n_frames, {o.frame_period_ms * 1e-3, HalfNormalDelay{o.frame_jitter_ms * 1e-3},
                 o.frame_drop_rate, o.seed});
  const double lead = o.sensor_lead_ms * 1e-3;
  const double sensor_duration = o.duration_s + 2.0 * lead;
  const auto n_sensor = static_cast<std::size_t>(std::llround(sensor_duration * o.sensor_fs));
  const auto sensor = gen_timestamps(
      n_sensor, {1.0 / o.sensor_fs, BatchedDelay{o.flush_ms * 1e-3, o.flush_jitter_ms * 1e-3},
                 o.sensor_drop_rate, o.seed + 1});
  const auto pulse = gen_pulse_signal(sensor_duration, o.sensor_fs, o.hr_bpm, o.noise, o.seed + 2);

  SampleStream fs_out;
  fs_out.kind = StreamKind::frame;
  fs_out.origin.epoch_us = o.epoch_us;
  fs_out.timestamps = frames.timestamps;
  for (auto s : frames.truth.slots) fs_out.indices.push_back(static_cast<std::int64_t>(s));
  write_stream(o.out_dir / "frames.csv", fs_out);

  SampleStream ss_out;
  ss_out.kind = StreamKind::sensor;
  ss_out.origin.epoch_us = o.epoch_us - static_cast<std::int64_t>(std::llround(lead * 1e6));
  ss_out.timestamps = sensor.timestamps;
  for (auto s : sensor.truth.slots) ss_out.values.push_back(pulse.at(s));
  write_stream(o.out_dir / "sensor.csv", ss_out);

  auto truth = [](const SynthStream& s, std::size_t n_ideal, double period, std::int64_t epoch) {
    return nlohmann::json{{"n_ideal", n_ideal},
                          {"period_s", period},
                          {"epoch_us", epoch},
                          {"emitted", s.timestamps.size()},
                          {"dropped_indices", s.truth.dropped_indices}};
  };
  nlohmann::json doc = {
      {"seed", o.seed},
      {"hr_bpm", o.hr_bpm},
      {"frames", truth(frames, n_frames, o.frame_period_ms * 1e-3, fs_out.origin.epoch_us)},
      {"sensor", truth(sensor, n_sensor, 1.0 / o.sensor_fs, ss_out.origin.epoch_us)},
  };
  write_text_atomic(o.out_dir / "truth.json", doc.dump(2) + "\n");
  std::cout << "wrote " << fs_out.size() << " frames, " << ss_out.size() << " sensor samples to "
            << o.out_dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pulsealign: de-jitter, filter and annotate camera/sensor recordings"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  Overrides ov;

  std::string input;
  std::string kind = "frame";
  std::string out;

  auto* stats = app.add_subcommand("stats", "timegap mean/std of a stream (ms)");
  stats->add_option("input", input, "stream CSV")->required();
  stats->add_option("--kind", kind, "frame | sensor");
  add_override_flags(stats, ov);

  bool report_drops = false;
  std::string stream_out;
  auto* dj = app.add_subcommand("dejitter", "map a stream onto its synthetic grid");
  dj->add_option("input", input, "stream CSV")->required();
  dj->add_option("--kind", kind, "frame | sensor");
  dj->add_option("--out", out, "report JSON")->required();
  dj->add_option("--output-stream", stream_out, "de-jittered stream CSV");
  dj->add_flag("--report-drops", report_drops, "print dropped grid timestamps");
  add_override_flags(dj, ov);

  std::string out_csv;
  auto* cmp = app.add_subcommand("compare", "raw / kalman / dejitter / theoretical gap table");
  cmp->add_option("input", input, "stream CSV")->required();
  cmp->add_option("--kind", kind, "frame | sensor");
  cmp->add_option("--out-csv", out_csv, "table CSV");
  cmp->add_option("--out", out, "comparison JSON");
  add_override_flags(cmp, ov);

  auto* filt = app.add_subcommand("filter", "smooth and bandpass a de-jittered sensor stream");
  filt->add_option("input", input, "de-jittered sensor CSV")->required();
  filt->add_option("--out", out, "processed signal CSV")->required();
  add_override_flags(filt, ov);

  std::string frames_path;
  std::string processed_path;
  std::string overlay_path;
  auto* ann = app.add_subcommand("annotate", "label each frame with the preceding sensor value");
  ann->add_option("--frames", frames_path, "de-jittered frame CSV")->required();
  ann->add_option("--processed", processed_path, "processed signal CSV")->required();
  ann->add_option("--out", out, "annotation CSV")->required();
  ann->add_option("--overlay", overlay_path, "overlay CSV");

  SynthOptions so;
  auto* syn = app.add_subcommand("synth", "generate a jittered frame/sensor pair with truth");
  syn->add_option("--out-dir", so.out_dir, "output directory")->required();
  syn->add_option("--seed", so.seed, "generator seed");
  syn->add_option("--duration-s", so.duration_s, "recording length (s)");
  syn->add_option("--frame-period-ms", so.frame_period_ms, "true frame period (ms)");
  syn->add_option("--frame-jitter-ms", so.frame_jitter_ms, "half-normal frame delay sigma (ms)");
  syn->add_option("--frame-drop-rate", so.frame_drop_rate, "frame drop probability");
  syn->add_option("--sensor-fs", so.sensor_fs, "sensor sampling rate (Hz)");
  syn->add_option("--flush-ms", so.flush_ms, "sensor transport flush period (ms)");
  syn->add_option("--flush-jitter-ms", so.flush_jitter_ms, "flush lateness sigma (ms)");
  syn->add_option("--sensor-drop-rate", so.sensor_drop_rate, "sensor drop probability");
  syn->add_option("--hr-bpm", so.hr_bpm, "pulse rate (beats/min)");
  syn->add_option("--noise", so.noise, "additive noise std");

  std::string out_dir;
  auto* pipe = app.add_subcommand("pipeline", "exclude, de-jitter, filter and annotate");
  pipe->add_option("--frames", frames_path, "frame CSV");
  std::string sensor_path;
  pipe->add_option("--sensor", sensor_path, "sensor CSV");
  pipe->add_option("--out-dir", out_dir, "output directory");
  add_override_flags(pipe, ov);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    nlohmann::json cfg_doc = nlohmann::json::object();
    fs::path base_dir = fs::current_path();
    if (!config_path.empty()) {
      cfg_doc = load_json_file(config_path);
      base_dir = fs::path(config_path).parent_path();
    }
    Settings settings = settings_from_json(cfg_doc);
    apply(ov, settings);

    if (*stats) {
      const auto k = parse_kind(kind);
      const auto s = load_stream(input, k);
      const auto& dcfg = k == StreamKind::frame ? settings.frame_dejitter : settings.sensor_dejitter;
      const auto g = timegap_stats(s.timestamps);
      const auto est = robust_timestep(s.timestamps, dcfg.m);
      std::printf("mean_ms,std_ms,n_gaps,timestep_ms,rate_hz,n_excluded\n");
      std::printf("%.3f,%.3f,%zu,%.6f,%.6f,%zu\n", g.mean * 1e3, g.std * 1e3, g.n,
                  est.period * 1e3, est.rate, est.n_excluded);
      return 0;
    }
    if (*dj) {
      const auto k = parse_kind(kind);
      const auto s = load_stream(input, k);
      const auto& dcfg = k == StreamKind::frame ? settings.frame_dejitter : settings.sensor_dejitter;
      const auto r = dejitter(s, dcfg);
      write_text_atomic(out, dejitter_json(r, s.origin).dump(2) + "\n");
      if (!stream_out.empty()) write_dejittered(stream_out, {s, r.corrected});
      std::printf("T_ms=%.6f rate_hz=%.6f before_std_ms=%.3f after_std_ms=%.3f drops=%zu\n",
                  r.period * 1e3, 1.0 / r.period, r.before.std * 1e3, r.after.std * 1e3,
                  r.drops.count());
      if (report_drops) {
        std::printf("k,t_us\n");
        for (auto kk : r.drops.dropped_k) {
          std::printf("%lld,%s\n", static_cast<long long>(kk),
                      format_us(s.origin, r.grid.point(kk)).c_str());
        }
      }
      return 0;
    }
    if (*cmp) {
      const auto k = parse_kind(kind);
      const auto s = load_stream(input, k);
      const bool frame = k == StreamKind::frame;
      const auto rep = compare_methods(s.timestamps,
                                       frame ? settings.frame_dejitter : settings.sensor_dejitter,
                                       frame ? settings.frame_kalman : settings.sensor_kalman);
      const auto table = comparison_csv(rep);
      if (!out_csv.empty()) write_text_atomic(out_csv, table);
      if (!out.empty()) write_text_atomic(out, comparison_json(rep).dump(2) + "\n");
      std::cout << table;
      return 0;
    }
    if (*filt) {
      const auto d = load_dejittered(input, StreamKind::sensor);
      BandpassConfig band = settings.bandpass;
      band.fs = grid_rate(d.dejittered);
      const auto p = process_signal(d.stream.values, d.dejittered, settings.savgol, band);
      write_processed(out, p, d.stream.origin);
      std::printf("fs_hz=%.6f samples=%zu\n", band.fs, p.size());
      return 0;
    }
    if (*ann) {
      const auto frames = load_dejittered(frames_path, StreamKind::frame);
      const auto processed = read_processed(processed_path, frames.stream.origin);
      const auto r = annotate_frames(frame_timeline(frames), processed);
      write_annotations(out, r.frames, frames.stream.origin);
      if (!overlay_path.empty()) {
        write_overlay(overlay_path, overlay_export(r.frames, processed), frames.stream.origin);
      }
      std::printf("annotated=%zu skipped_head=%zu\n", r.frames.size(), r.skipped_head);
      return 0;
    }
    if (*syn) return run_synth(so);
    if (*pipe) {
      PipelineConfig pc = pipeline_config_from_json(cfg_doc, base_dir);
      pc.settings = settings;
      if (!frames_path.empty()) pc.frames = frames_path;
      if (!sensor_path.empty()) pc.sensor = sensor_path;
      if (!out_dir.empty()) pc.output_dir = out_dir;
      if (pc.frames.empty() || pc.sensor.empty() || pc.output_dir.empty()) {
        std::cerr << "usage: pipeline needs frames, sensor and an output directory "
                     "(config or --frames/--sensor/--out-dir)\n";
        return 2;
      }
      const auto r = run_pipeline(pc);
      std::printf("frames=%zu annotated=%zu skipped_head=%zu\n", r.frames, r.annotations,
                  r.skipped_head);
      for (const auto& a : r.artifacts) std::printf("wrote %s\n", a.string().c_str());
      return 0;
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage: " << e.what() << "\n";
    return 2;
  } catch (const StageError& e) {
    std::cerr << "error [" << e.stage() << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
