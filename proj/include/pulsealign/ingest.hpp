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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "pulsealign/error.hpp"

namespace pulsealign {

enum class StreamKind { frame, sensor };

inline std::string_view to_string(StreamKind kind) {
  return kind == StreamKind::frame ? "frame" : "sensor";
}

/// Absolute position of a stream's first raw sample. Internal times are
/// double seconds relative to this origin; files store integer microseconds.
struct StreamOrigin {
  std::int64_t epoch_us = 0;

  std::int64_t absolute_us(double t) const {
    return epoch_us + static_cast<std::int64_t>(std::llround(t * 1e6));
  }
  double relative(std::int64_t absolute) const {
    return static_cast<double>(absolute - epoch_us) * 1e-6;
  }
};

/// Timestamps (and, for sensors, values) of one acquisition stream.
/// `indices` carries the frame index column for frame streams and the row
/// ordinal for sensor streams, so it survives exclusion.
struct SampleStream {
  StreamKind kind = StreamKind::frame;
  StreamOrigin origin;
  std::vector<double> timestamps;
  std::vector<double> values;
  std::vector<std::int64_t> indices;

  std::size_t size() const { return timestamps.size(); }
};

/// Half-open interval [start, end) in stream-relative seconds.
struct Interval {
  double start = 0.0;
  double end = 0.0;
};

class ExclusionList {
 public:
  ExclusionList() = default;

  /// Validates, sorts and merges overlapping or touching intervals.
  static ExclusionList from_intervals(std::vector<Interval> raw) {
    for (const auto& iv : raw) {
      detail::require(std::isfinite(iv.start) && std::isfinite(iv.end) && iv.start < iv.end,
                      "exclusion interval must satisfy start < end");
    }
    std::sort(raw.begin(), raw.end(),
              [](const Interval& a, const Interval& b) { return a.start < b.start; });
    ExclusionList out;
    for (const auto& iv : raw) {
      if (!out.intervals_.empty() && iv.start <= out.intervals_.back().end) {
        out.intervals_.back().end = std::max(out.intervals_.back().end, iv.end);
      } else {
        out.intervals_.push_back(iv);
      }
    }
    return out;
  }

  const std::vector<Interval>& intervals() const { return intervals_; }
  bool empty() const { return intervals_.empty(); }

  bool contains(double t) const {
    auto it = std::upper_bound(intervals_.begin(), intervals_.end(), t,
                               [](double v, const Interval& iv) { return v < iv.start; });
    if (it == intervals_.begin()) return false;
    --it;
    return t >= it->start && t < it->end;
  }

 private:
  std::vector<Interval> intervals_;
};

/// Everything the join needs to know about one frame plus its label.
/// Times share one origin (the frame stream's).
struct AnnotatedFrame {
  std::int64_t frame_index = 0;
  double frame_raw_ts = 0.0;
  double frame_ts = 0.0;  // de-jittered
  double label = 0.0;
  std::size_t sensor_index = 0;
  double sensor_ts = 0.0;  // de-jittered
};

namespace detail {

inline std::int64_t parse_int(std::string_view field, std::size_t line, std::string_view what) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    fail("malformed " + std::string(what) + " at line " + std::to_string(line));
  }
  return v;
}

inline double parse_double(std::string_view field, std::size_t line, std::string_view what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty() ||
      !std::isfinite(v)) {
    fail("malformed " + std::string(what) + " at line " + std::to_string(line));
  }
  return v;
}

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

/// Line-oriented CSV reader: checks the header, yields (line number, fields).
class CsvReader {
 public:
  CsvReader(const std::filesystem::path& path, std::string_view header) : in_(path) {
    if (!in_) fail("cannot open " + path.string());
    std::string first;
    if (!std::getline(in_, first)) fail("empty file " + path.string());
    strip(first);
    if (first != header) {
      fail("unexpected header in " + path.string() + ": expected '" + std::string(header) + "'");
    }
    line_ = 1;
    columns_ = split(header).size();
  }

  bool next(std::vector<std::string_view>& fields) {
    while (std::getline(in_, buf_)) {
      ++line_;
      strip(buf_);
      if (buf_.empty()) continue;
      fields = split(buf_);
      if (fields.size() != columns_) {
        fail("malformed row at line " + std::to_string(line_) + ": expected " +
             std::to_string(columns_) + " fields");
      }
      return true;
    }
    return false;
  }

  std::size_t line() const { return line_; }

 private:
  static void strip(std::string& s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  }

  std::ifstream in_;
  std::string buf_;
  std::size_t line_ = 0;
  std::size_t columns_ = 0;
};

}  // namespace detail

/// Writes to `<path>.tmp` and renames over `path` on commit(); an
/// uncommitted file is removed on destruction.
class AtomicFile {
 public:
  explicit AtomicFile(std::filesystem::path path)
      : path_(std::move(path)), tmp_(path_.string() + ".tmp"), out_(tmp_) {
    if (!out_) detail::fail("cannot write " + path_.string());
  }
  AtomicFile(const AtomicFile&) = delete;
  AtomicFile& operator=(const AtomicFile&) = delete;
  ~AtomicFile() {
    if (!committed_) {
      out_.close();
      std::error_code ec;
      std::filesystem::remove(tmp_, ec);
    }
  }

  std::ostream& stream() { return out_; }

  void commit() {
    out_.flush();
    if (!out_) detail::fail("cannot write " + path_.string());
    out_.close();
    std::error_code ec;
    std::filesystem::rename(tmp_, path_, ec);
    if (ec) detail::fail("cannot write " + path_.string() + ": " + ec.message());
    committed_ = true;
  }

 private:
  std::filesystem::path path_;
  std::filesystem::path tmp_;
  std::ofstream out_;
  bool committed_ = false;
};

inline void write_text_atomic(const std::filesystem::path& path, std::string_view text) {
  AtomicFile file(path);
  file.stream() << text;
  file.commit();
}

/// Absolute microseconds with up to six fractional digits (picosecond
/// resolution), computed in integer arithmetic so large epochs lose nothing.
inline std::string format_us(const StreamOrigin& origin, double t) {
  const __int128 ps = static_cast<__int128>(origin.epoch_us) * 1'000'000 +
                      static_cast<__int128>(std::llround(t * 1e12));
  const bool negative = ps < 0;
  const __int128 mag = negative ? -ps : ps;
  const auto whole = static_cast<unsigned long long>(mag / 1'000'000);
  auto frac = static_cast<unsigned>(mag % 1'000'000);
  std::string out = negative ? "-" : "";
  out += std::to_string(whole);
  if (frac != 0) {
    char digits[8];
    std::snprintf(digits, sizeof(digits), "%06u", frac);
    std::string f(digits);
    while (!f.empty() && f.back() == '0') f.pop_back();
    out += "." + f;
  }
  return out;
}

/// Inverse of format_us: relative seconds against `origin`.
inline double parse_us(std::string_view text, const StreamOrigin& origin, std::size_t line) {
  const std::string_view original = text;
  auto bad = [&]() -> double {
    detail::fail("malformed timestamp '" + std::string(original) + "' at line " +
                 std::to_string(line));
  };
  bool negative = false;
  if (!text.empty() && text.front() == '-') {
    negative = true;
    text.remove_prefix(1);
  }
  const auto dot = text.find('.');
  const std::string_view whole_part = text.substr(0, dot);
  std::string_view frac_part = dot == std::string_view::npos ? "" : text.substr(dot + 1);
  if (whole_part.empty() || frac_part.size() > 6) return bad();
  std::uint64_t whole = 0;
  auto [p1, e1] = std::from_chars(whole_part.data(), whole_part.data() + whole_part.size(), whole);
  if (e1 != std::errc() || p1 != whole_part.data() + whole_part.size()) return bad();
  std::uint32_t frac = 0;
  if (!frac_part.empty()) {
    auto [p2, e2] = std::from_chars(frac_part.data(), frac_part.data() + frac_part.size(), frac);
    if (e2 != std::errc() || p2 != frac_part.data() + frac_part.size()) return bad();
    for (std::size_t i = frac_part.size(); i < 6; ++i) frac *= 10;
  }
  __int128 ps = static_cast<__int128>(whole) * 1'000'000 + frac;
  if (negative) ps = -ps;
  ps -= static_cast<__int128>(origin.epoch_us) * 1'000'000;
  return static_cast<double>(static_cast<long long>(ps)) * 1e-12;
}

inline std::string_view stream_header(StreamKind kind) {
  return kind == StreamKind::frame ? "index,ts_us" : "ts_us,value";
}

/// Reads a frame (`index,ts_us`) or sensor (`ts_us,value`) CSV and
/// normalizes timestamps so the first sample sits at 0.0 s.
inline SampleStream load_stream(const std::filesystem::path& path, StreamKind kind) {
  detail::CsvReader csv(path, stream_header(kind));
  std::vector<std::int64_t> ts_us;
  SampleStream s;
  s.kind = kind;
  std::vector<std::string_view> f;
  std::int64_t ordinal = 0;
  while (csv.next(f)) {
    std::int64_t ts = 0;
    if (kind == StreamKind::frame) {
      const auto index = detail::parse_int(f[0], csv.line(), "index");
      detail::require(index >= 0, "negative frame index at line " + std::to_string(csv.line()));
      ts = detail::parse_int(f[1], csv.line(), "ts_us");
      s.indices.push_back(index);
    } else {
      ts = detail::parse_int(f[0], csv.line(), "ts_us");
      s.values.push_back(detail::parse_double(f[1], csv.line(), "value"));
      s.indices.push_back(ordinal++);
    }
    if (!ts_us.empty() && ts < ts_us.back()) {
      detail::fail("decreasing timestamp at line " + std::to_string(csv.line()));
    }
    ts_us.push_back(ts);
  }
  detail::require(ts_us.size() >= 2, path.string() + ": fewer than 2 samples");
  s.origin.epoch_us = ts_us.front();
  s.timestamps.reserve(ts_us.size());
  for (auto v : ts_us) s.timestamps.push_back(s.origin.relative(v));
  return s;
}

/// Writes the schema load_stream reads; timestamps are rounded to integer
/// microseconds.
inline void write_stream(const std::filesystem::path& path, const SampleStream& s) {
  AtomicFile file(path);
  auto& out = file.stream();
  out << stream_header(s.kind) << '\n';
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto ts = s.origin.absolute_us(s.timestamps[i]);
    if (s.kind == StreamKind::frame) {
      const auto index = i < s.indices.size() ? s.indices[i] : static_cast<std::int64_t>(i);
      out << index << ',' << ts << '\n';
    } else {
      out << ts << ',' << detail::format_double(s.values.at(i)) << '\n';
    }
  }
  file.commit();
}

/// `start_us,end_us` rows, stream-relative integer microseconds.
inline ExclusionList load_exclusions(const std::filesystem::path& path) {
  detail::CsvReader csv(path, "start_us,end_us");
  std::vector<Interval> raw;
  std::vector<std::string_view> f;
  while (csv.next(f)) {
    const auto a = detail::parse_int(f[0], csv.line(), "start_us");
    const auto b = detail::parse_int(f[1], csv.line(), "end_us");
    detail::require(a < b, "exclusion start_us >= end_us at line " + std::to_string(csv.line()));
    raw.push_back({static_cast<double>(a) * 1e-6, static_cast<double>(b) * 1e-6});
  }
  return ExclusionList::from_intervals(std::move(raw));
}

struct ExclusionResult {
  SampleStream stream;
  std::size_t removed = 0;
};

inline ExclusionResult apply_exclusions(const SampleStream& in, const ExclusionList& excl) {
  ExclusionResult r;
  r.stream.kind = in.kind;
  r.stream.origin = in.origin;
  const bool has_values = !in.values.empty();
  const bool has_indices = !in.indices.empty();
  const auto& iv = excl.intervals();
  std::size_t j = 0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double t = in.timestamps[i];
    while (j < iv.size() && iv[j].end <= t) ++j;
    if (j < iv.size() && t >= iv[j].start) continue;
    r.stream.timestamps.push_back(t);
    if (has_values) r.stream.values.push_back(in.values[i]);
    if (has_indices) r.stream.indices.push_back(in.indices[i]);
  }
  r.removed = in.size() - r.stream.size();
  detail::require(r.stream.size() >= 2, "fewer than 2 samples remain after exclusions");
  return r;
}

inline constexpr std::string_view kAnnotationHeader =
    "frame_index,frame_ts_us,dejittered_ts_us,label,sensor_ts_us";

inline void write_annotations(const std::filesystem::path& path,
                              std::span<const AnnotatedFrame> rows, const StreamOrigin& origin) {
  detail::require(!rows.empty(), "no annotations to write");
  AtomicFile file(path);
  auto& out = file.stream();
  out << kAnnotationHeader << '\n';
  for (const auto& a : rows) {
    out << a.frame_index << ',' << format_us(origin, a.frame_raw_ts) << ','
        << format_us(origin, a.frame_ts) << ',' << detail::format_double(a.label) << ','
        << format_us(origin, a.sensor_ts) << '\n';
  }
  file.commit();
}

/// Reads an annotation CSV back; sensor_index is not stored and comes back 0.
inline std::vector<AnnotatedFrame> read_annotations(const std::filesystem::path& path,
                                                    const StreamOrigin& origin) {
  detail::CsvReader csv(path, kAnnotationHeader);
  std::vector<AnnotatedFrame> rows;
  std::vector<std::string_view> f;
  while (csv.next(f)) {
    AnnotatedFrame a;
    a.frame_index = detail::parse_int(f[0], csv.line(), "frame_index");
    a.frame_raw_ts = parse_us(f[1], origin, csv.line());
    a.frame_ts = parse_us(f[2], origin, csv.line());
    a.label = detail::parse_double(f[3], csv.line(), "label");
    a.sensor_ts = parse_us(f[4], origin, csv.line());
    rows.push_back(a);
  }
  return rows;
}

/// Re-expresses stream-relative times against another origin.
inline std::vector<double> rebase(std::span<const double> t, const StreamOrigin& from,
                                  const StreamOrigin& to) {
  const double shift = static_cast<double>(from.epoch_us - to.epoch_us) * 1e-6;
  std::vector<double> out(t.begin(), t.end());
  for (auto& v : out) v += shift;
  return out;
}

}  // namespace pulsealign
