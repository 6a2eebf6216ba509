// Copyright 2026 The tomd Authors
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

// Frame manifests, timestamp synchronisation against the LiDAR master
// stream, key-frame selection and seeded train/val/test splitting.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tomd/error.hpp"
#include "tomd/random.hpp"

namespace tomd {

enum class Split { kNone, kTrain, kVal, kTest };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::kNone: return "none";
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

inline std::optional<Split> parse_split(std::string_view s) {
  for (Split v : {Split::kNone, Split::kTrain, Split::kVal, Split::kTest}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

struct GnssFix {
  double latitude = 0.0;
  double longitude = 0.0;
  double altitude = 0.0;
  friend bool operator==(const GnssFix&, const GnssFix&) = default;
};

/// One synchronised frame. GNSS / IMU / teleop entries are carried through
/// verbatim and never interpreted.
struct FrameRecord {
  std::string id;
  std::int64_t timestamp_ns = 0;
  std::string image_path;
  std::string cloud_path;
  std::optional<double> lux;
  std::optional<GnssFix> gnss;
  std::optional<std::string> imu;
  std::optional<std::string> teleop;
  Split split = Split::kNone;
  bool keyframe = false;
  // Paths below are optional attachments (annotation, calibration, cached
  // depth maps); relative paths resolve against the manifest directory.
  std::optional<std::string> mask_path;
  std::optional<std::string> calibration_path;
  std::optional<std::string> sparse_depth_path;
  std::optional<std::string> dense_depth_path;

  friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

// --- manifest (JSON lines) ------------------------------------------------

inline nlohmann::ordered_json to_json(const FrameRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["timestamp_ns"] = r.timestamp_ns;
  j["image"] = r.image_path;
  if (!r.cloud_path.empty()) j["cloud"] = r.cloud_path;
  j["lux"] = r.lux ? nlohmann::ordered_json(*r.lux) : nlohmann::ordered_json();
  if (r.gnss) j["gnss"] = {r.gnss->latitude, r.gnss->longitude, r.gnss->altitude};
  if (r.imu) j["imu"] = *r.imu;
  if (r.teleop) j["teleop"] = *r.teleop;
  j["split"] = to_string(r.split);
  j["keyframe"] = r.keyframe;
  if (r.mask_path) j["mask"] = *r.mask_path;
  if (r.calibration_path) j["calibration"] = *r.calibration_path;
  if (r.sparse_depth_path) j["sparse_depth"] = *r.sparse_depth_path;
  if (r.dense_depth_path) j["dense_depth"] = *r.dense_depth_path;
  return j;
}

inline FrameRecord frame_from_json(const nlohmann::json& j, std::size_t line) {
  auto need = [&](const char* field) -> const nlohmann::json& {
    if (!j.contains(field)) throw ParseError(line, field, "missing required field");
    return j[field];
  };
  auto typed = [&](const char* field, auto getter) {
    try {
      return getter();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line, field, e.what());
    }
  };
  auto opt_string = [&](const char* field) -> std::optional<std::string> {
    if (!j.contains(field) || j[field].is_null()) return std::nullopt;
    return typed(field, [&] { return j[field].get<std::string>(); });
  };

  FrameRecord r;
  r.id = typed("id", [&] { return need("id").get<std::string>(); });
  r.timestamp_ns = typed("timestamp_ns",
                         [&] { return need("timestamp_ns").get<std::int64_t>(); });
  r.image_path = typed("image", [&] { return need("image").get<std::string>(); });
  r.cloud_path = opt_string("cloud").value_or("");
  if (j.contains("lux") && !j["lux"].is_null()) {
    r.lux = typed("lux", [&] { return j["lux"].get<double>(); });
    if (*r.lux < 0.0) throw ParseError(line, "lux", "negative illuminance");
  }
  if (j.contains("gnss") && !j["gnss"].is_null()) {
    const auto& g = j["gnss"];
    if (!g.is_array() || g.size() != 3) {
      throw ParseError(line, "gnss", "expected [lat, lon, alt]");
    }
    r.gnss = typed("gnss", [&] {
      return GnssFix{g[0].get<double>(), g[1].get<double>(), g[2].get<double>()};
    });
  }
  r.imu = opt_string("imu");
  r.teleop = opt_string("teleop");
  if (j.contains("split")) {
    const auto s = typed("split", [&] { return j["split"].get<std::string>(); });
    const auto parsed = parse_split(s);
    if (!parsed) throw ParseError(line, "split", "unknown split '" + s + "'");
    r.split = *parsed;
  }
  if (j.contains("keyframe")) {
    r.keyframe = typed("keyframe", [&] { return j["keyframe"].get<bool>(); });
  }
  r.mask_path = opt_string("mask");
  r.calibration_path = opt_string("calibration");
  r.sparse_depth_path = opt_string("sparse_depth");
  r.dense_depth_path = opt_string("dense_depth");
  return r;
}

inline std::vector<FrameRecord> parse_manifest(std::istream& in) {
  std::vector<FrameRecord> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line, "<json>", e.what());
    }
    if (!j.is_object()) throw ParseError(line, "<json>", "expected an object");
    out.push_back(frame_from_json(j, line));
  }
  return out;
}

inline std::vector<FrameRecord> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIoError, "cannot open " + path.string());
  return parse_manifest(in);
}

inline void write_manifest(std::span<const FrameRecord> records,
                           const std::filesystem::path& path) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::kIoError,
            "cannot write " + tmp.string());
    for (const auto& r : records) out << to_json(r).dump() << '\n';
    require(static_cast<bool>(out), ErrorCode::kIoError,
            "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

/// Resolves a manifest-relative path.
inline std::filesystem::path resolve_path(const std::filesystem::path& manifest,
                                          const std::string& p) {
  const std::filesystem::path q(p);
  if (q.is_absolute()) return q;
  return manifest.parent_path() / q;
}

// --- synchronisation ------------------------------------------------------

struct Reading {
  std::int64_t timestamp_ns = 0;
  std::string payload;  // file path, or the CSV fields after the timestamp
};

struct SensorStream {
  std::string id;
  std::vector<Reading> readings;
  double rate_hz = 0.0;

  void validate() const {
    for (std::size_t i = 1; i < readings.size(); ++i) {
      require(readings[i].timestamp_ns > readings[i - 1].timestamp_ns,
              ErrorCode::kInvalidArgument,
              "stream '" + id + "' timestamps must be strictly increasing");
    }
  }
};

/// Stream ids understood by synchronize(). Image and lux are required.
namespace stream_id {
inline constexpr std::string_view kLidar = "lidar";
inline constexpr std::string_view kCamera = "camera";
inline constexpr std::string_view kLux = "lux";
inline constexpr std::string_view kGnss = "gnss";
inline constexpr std::string_view kImu = "imu";
inline constexpr std::string_view kTeleop = "teleop";
}  // namespace stream_id

/// Index of the reading nearest to `t` within `tolerance_ns`; on equal
/// distance the earlier reading wins.
inline std::optional<std::size_t> nearest_reading(const SensorStream& s,
                                                  std::int64_t t,
                                                  std::int64_t tolerance_ns) {
  const auto& r = s.readings;
  if (r.empty()) return std::nullopt;
  const auto it = std::lower_bound(
      r.begin(), r.end(), t,
      [](const Reading& a, std::int64_t v) { return a.timestamp_ns < v; });
  std::optional<std::size_t> best;
  std::int64_t best_dist = 0;
  auto consider = [&](std::size_t i) {
    const std::int64_t d = std::llabs(r[i].timestamp_ns - t);
    if (d > tolerance_ns) return;
    if (!best || d < best_dist) {
      best = i;
      best_dist = d;
    }
  };
  const auto idx = static_cast<std::size_t>(it - r.begin());
  if (idx > 0) consider(idx - 1);  // earlier first, so ties keep it
  if (idx < r.size()) consider(idx);
  return best;
}

struct SyncResult {
  std::vector<FrameRecord> records;
  std::size_t dropped = 0;
};

namespace detail {

inline std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string zero_pad(std::size_t v, int width) {
  std::string s = std::to_string(v);
  if (static_cast<int>(s.size()) < width) s.insert(0, width - s.size(), '0');
  return s;
}

}  // namespace detail

/// One record per master reading. Other streams contribute their nearest
/// reading within tolerance; frames lacking a camera image or lux value are
/// dropped and counted.
inline SyncResult synchronize(std::span<const SensorStream> streams,
                              std::string_view master_id,
                              std::int64_t tolerance_ns) {
  require(tolerance_ns >= 0, ErrorCode::kInvalidArgument, "negative tolerance");
  const SensorStream* master = nullptr;
  std::map<std::string, const SensorStream*, std::less<>> others;
  for (const auto& s : streams) {
    s.validate();
    if (s.id == master_id) {
      master = &s;
    } else {
      others.emplace(s.id, &s);
    }
  }
  require(master != nullptr && !master->readings.empty(), ErrorCode::kEmptyMaster,
          "master stream '" + std::string(master_id) + "' is empty");

  auto match = [&](std::string_view id, std::int64_t t) -> const Reading* {
    const auto it = others.find(id);
    if (it == others.end()) return nullptr;
    const auto idx = nearest_reading(*it->second, t, tolerance_ns);
    return idx ? &it->second->readings[*idx] : nullptr;
  };

  SyncResult out;
  for (const auto& m : master->readings) {
    const Reading* image = match(stream_id::kCamera, m.timestamp_ns);
    const Reading* lux = match(stream_id::kLux, m.timestamp_ns);
    std::optional<double> lux_value;
    if (lux != nullptr) {
      try {
        lux_value = std::stod(lux->payload);
      } catch (const std::exception&) {
        lux_value.reset();
      }
    }
    if (image == nullptr || !lux_value || *lux_value < 0.0) {
      ++out.dropped;
      continue;
    }
    FrameRecord r;
    r.id = detail::zero_pad(out.records.size(), 6);
    r.timestamp_ns = m.timestamp_ns;
    r.image_path = image->payload;
    r.cloud_path = m.payload;
    r.lux = lux_value;
    if (const Reading* g = match(stream_id::kGnss, m.timestamp_ns)) {
      const auto f = detail::split_csv(g->payload);
      if (f.size() >= 3) {
        try {
          r.gnss = GnssFix{std::stod(f[0]), std::stod(f[1]), std::stod(f[2])};
        } catch (const std::exception&) {
        }
      }
    }
    if (const Reading* i = match(stream_id::kImu, m.timestamp_ns)) r.imu = i->payload;
    if (const Reading* t = match(stream_id::kTeleop, m.timestamp_ns)) {
      r.teleop = t->payload;
    }
    out.records.push_back(std::move(r));
  }
  return out;
}

/// Flags indices 0, stride, 2*stride, ... and clears the rest.
inline void select_keyframes(std::span<FrameRecord> records, std::size_t stride) {
  require(stride >= 1, ErrorCode::kInvalidArgument, "stride must be >= 1");
  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].keyframe = i % stride == 0;
  }
}

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct SplitSizes {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
  friend bool operator==(const SplitSizes&, const SplitSizes&) = default;
};

/// n_train = floor(r_train N), n_val = floor(r_val N), test takes the rest.
inline SplitSizes split_sizes(std::size_t n, const SplitRatios& r) {
  require(r.train >= 0 && r.val >= 0 && r.test >= 0 &&
              std::abs(r.train + r.val + r.test - 1.0) < 1e-9,
          ErrorCode::kInvalidArgument, "split ratios must be >= 0 and sum to 1");
  // The epsilon absorbs representation error such as 0.1 * 10 = 0.99999...
  auto floor_of = [n](double ratio) {
    return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
  };
  SplitSizes s;
  s.train = floor_of(r.train);
  s.val = floor_of(r.val);
  s.test = n - s.train - s.val;
  return s;
}

/// Seeded uniform shuffle, then the first n_train records are train, the
/// next n_val val and the remainder test. Record order is preserved; only
/// the split tags change.
inline SplitSizes split_dataset(std::span<FrameRecord> records,
                                const SplitRatios& ratios, std::uint64_t seed) {
  require(!records.empty(), ErrorCode::kEmptyDataset, "nothing to split");
  const SplitSizes sizes = split_sizes(records.size(), ratios);
  std::mt19937_64 rng(seed);
  const auto order = random_permutation(records.size(), rng);
  for (std::size_t k = 0; k < order.size(); ++k) {
    Split s = Split::kTest;
    if (k < sizes.train) {
      s = Split::kTrain;
    } else if (k < sizes.train + sizes.val) {
      s = Split::kVal;
    }
    records[order[k]].split = s;
  }
  return sizes;
}

// --- sequence directories -------------------------------------------------
//
//   <seq>/images/<timestamp_ns>.png
//   <seq>/clouds/<timestamp_ns>.bin
//   <seq>/lux.csv               timestamp_ns,lux
//   <seq>/calibration.json
//   <seq>/gnss.csv, imu.csv, teleop.csv   optional, timestamp_ns,...

namespace detail {

inline SensorStream stream_from_directory(const std::filesystem::path& dir,
                                          std::string id,
                                          std::string_view extension) {
  SensorStream s;
  s.id = std::move(id);
  if (!std::filesystem::is_directory(dir)) return s;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().extension() != extension) continue;
    const std::string stem = e.path().stem().string();
    try {
      std::size_t used = 0;
      const long long ts = std::stoll(stem, &used);
      if (used != stem.size()) continue;
      s.readings.push_back({ts, e.path().string()});
    } catch (const std::exception&) {
    }
  }
  std::sort(s.readings.begin(), s.readings.end(),
            [](const Reading& a, const Reading& b) {
              return a.timestamp_ns < b.timestamp_ns;
            });
  return s;
}

inline SensorStream stream_from_csv(const std::filesystem::path& file,
                                    std::string id) {
  SensorStream s;
  s.id = std::move(id);
  std::ifstream in(file);
  if (!in) return s;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line == "\r") continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw ParseError(n, file.filename().string(), "expected timestamp_ns,...");
    }
    std::int64_t ts = 0;
    try {
      ts = std::stoll(line.substr(0, comma));
    } catch (const std::exception&) {
      if (n == 1) continue;  // header row
      throw ParseError(n, "timestamp_ns", "not an integer");
    }
    std::string payload = line.substr(comma + 1);
    if (!payload.empty() && payload.back() == '\r') payload.pop_back();
    s.readings.push_back({ts, payload});
  }
  return s;
}

}  // namespace detail

/// Loads every stream of a sequence directory. Paths in the payloads are
/// absolute or relative to the current directory as given by `seq`.
inline std::vector<SensorStream> load_sequence_streams(const std::filesystem::path& seq) {
  std::vector<SensorStream> streams;
  streams.push_back(detail::stream_from_directory(seq / "clouds",
                                                  std::string(stream_id::kLidar), ".bin"));
  streams.back().rate_hz = 10.0;
  streams.push_back(detail::stream_from_directory(seq / "images",
                                                  std::string(stream_id::kCamera), ".png"));
  streams.push_back(detail::stream_from_csv(seq / "lux.csv", std::string(stream_id::kLux)));
  for (std::string_view extra : {stream_id::kGnss, stream_id::kImu, stream_id::kTeleop}) {
    const auto file = seq / (std::string(extra) + ".csv");
    if (std::filesystem::exists(file)) {
      streams.push_back(detail::stream_from_csv(file, std::string(extra)));
    }
  }
  return streams;
}

}  // namespace tomd
