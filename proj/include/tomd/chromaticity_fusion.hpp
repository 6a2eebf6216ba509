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

// rg chromaticity and the two-stream network inputs for each fusion mode.

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tomd/error.hpp"
#include "tomd/geometry.hpp"
#include "tomd/grid.hpp"

namespace tomd {

/// Per-pixel (r, g) = (R, G) / (R + G + B); black pixels map to (0, 0).
inline Grid<float> rg_chromaticity(const RgbImage& image) {
  require(image.channels() == 3, ErrorCode::kDimensionMismatch,
          "chromaticity needs an RGB image");
  Grid<float> rg(image.height(), image.width(), 2, 0.0f);
  for (std::size_t p = 0; p < image.pixels(); ++p) {
    const double r = image.data()[3 * p];
    const double g = image.data()[3 * p + 1];
    const double b = image.data()[3 * p + 2];
    const double sum = r + g + b;
    if (sum > 0.0) {
      rg.data()[2 * p] = static_cast<float>(r / sum);
      rg.data()[2 * p + 1] = static_cast<float>(g / sum);
    }
  }
  return rg;
}

enum class FusionMode { kNone, kEarly, kCross, kMixed };

enum class Modality { kRgb, kSparseDepth, kDenseDepth, kRgSparseDepth, kRgDenseDepth };

inline int channel_count(Modality m) {
  switch (m) {
    case Modality::kRgb: return 3;
    case Modality::kSparseDepth:
    case Modality::kDenseDepth: return 1;
    case Modality::kRgSparseDepth:
    case Modality::kRgDenseDepth: return 3;
  }
  return 0;
}

inline std::string_view to_string(FusionMode mode) {
  switch (mode) {
    case FusionMode::kNone: return "na";
    case FusionMode::kEarly: return "early";
    case FusionMode::kCross: return "cross";
    case FusionMode::kMixed: return "mixed";
  }
  return "?";
}

inline FusionMode parse_fusion_mode(std::string_view s) {
  if (s == "na" || s == "none" || s == "N/A") return FusionMode::kNone;
  if (s == "early") return FusionMode::kEarly;
  if (s == "cross") return FusionMode::kCross;
  if (s == "mixed") return FusionMode::kMixed;
  fail(ErrorCode::kInvalidArgument, "unknown fusion mode '" + std::string(s) + "'");
}

inline std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::kRgb: return "RGB";
    case Modality::kSparseDepth: return "D_s";
    case Modality::kDenseDepth: return "D_d";
    case Modality::kRgSparseDepth: return "rgD_s";
    case Modality::kRgDenseDepth: return "rgD_d";
  }
  return "?";
}

inline Modality parse_modality(std::string_view s) {
  for (Modality m : {Modality::kRgb, Modality::kSparseDepth,
                     Modality::kDenseDepth, Modality::kRgSparseDepth,
                     Modality::kRgDenseDepth}) {
    if (to_string(m) == s) return m;
  }
  fail(ErrorCode::kInvalidArgument, "unknown modality '" + std::string(s) + "'");
}

inline std::string_view to_string(DepthKind kind) {
  return kind == DepthKind::kSparse ? "sparse" : "dense";
}

inline DepthKind parse_depth_kind(std::string_view s) {
  if (s == "sparse") return DepthKind::kSparse;
  if (s == "dense") return DepthKind::kDense;
  fail(ErrorCode::kInvalidArgument, "unknown depth kind '" + std::string(s) + "'");
}

/// Fusion mode plus the depth flavour it consumes. For kNone, an absent
/// depth kind means RGB-only; a present one means depth-only.
struct FusionSpec {
  FusionMode mode = FusionMode::kMixed;
  std::optional<DepthKind> depth = DepthKind::kDense;

  Modality stream1() const { return modalities().first; }
  Modality stream2() const { return modalities().second; }

  std::pair<Modality, Modality> modalities() const {
    const bool dense = depth == DepthKind::kDense;
    const Modality d = dense ? Modality::kDenseDepth : Modality::kSparseDepth;
    const Modality rgd =
        dense ? Modality::kRgDenseDepth : Modality::kRgSparseDepth;
    switch (mode) {
      case FusionMode::kNone:
        return depth ? std::pair{d, d} : std::pair{Modality::kRgb, Modality::kRgb};
      case FusionMode::kEarly: return {rgd, rgd};
      case FusionMode::kCross: return {Modality::kRgb, d};
      case FusionMode::kMixed: return {Modality::kRgb, rgd};
    }
    return {Modality::kRgb, Modality::kRgb};
  }

  bool needs_depth() const {
    return mode != FusionMode::kNone || depth.has_value();
  }

  friend bool operator==(const FusionSpec&, const FusionSpec&) = default;
};

/// Two network input streams (HWC float planes) with their modality tags.
struct FusionInput {
  Grid<float> input1;
  Grid<float> input2;
  FusionMode mode = FusionMode::kNone;
  Modality tag1 = Modality::kRgb;
  Modality tag2 = Modality::kRgb;

  int height() const { return input1.height(); }
  int width() const { return input1.width(); }
};

/// d / max_depth clipped to [0, 1]; invalid pixels stay 0.
inline Grid<float> normalize_depth(const DepthMap& depth, double max_depth) {
  require(max_depth > 0.0, ErrorCode::kInvalidArgument,
          "max_depth must be positive");
  Grid<float> out(depth.height(), depth.width(), 1, 0.0f);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double d = depth.values.data()[i];
    out.data()[i] =
        d > 0.0 ? static_cast<float>(std::clamp(d / max_depth, 0.0, 1.0)) : 0.0f;
  }
  return out;
}

namespace detail {

inline Grid<float> rgb_planes(const RgbImage& rgb) {
  Grid<float> out(rgb.height(), rgb.width(), 3);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data()[i] = rgb.data()[i] / 255.0f;
  }
  return out;
}

inline Grid<float> stack_rg_depth(const Grid<float>& rg, const Grid<float>& d) {
  Grid<float> out(rg.height(), rg.width(), 3);
  for (std::size_t p = 0; p < rg.pixels(); ++p) {
    out.data()[3 * p] = rg.data()[2 * p];
    out.data()[3 * p + 1] = rg.data()[2 * p + 1];
    out.data()[3 * p + 2] = d.data()[p];
  }
  return out;
}

}  // namespace detail

/// Builds the (input1, input2) pair for `spec`. `depth` must be present
/// and of the spec's kind whenever the spec names a depth modality.
inline FusionInput assemble_fusion_input(const FusionSpec& spec,
                                         const RgbImage& rgb,
                                         const DepthMap* depth,
                                         double max_depth) {
  require(rgb.channels() == 3, ErrorCode::kDimensionMismatch,
          "RGB image needs 3 channels");
  if (spec.needs_depth()) {
    require(depth != nullptr, ErrorCode::kMissingModality,
            "fusion mode '" + std::string(to_string(spec.mode)) +
                "' needs a depth map");
    require(depth->kind == spec.depth, ErrorCode::kMissingModality,
            "expected " + std::string(to_string(*spec.depth)) +
                " depth, got " + std::string(to_string(depth->kind)));
    require(depth->height() == rgb.height() && depth->width() == rgb.width(),
            ErrorCode::kDimensionMismatch,
            "RGB " + shape_string(rgb) + " vs depth " +
                shape_string(depth->values));
  }

  const auto [m1, m2] = spec.modalities();
  auto build = [&](Modality m) -> Grid<float> {
    switch (m) {
      case Modality::kRgb: return detail::rgb_planes(rgb);
      case Modality::kSparseDepth:
      case Modality::kDenseDepth: return normalize_depth(*depth, max_depth);
      case Modality::kRgSparseDepth:
      case Modality::kRgDenseDepth:
        return detail::stack_rg_depth(rg_chromaticity(rgb),
                                      normalize_depth(*depth, max_depth));
    }
    return {};
  };

  FusionInput out;
  out.mode = spec.mode;
  out.tag1 = m1;
  out.tag2 = m2;
  out.input1 = build(m1);
  out.input2 = m1 == m2 ? out.input1 : build(m2);
  return out;
}

// --- sample.bin -------------------------------------------------------------
// One JSON header line, then float32 LE planes: input1 channel 0..C1-1, then
// input2 channel 0..C2-1, each plane row-major H x W.

inline void save_fusion_sample(const std::filesystem::path& path,
                               const FusionInput& s) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIoError,
          "cannot write " + path.string());
  const nlohmann::json header = {
      {"height", s.height()},
      {"width", s.width()},
      {"mode", to_string(s.mode)},
      {"input1", {{"tag", to_string(s.tag1)}, {"channels", s.input1.channels()}}},
      {"input2", {{"tag", to_string(s.tag2)}, {"channels", s.input2.channels()}}},
      {"dtype", "float32"},
      {"layout", "planar"}};
  out << header.dump() << '\n';
  for (const Grid<float>* g : {&s.input1, &s.input2}) {
    for (int c = 0; c < g->channels(); ++c) {
      for (int y = 0; y < g->height(); ++y) {
        for (int x = 0; x < g->width(); ++x) {
          const float v = (*g)(y, x, c);
          out.write(reinterpret_cast<const char*>(&v), sizeof(v));
        }
      }
    }
  }
  require(static_cast<bool>(out), ErrorCode::kIoError,
          "short write to " + path.string());
}

inline FusionInput load_fusion_sample(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIoError,
          "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  FusionInput s;
  int h = 0, w = 0, c1 = 0, c2 = 0;
  try {
    const auto header = nlohmann::json::parse(line);
    h = header.at("height").get<int>();
    w = header.at("width").get<int>();
    s.mode = parse_fusion_mode(header.at("mode").get<std::string>());
    s.tag1 = parse_modality(header.at("input1").at("tag").get<std::string>());
    s.tag2 = parse_modality(header.at("input2").at("tag").get<std::string>());
    c1 = header.at("input1").at("channels").get<int>();
    c2 = header.at("input2").at("channels").get<int>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
  require(c1 == channel_count(s.tag1) && c2 == channel_count(s.tag2),
          ErrorCode::kParseError, "channel count does not match modality");
  s.input1 = Grid<float>(h, w, c1);
  s.input2 = Grid<float>(h, w, c2);
  for (Grid<float>* g : {&s.input1, &s.input2}) {
    for (int c = 0; c < g->channels(); ++c) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          float v = 0.0f;
          in.read(reinterpret_cast<char*>(&v), sizeof(v));
          (*g)(y, x, c) = v;
        }
      }
    }
  }
  require(static_cast<bool>(in), ErrorCode::kParseError,
          path.string() + ": truncated plane data");
  return s;
}

}  // namespace tomd
