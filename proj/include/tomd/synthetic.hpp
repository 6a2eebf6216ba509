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

// Procedural scenes with a traversable band. The band is a slanted strip
// of near, smooth ground with a green cast; the background is farther,
// rougher and neutrally coloured. Depth is sampled sparsely and then
// densified with complete_depth, as for real LiDAR frames.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tomd/chromaticity_fusion.hpp"
#include "tomd/dataset.hpp"
#include "tomd/depth_completion.hpp"
#include "tomd/frame_data.hpp"
#include "tomd/geometry.hpp"
#include "tomd/grid.hpp"
#include "tomd/image_io.hpp"
#include "tomd/random.hpp"

namespace tomd {

struct SyntheticConfig {
  int frames = 200;
  int height = 32;
  int width = 32;
  std::uint64_t seed = 7;
  double band_min_width = 8.0;
  double band_max_width = 14.0;
  double max_slope = 0.3;       // horizontal shift per row
  double sparse_fraction = 0.25;
  double max_depth = 20.0;
  double colour_noise = 12.0;   // additive, 8-bit units
  double depth_noise = 0.05;    // metres on the band
  double light_scale = 1.0;     // multiplies the RGB signal before noise
  double lux_min = 200.0;
  double lux_max = 50000.0;

  /// Same scenes, RGB signal attenuated 10x and lux in the low bin.
  SyntheticConfig low_light() const {
    SyntheticConfig c = *this;
    c.light_scale = 0.1;
    c.lux_min = 1.0;
    c.lux_max = 90.0;
    return c;
  }
};

using SyntheticFrame = LabeledFrame;

namespace detail {

inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace detail

inline SyntheticFrame make_synthetic_frame(const SyntheticConfig& cfg,
                                           std::mt19937_64& rng) {
  const int h = cfg.height;
  const int w = cfg.width;
  SyntheticFrame f;
  f.rgb = RgbImage(h, w, 3);
  f.mask = Mask(h, w, 1, 0);
  f.sparse.kind = DepthKind::kSparse;
  f.sparse.values = Grid<double>(h, w, 1, 0.0);

  const double centre = uniform_range(rng, 0.3 * w, 0.7 * w);
  const double slope = uniform_range(rng, -cfg.max_slope, cfg.max_slope);
  const double half = 0.5 * uniform_range(rng, cfg.band_min_width, cfg.band_max_width);
  const double ground_near = uniform_range(rng, 1.5, 2.5);
  const double ground_far = ground_near + uniform_range(rng, 2.0, 4.0);
  const double wall = uniform_range(rng, 8.0, 12.0);
  const double tint = uniform_range(rng, -15.0, 15.0);

  Grid<double> truth(h, w, 1, 0.0);
  for (int y = 0; y < h; ++y) {
    const double t = static_cast<double>(y) / std::max(1, h - 1);
    const double mid = centre + slope * (y - 0.5 * (h - 1));
    for (int x = 0; x < w; ++x) {
      const bool band = std::abs(x + 0.5 - mid) < half;
      double r, g, b, d;
      if (band) {
        d = ground_far + (ground_near - ground_far) * t +
            cfg.depth_noise * standard_normal(rng);
        r = 80.0 + tint;
        g = 150.0 + tint;
        b = 70.0 + tint;
      } else {
        d = wall + uniform_range(rng, -2.5, 2.5);
        const double grey = 120.0 + tint + 20.0 * standard_normal(rng);
        r = grey + 10.0;
        g = grey;
        b = grey - 5.0;
      }
      truth(y, x) = std::clamp(d, 0.5, cfg.max_depth);
      const double s = cfg.light_scale;
      f.rgb(y, x, 0) = detail::to_byte(s * r + cfg.colour_noise * standard_normal(rng));
      f.rgb(y, x, 1) = detail::to_byte(s * g + cfg.colour_noise * standard_normal(rng));
      f.rgb(y, x, 2) = detail::to_byte(s * b + cfg.colour_noise * standard_normal(rng));
      f.mask(y, x) = band ? 255 : 0;
      if (uniform_unit(rng) < cfg.sparse_fraction) f.sparse.values(y, x) = truth(y, x);
    }
  }
  if (f.sparse.valid_count() == 0) f.sparse.values(h / 2, w / 2) = truth(h / 2, w / 2);

  CompletionParams params;
  params.max_depth = cfg.max_depth;
  f.dense = complete_depth(f.sparse, params);
  f.lux = uniform_range(rng, cfg.lux_min, cfg.lux_max);
  return f;
}

/// Deterministic in `cfg` (including `cfg.seed`). Scene geometry draws do
/// not depend on light_scale, so standard and low-light corpora with the
/// same seed show the same layouts.
inline std::vector<SyntheticFrame> make_synthetic_corpus(const SyntheticConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  std::vector<SyntheticFrame> frames;
  frames.reserve(cfg.frames);
  for (int i = 0; i < cfg.frames; ++i) {
    frames.push_back(make_synthetic_frame(cfg, rng));
    frames.back().id = detail::zero_pad(static_cast<std::size_t>(i), 6);
  }
  return frames;
}

/// Writes images/, sparse/, dense/, masks/ and manifest.jsonl under `dir`.
/// Frames are tagged train/val/test with the 8:1:1 rule.
inline std::vector<FrameRecord> write_synthetic_dataset(
    const std::filesystem::path& dir, std::span<const SyntheticFrame> frames,
    std::uint64_t split_seed) {
  namespace fs = std::filesystem;
  for (const char* sub : {"images", "sparse", "dense", "masks"}) {
    fs::create_directories(dir / sub);
  }
  std::vector<FrameRecord> records;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const std::string id = frames[i].id.empty() ? detail::zero_pad(i, 6) : frames[i].id;
    FrameRecord r;
    r.id = id;
    r.timestamp_ns = static_cast<std::int64_t>(i) * 100'000'000;
    r.image_path = "images/" + id + ".png";
    r.lux = frames[i].lux;
    r.mask_path = "masks/" + id + ".png";
    r.sparse_depth_path = "sparse/" + id + ".png";
    r.dense_depth_path = "dense/" + id + ".png";
    png::write_rgb(dir / r.image_path, frames[i].rgb);
    png::write_gray8(dir / *r.mask_path, frames[i].mask);
    save_depth_png(dir / *r.sparse_depth_path, frames[i].sparse);
    save_depth_png(dir / *r.dense_depth_path, frames[i].dense);
    records.push_back(std::move(r));
  }
  split_dataset(records, {}, split_seed);
  write_manifest(records, dir / "manifest.jsonl");
  return records;
}

}  // namespace tomd
