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

// Sparse -> dense depth completion by morphological operations on inverted
// depth. Dilating inverted depth (C - d) prefers the nearest surface, which
// is what occlusion boundaries need.

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "tomd/error.hpp"
#include "tomd/geometry.hpp"
#include "tomd/grid.hpp"

namespace tomd {

struct CompletionParams {
  double max_depth = 100.0;
  int small_kernel = 5;     // diamond
  int large_kernel = 7;     // full
  int hole_fill_kernel = 9;
  int median_kernel = 5;
  int blur_kernel = 5;      // Gaussian, sigma = kernel / 6
  int noise_median_kernel = 5;
  double noise_rel_threshold = 0.3;

  void validate() const {
    for (int k : {small_kernel, large_kernel, hole_fill_kernel, median_kernel,
                  blur_kernel, noise_median_kernel}) {
      require(k >= 1 && k % 2 == 1, ErrorCode::kInvalidArgument,
              "kernel sizes must be odd and >= 1");
    }
    require(max_depth > 0.0, ErrorCode::kInvalidArgument,
            "max_depth must be positive");
    require(noise_rel_threshold > 0.0 && noise_rel_threshold < 1.0,
            ErrorCode::kInvalidArgument,
            "noise_rel_threshold must lie in (0, 1)");
  }

  /// Added to max_depth to form the inversion constant; keeps inverted
  /// valid depths strictly positive.
  double inversion_constant() const { return max_depth + 1.0; }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(CompletionParams, max_depth,
                                                small_kernel, large_kernel,
                                                hole_fill_kernel, median_kernel,
                                                blur_kernel,
                                                noise_median_kernel,
                                                noise_rel_threshold)

inline CompletionParams load_completion_params(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIoError,
          "cannot open " + path.string());
  CompletionParams p;
  try {
    p = nlohmann::json::parse(in).get<CompletionParams>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
  p.validate();
  return p;
}

namespace morph {

enum class Shape { kFull, kDiamond };

inline bool in_kernel(Shape shape, int dy, int dx, int radius) {
  return shape == Shape::kFull || std::abs(dy) + std::abs(dx) <= radius;
}

/// Grey dilation (max) over the in-bounds part of the structuring element.
inline Grid<double> dilate(const Grid<double>& in, int size, Shape shape) {
  const int r = size / 2;
  Grid<double> out(in.height(), in.width(), 1);
  for (int y = 0; y < in.height(); ++y) {
    for (int x = 0; x < in.width(); ++x) {
      double best = in(y, x);
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          if (!in.in_bounds(y + dy, x + dx) || !in_kernel(shape, dy, dx, r)) {
            continue;
          }
          best = std::max(best, in(y + dy, x + dx));
        }
      }
      out(y, x) = best;
    }
  }
  return out;
}

inline Grid<double> erode(const Grid<double>& in, int size, Shape shape) {
  const int r = size / 2;
  Grid<double> out(in.height(), in.width(), 1);
  for (int y = 0; y < in.height(); ++y) {
    for (int x = 0; x < in.width(); ++x) {
      double best = in(y, x);
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          if (!in.in_bounds(y + dy, x + dx) || !in_kernel(shape, dy, dx, r)) {
            continue;
          }
          best = std::min(best, in(y + dy, x + dx));
        }
      }
      out(y, x) = best;
    }
  }
  return out;
}

/// Closing is extensive (result >= input) because the element is symmetric.
inline Grid<double> close(const Grid<double>& in, int size, Shape shape) {
  return erode(dilate(in, size, shape), size, shape);
}

/// Writes dilated values into empty (zero) pixels only.
inline void fill_empty(Grid<double>& map, int size) {
  const Grid<double> dilated = dilate(map, size, Shape::kFull);
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (map.data()[i] <= 0.0) map.data()[i] = dilated.data()[i];
  }
}

inline Grid<double> median(const Grid<double>& in, int size) {
  const int r = size / 2;
  Grid<double> out(in.height(), in.width(), 1);
  std::vector<double> window;
  window.reserve(static_cast<std::size_t>(size) * size);
  for (int y = 0; y < in.height(); ++y) {
    for (int x = 0; x < in.width(); ++x) {
      window.clear();
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          // Replicated border.
          const int yy = std::clamp(y + dy, 0, in.height() - 1);
          const int xx = std::clamp(x + dx, 0, in.width() - 1);
          window.push_back(in(yy, xx));
        }
      }
      auto mid = window.begin() + window.size() / 2;
      std::nth_element(window.begin(), mid, window.end());
      out(y, x) = *mid;
    }
  }
  return out;
}

inline std::vector<double> gaussian_taps(int size) {
  const int r = size / 2;
  const double sigma = size / 6.0;
  std::vector<double> taps(size);
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    taps[i + r] = sigma > 0.0 ? std::exp(-0.5 * i * i / (sigma * sigma)) : 1.0;
    sum += taps[i + r];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

/// Separable Gaussian with replicated border. Output stays inside the input
/// range since every output is a convex combination of inputs.
inline Grid<double> gaussian_blur(const Grid<double>& in, int size) {
  if (size <= 1) return in;
  const auto taps = gaussian_taps(size);
  const int r = size / 2;
  const int h = in.height();
  const int w = in.width();
  Grid<double> tmp(h, w, 1);
  Grid<double> out(h, w, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) {
        acc += taps[i + r] * in(y, std::clamp(x + i, 0, w - 1));
      }
      tmp(y, x) = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) {
        acc += taps[i + r] * tmp(std::clamp(y + i, 0, h - 1), x);
      }
      out(y, x) = acc;
    }
  }
  return out;
}

}  // namespace morph

/// Drops valid pixels that deviate from the median of their valid
/// neighbours by more than `noise_rel_threshold` (relative). The centre
/// pixel is excluded from its own window; pixels with no valid neighbour
/// are kept.
inline DepthMap remove_depth_noise(const DepthMap& sparse,
                                   const CompletionParams& p) {
  p.validate();
  DepthMap out = sparse;
  const int r = p.noise_median_kernel / 2;
  std::vector<double> window;
  for (int y = 0; y < sparse.height(); ++y) {
    for (int x = 0; x < sparse.width(); ++x) {
      const double d = sparse(y, x);
      if (d <= 0.0) continue;
      window.clear();
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          if ((dy == 0 && dx == 0) || !sparse.values.in_bounds(y + dy, x + dx)) {
            continue;
          }
          const double n = sparse(y + dy, x + dx);
          if (n > 0.0) window.push_back(n);
        }
      }
      if (window.empty()) continue;
      std::sort(window.begin(), window.end());
      const std::size_t m = window.size();
      const double med = m % 2 == 1
                             ? window[m / 2]
                             : 0.5 * (window[m / 2 - 1] + window[m / 2]);
      if (std::abs(d - med) / med > p.noise_rel_threshold) out(y, x) = 0.0;
    }
  }
  return out;
}

/// Valid-pixel counts after each completion stage; non-decreasing.
struct CompletionTrace {
  std::vector<std::size_t> valid_after_stage;
};

inline std::size_t count_positive(const Grid<double>& g) {
  return static_cast<std::size_t>(
      std::count_if(g.values().begin(), g.values().end(),
                    [](double v) { return v > 0.0; }));
}

inline DepthMap complete_depth(const DepthMap& sparse,
                               const CompletionParams& p,
                               CompletionTrace* trace = nullptr) {
  p.validate();
  for (double d : sparse.values.values()) {
    require(std::isfinite(d) && d >= 0.0, ErrorCode::kInvalidArgument,
            "depth values must be finite and non-negative");
    require(d <= p.max_depth, ErrorCode::kDepthOutOfRange,
            "depth " + std::to_string(d) + " exceeds max_depth " +
                std::to_string(p.max_depth));
  }
  const DepthMap cleaned = remove_depth_noise(sparse, p);
  require(cleaned.valid_count() > 0, ErrorCode::kEmptyDepth,
          "no valid depth after noise removal");

  const double c = p.inversion_constant();
  Grid<double> inv = cleaned.values;
  for (double& v : inv.values()) {
    if (v > 0.0) v = c - v;
  }
  auto record = [&](const Grid<double>& g) {
    if (trace != nullptr) trace->valid_after_stage.push_back(count_positive(g));
  };
  record(inv);

  inv = morph::dilate(inv, p.small_kernel, morph::Shape::kDiamond);
  record(inv);
  inv = morph::close(inv, p.large_kernel, morph::Shape::kFull);
  record(inv);
  morph::fill_empty(inv, p.hole_fill_kernel);
  record(inv);

  // Extend the top-most valid value of each column up to the image border.
  for (int x = 0; x < inv.width(); ++x) {
    int top = -1;
    for (int y = 0; y < inv.height(); ++y) {
      if (inv(y, x) > 0.0) {
        top = y;
        break;
      }
    }
    for (int y = 0; y < top; ++y) inv(y, x) = inv(top, x);
  }
  // Columns without any value are filled by repeated hole-fill dilation.
  while (count_positive(inv) < inv.size()) {
    morph::fill_empty(inv, p.hole_fill_kernel);
  }
  record(inv);

  inv = morph::median(inv, p.median_kernel);
  inv = morph::gaussian_blur(inv, p.blur_kernel);
  record(inv);

  DepthMap dense(sparse.height(), sparse.width(), DepthKind::kDense);
  for (std::size_t i = 0; i < inv.size(); ++i) {
    dense.values.data()[i] = c - inv.data()[i];
  }
  return dense;
}

}  // namespace tomd
