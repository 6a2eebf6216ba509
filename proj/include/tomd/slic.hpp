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

// SLIC superpixels: k-means in (L, a, b, x, y) restricted to a 2S x 2S
// window around each centre, S = sqrt(N / K), with
//   D = sqrt(d_lab^2 + (d_xy / S)^2 m^2).

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <vector>

#include <json.hpp>

#include "tomd/error.hpp"
#include "tomd/grid.hpp"

namespace tomd {

struct SlicParams {
  int segments = 600;
  double compactness = 10.0;
  int iterations = 10;
  bool enforce_connectivity = true;

  friend bool operator==(const SlicParams&, const SlicParams&) = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SlicParams, segments,
                                                compactness, iterations,
                                                enforce_connectivity)

struct SuperpixelMap {
  Grid<std::int32_t> labels;
  int count = 0;  // realised K'
  SlicParams params;
};

struct Lab {
  double l = 0.0, a = 0.0, b = 0.0;
};

/// sRGB (8-bit) to CIELAB under the D65 white point.
inline Lab srgb_to_lab(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
  auto linear = [](std::uint8_t v) {
    const double c = v / 255.0;
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
  };
  const double r = linear(r8), g = linear(g8), b = linear(b8);
  const double x = (0.4124564 * r + 0.3575761 * g + 0.1804375 * b) / 0.95047;
  const double y = (0.2126729 * r + 0.7151522 * g + 0.0721750 * b) / 1.00000;
  const double z = (0.0193339 * r + 0.1191920 * g + 0.9503041 * b) / 1.08883;
  auto f = [](double t) {
    constexpr double e = 216.0 / 24389.0;
    constexpr double k = 24389.0 / 27.0;
    return t > e ? std::cbrt(t) : (k * t + 16.0) / 116.0;
  };
  const double fx = f(x), fy = f(y), fz = f(z);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

namespace detail {

struct SlicCentre {
  double l, a, b, x, y;
};

inline std::vector<SlicCentre> slic_seeds(const std::vector<Lab>& lab, int h, int w,
                                          double step) {
  const int nx = std::max(1, static_cast<int>(std::lround(w / step)));
  const int ny = std::max(1, static_cast<int>(std::lround(h / step)));
  std::vector<SlicCentre> centres;
  centres.reserve(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j) {
    const double cy = (j + 0.5) * h / ny - 0.5;
    for (int i = 0; i < nx; ++i) {
      const double cx = (i + 0.5) * w / nx - 0.5;
      const int px = std::clamp(static_cast<int>(std::lround(cx)), 0, w - 1);
      const int py = std::clamp(static_cast<int>(std::lround(cy)), 0, h - 1);
      const Lab& c = lab[static_cast<std::size_t>(py) * w + px];
      centres.push_back({c.l, c.a, c.b, cx, cy});
    }
  }
  return centres;
}

/// Small 4-connected fragments join the largest adjacent fragment; labels
/// are then renumbered 0..K'-1 in raster order of first appearance.
inline int enforce_connectivity(Grid<std::int32_t>& labels, double mean_size) {
  const int h = labels.height(), w = labels.width();
  const std::size_t n = labels.size();
  std::vector<std::int32_t> comp(n, -1);
  std::vector<std::size_t> comp_size;
  std::vector<std::size_t> stack;
  for (std::size_t p = 0; p < n; ++p) {
    if (comp[p] >= 0) continue;
    const auto id = static_cast<std::int32_t>(comp_size.size());
    const std::int32_t old = labels.data()[p];
    std::size_t size = 0;
    comp[p] = id;
    stack.push_back(p);
    while (!stack.empty()) {
      const std::size_t q = stack.back();
      stack.pop_back();
      ++size;
      const int y = static_cast<int>(q / w), x = static_cast<int>(q % w);
      const std::array<std::pair<int, int>, 4> nb = {
          {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}}};
      for (const auto& [ny, nx] : nb) {
        if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
        const std::size_t r = static_cast<std::size_t>(ny) * w + nx;
        if (comp[r] < 0 && labels.data()[r] == old) {
          comp[r] = id;
          stack.push_back(r);
        }
      }
    }
    comp_size.push_back(size);
  }

  const std::size_t nc = comp_size.size();
  std::vector<std::set<std::int32_t>> adjacent(nc);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::int32_t a = comp[static_cast<std::size_t>(y) * w + x];
      if (x + 1 < w) {
        const std::int32_t b = comp[static_cast<std::size_t>(y) * w + x + 1];
        if (a != b) adjacent[a].insert(b), adjacent[b].insert(a);
      }
      if (y + 1 < h) {
        const std::int32_t b = comp[static_cast<std::size_t>(y + 1) * w + x];
        if (a != b) adjacent[a].insert(b), adjacent[b].insert(a);
      }
    }
  }

  // Union-find over fragments; a merged group carries its total size.
  std::vector<std::int32_t> parent(nc);
  for (std::size_t i = 0; i < nc; ++i) parent[i] = static_cast<std::int32_t>(i);
  auto root = [&](std::int32_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  std::vector<std::size_t> group_size = comp_size;
  const double min_size = mean_size / 4.0;
  for (std::size_t i = 0; i < nc; ++i) {
    const std::int32_t ri = root(static_cast<std::int32_t>(i));
    if (static_cast<double>(group_size[ri]) >= min_size) continue;
    std::int32_t best = -1;
    for (std::int32_t j : adjacent[i]) {
      const std::int32_t rj = root(j);
      if (rj == ri) continue;
      if (best < 0 || group_size[rj] > group_size[best] ||
          (group_size[rj] == group_size[best] && rj < best)) {
        best = rj;
      }
    }
    if (best < 0) continue;
    parent[ri] = best;
    group_size[best] += group_size[ri];
  }

  std::map<std::int32_t, std::int32_t> renumber;
  for (std::size_t p = 0; p < n; ++p) {
    const std::int32_t r = root(comp[p]);
    const auto [it, inserted] =
        renumber.emplace(r, static_cast<std::int32_t>(renumber.size()));
    labels.data()[p] = it->second;
  }
  return static_cast<int>(renumber.size());
}

}  // namespace detail

inline SuperpixelMap slic_superpixels(const RgbImage& image, const SlicParams& p) {
  require(image.channels() == 3, ErrorCode::kDimensionMismatch,
          "SLIC needs an RGB image");
  const int h = image.height(), w = image.width();
  const std::size_t n = image.pixels();
  require(n > 0, ErrorCode::kInvalidArgument, "empty image");
  require(p.segments >= 1 && p.iterations >= 1 && p.compactness > 0.0,
          ErrorCode::kInvalidArgument,
          "SLIC needs segments >= 1, iterations >= 1, compactness > 0");
  require(static_cast<std::size_t>(p.segments) <= n, ErrorCode::kTooManySegments,
          std::to_string(p.segments) + " segments requested for " +
              std::to_string(n) + " pixels");

  std::vector<Lab> lab(n);
  for (std::size_t i = 0; i < n; ++i) {
    lab[i] = srgb_to_lab(image.data()[3 * i], image.data()[3 * i + 1],
                         image.data()[3 * i + 2]);
  }
  const double step = std::sqrt(static_cast<double>(n) / p.segments);
  auto centres = detail::slic_seeds(lab, h, w, step);
  const int radius = static_cast<int>(std::ceil(step));
  const double spatial = (p.compactness / step) * (p.compactness / step);

  SuperpixelMap out;
  out.params = p;
  out.labels = Grid<std::int32_t>(h, w, 1, -1);
  std::vector<double> dist(n);

  auto distance = [&](const detail::SlicCentre& c, std::size_t idx, int x, int y) {
    const Lab& v = lab[idx];
    const double dc = (v.l - c.l) * (v.l - c.l) + (v.a - c.a) * (v.a - c.a) +
                      (v.b - c.b) * (v.b - c.b);
    const double ds = (x - c.x) * (x - c.x) + (y - c.y) * (y - c.y);
    return dc + ds * spatial;
  };

  for (int it = 0; it < p.iterations; ++it) {
    std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
    std::fill(out.labels.values().begin(), out.labels.values().end(), -1);
    for (std::size_t k = 0; k < centres.size(); ++k) {
      const auto& c = centres[k];
      const int cx = static_cast<int>(std::lround(c.x));
      const int cy = static_cast<int>(std::lround(c.y));
      for (int y = std::max(0, cy - radius); y <= std::min(h - 1, cy + radius); ++y) {
        for (int x = std::max(0, cx - radius); x <= std::min(w - 1, cx + radius); ++x) {
          const std::size_t idx = static_cast<std::size_t>(y) * w + x;
          const double d = distance(c, idx, x, y);
          if (d < dist[idx]) {
            dist[idx] = d;
            out.labels.data()[idx] = static_cast<std::int32_t>(k);
          }
        }
      }
    }
    // Pixels no window reached fall back to the globally nearest centre.
    for (std::size_t idx = 0; idx < n; ++idx) {
      if (out.labels.data()[idx] >= 0) continue;
      const int x = static_cast<int>(idx % w), y = static_cast<int>(idx / w);
      for (std::size_t k = 0; k < centres.size(); ++k) {
        const double d = distance(centres[k], idx, x, y);
        if (d < dist[idx]) {
          dist[idx] = d;
          out.labels.data()[idx] = static_cast<std::int32_t>(k);
        }
      }
    }
    std::vector<std::array<double, 6>> acc(centres.size(), {0, 0, 0, 0, 0, 0});
    for (std::size_t idx = 0; idx < n; ++idx) {
      auto& s = acc[out.labels.data()[idx]];
      s[0] += lab[idx].l;
      s[1] += lab[idx].a;
      s[2] += lab[idx].b;
      s[3] += static_cast<double>(idx % w);
      s[4] += static_cast<double>(idx / w);
      s[5] += 1.0;
    }
    for (std::size_t k = 0; k < centres.size(); ++k) {
      const auto& s = acc[k];
      if (s[5] == 0.0) continue;
      centres[k] = {s[0] / s[5], s[1] / s[5], s[2] / s[5], s[3] / s[5], s[4] / s[5]};
    }
  }

  if (p.enforce_connectivity) {
    out.count = detail::enforce_connectivity(
        out.labels, static_cast<double>(n) / static_cast<double>(centres.size()));
  } else {
    // Compact the id range; empty clusters leave gaps otherwise.
    std::map<std::int32_t, std::int32_t> renumber;
    for (auto& v : out.labels.values()) {
      const auto [it, inserted] =
          renumber.emplace(v, static_cast<std::int32_t>(renumber.size()));
      v = it->second;
    }
    out.count = static_cast<int>(renumber.size());
  }
  return out;
}

/// 255 where the pixel's superpixel id is selected, 0 elsewhere.
inline Mask labels_to_mask(const SuperpixelMap& sp, std::span<const int> selected) {
  std::vector<bool> chosen(static_cast<std::size_t>(sp.count), false);
  for (int id : selected) {
    require(id >= 0 && id < sp.count, ErrorCode::kUnknownSegmentId,
            "superpixel id " + std::to_string(id) + " not in [0, " +
                std::to_string(sp.count) + ")");
    chosen[id] = true;
  }
  Mask m(sp.labels.height(), sp.labels.width(), 1, 0);
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (chosen[sp.labels.data()[i]]) m.data()[i] = 255;
  }
  return m;
}

/// Row-major runs as a flat [id, length, id, length, ...] list.
inline std::vector<std::int32_t> run_length_encode(const Grid<std::int32_t>& labels) {
  std::vector<std::int32_t> runs;
  const auto v = labels.values();
  for (std::size_t i = 0; i < v.size();) {
    std::size_t j = i;
    while (j < v.size() && v[j] == v[i]) ++j;
    runs.push_back(v[i]);
    runs.push_back(static_cast<std::int32_t>(j - i));
    i = j;
  }
  return runs;
}

inline Grid<std::int32_t> run_length_decode(std::span<const std::int32_t> runs,
                                            int height, int width) {
  Grid<std::int32_t> labels(height, width, 1, 0);
  std::size_t pos = 0;
  require(runs.size() % 2 == 0, ErrorCode::kParseError, "odd run list");
  for (std::size_t i = 0; i < runs.size(); i += 2) {
    require(runs[i + 1] > 0 && pos + runs[i + 1] <= labels.size(),
            ErrorCode::kParseError, "run overflows the grid");
    std::fill_n(labels.data() + pos, runs[i + 1], runs[i]);
    pos += runs[i + 1];
  }
  require(pos == labels.size(), ErrorCode::kParseError, "runs do not cover the grid");
  return labels;
}

using Polyline = std::vector<std::array<int, 2>>;  // (x, y) pixel corners

/// Closed outlines of every superpixel along pixel edges, in corner
/// coordinates (0..W, 0..H). Collinear vertices are dropped; each polyline
/// repeats its first vertex at the end.
inline std::vector<std::vector<Polyline>> boundary_polylines(const SuperpixelMap& sp) {
  const auto& L = sp.labels;
  const int h = L.height(), w = L.width();
  std::vector<std::vector<Polyline>> out(static_cast<std::size_t>(sp.count));
  // Directed edges keep the region on the left: start corner -> end corner.
  using Corner = std::array<int, 2>;
  std::vector<std::multimap<Corner, Corner>> edges(out.size());
  auto label = [&](int y, int x) {
    return (y < 0 || y >= h || x < 0 || x >= w) ? -1 : L(y, x);
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::int32_t id = L(y, x);
      auto& e = edges[id];
      if (label(y - 1, x) != id) e.emplace(Corner{x + 1, y}, Corner{x, y});
      if (label(y + 1, x) != id) e.emplace(Corner{x, y + 1}, Corner{x + 1, y + 1});
      if (label(y, x - 1) != id) e.emplace(Corner{x, y}, Corner{x, y + 1});
      if (label(y, x + 1) != id) e.emplace(Corner{x + 1, y + 1}, Corner{x + 1, y});
    }
  }
  for (std::size_t id = 0; id < out.size(); ++id) {
    auto& e = edges[id];
    while (!e.empty()) {
      auto it = e.begin();
      const Corner start = it->first;
      Polyline loop{start};
      Corner cur = it->second;
      e.erase(it);
      while (cur != start) {
        loop.push_back(cur);
        auto next = e.find(cur);
        if (next == e.end()) break;
        cur = next->second;
        e.erase(next);
      }
      loop.push_back(start);
      Polyline simple{loop.front()};
      for (std::size_t i = 1; i + 1 < loop.size(); ++i) {
        const Corner& a = simple.back();
        const Corner& b = loop[i];
        const Corner& c = loop[i + 1];
        const bool collinear =
            (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]) == 0;
        if (!collinear) simple.push_back(b);
      }
      simple.push_back(loop.back());
      out[id].push_back(std::move(simple));
    }
  }
  return out;
}

}  // namespace tomd
