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

#include "tomd/slic.hpp"

#include <numeric>
#include <random>
#include <set>

#include "gtest/gtest.h"
#include "test_support.hpp"

namespace tomd {
namespace {

RgbImage uniform_image(int h, int w, std::uint8_t r = 90, std::uint8_t g = 140, std::uint8_t b = 60) {
  RgbImage img(h, w, 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img(y, x, 0) = r;
      img(y, x, 1) = g;
      img(y, x, 2) = b;
    }
  }
  return img;
}

RgbImage noisy_image(std::mt19937_64& rng, int h, int w) {
  RgbImage img(h, w, 3);
  // Smooth colour regions plus noise, so clusters have something to follow.
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool left = x < w / 2 + (y % 7) - 3;
      for (int c = 0; c < 3; ++c) {
        const double base = left ? 60.0 + 40.0 * c : 200.0 - 50.0 * c;
        img(y, x, c) = static_cast<std::uint8_t>(std::clamp(base + testing::uniform(rng, -25, 25), 0.0, 255.0));
      }
    }
  }
  return img;
}

std::vector<std::size_t> segment_sizes(const SuperpixelMap& sp) {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(sp.count), 0);
  for (auto id : sp.labels.values()) ++sizes[static_cast<std::size_t>(id)];
  return sizes;
}

bool segments_connected(const SuperpixelMap& sp) {
  const auto& L = sp.labels;
  const int h = L.height(), w = L.width();
  std::vector<char> seen(L.size(), 0);
  std::vector<int> components(static_cast<std::size_t>(sp.count), 0);
  for (int sy = 0; sy < h; ++sy) {
    for (int sx = 0; sx < w; ++sx) {
      if (seen[static_cast<std::size_t>(sy) * w + sx]) continue;
      const auto id = L(sy, sx);
      ++components[static_cast<std::size_t>(id)];
      std::vector<std::pair<int, int>> stack = {{sy, sx}};
      seen[static_cast<std::size_t>(sy) * w + sx] = 1;
      while (!stack.empty()) {
        const auto [y, x] = stack.back();
        stack.pop_back();
        for (auto [dy, dx] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
          const int ny = y + dy, nx = x + dx;
          if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
          const auto q = static_cast<std::size_t>(ny) * w + nx;
          if (seen[q] || L(ny, nx) != id) continue;
          seen[q] = 1;
          stack.push_back({ny, nx});
        }
      }
    }
  }
  return std::all_of(components.begin(), components.end(), [](int c) { return c == 1; });
}

TEST(LabTest, ReferenceColours) {
  const Lab white = srgb_to_lab(255, 255, 255);
  EXPECT_NEAR(white.l, 100.0, 1e-3);
  EXPECT_NEAR(white.a, 0.0, 1e-3);
  EXPECT_NEAR(white.b, 0.0, 1e-3);
  const Lab black = srgb_to_lab(0, 0, 0);
  EXPECT_NEAR(black.l, 0.0, 1e-9);
  const Lab red = srgb_to_lab(255, 0, 0);
  EXPECT_NEAR(red.l, 53.24, 0.05);
  EXPECT_NEAR(red.a, 80.09, 0.05);
  EXPECT_NEAR(red.b, 67.20, 0.05);
}

TEST(SlicTest, UniformImageFourQuadrants) {
  SlicParams p;
  p.segments = 4;
  p.compactness = 10.0;
  const auto sp = slic_superpixels(uniform_image(100, 100), p);
  EXPECT_EQ(sp.count, 4);
  for (auto s : segment_sizes(sp)) {
    EXPECT_GE(s, 2250u);
    EXPECT_LE(s, 2750u);
  }
  EXPECT_NE(sp.labels(10, 10), sp.labels(10, 90));
  EXPECT_NE(sp.labels(10, 10), sp.labels(90, 10));
  EXPECT_NE(sp.labels(90, 90), sp.labels(10, 90));
}

TEST(SlicTest, EveryPixelLabelledInRange) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 10; ++t) {
    const int h = testing::uniform_int(rng, 5, 60);
    const int w = testing::uniform_int(rng, 5, 60);
    SlicParams p;
    p.segments = testing::uniform_int(rng, 1, std::min(h * w, 80));
    p.compactness = testing::uniform(rng, 1.0, 40.0);
    p.enforce_connectivity = t % 2 == 0;
    const auto sp = slic_superpixels(noisy_image(rng, h, w), p);
    ASSERT_EQ(sp.labels.height(), h);
    ASSERT_EQ(sp.labels.width(), w);
    ASSERT_GE(sp.count, 1);
    for (auto id : sp.labels.values()) {
      ASSERT_GE(id, 0);
      ASSERT_LT(id, sp.count);
    }
    for (auto s : segment_sizes(sp)) EXPECT_GT(s, 0u);
  }
}

TEST(SlicTest, OneSegmentPerPixelWithoutEnforcement) {
  std::mt19937_64 rng(2);
  SlicParams p;
  p.segments = 6 * 9;
  p.enforce_connectivity = false;
  const auto sp = slic_superpixels(noisy_image(rng, 6, 9), p);
  EXPECT_EQ(sp.count, 54);
  std::set<std::int32_t> ids(sp.labels.values().begin(), sp.labels.values().end());
  EXPECT_EQ(ids.size(), 54u);
}

TEST(SlicTest, Deterministic) {
  std::mt19937_64 rng(3);
  const auto img = noisy_image(rng, 40, 50);
  SlicParams p;
  p.segments = 30;
  const auto a = slic_superpixels(img, p);
  const auto b = slic_superpixels(img, p);
  EXPECT_EQ(a.count, b.count);
  EXPECT_TRUE(std::equal(a.labels.values().begin(), a.labels.values().end(), b.labels.values().begin()));
}

TEST(SlicTest, EnforcedSegmentsAreConnected) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 8; ++t) {
    SlicParams p;
    p.segments = testing::uniform_int(rng, 4, 60);
    p.compactness = testing::uniform(rng, 1.0, 20.0);
    const auto sp = slic_superpixels(noisy_image(rng, 48, 64), p);
    EXPECT_TRUE(segments_connected(sp));
  }
}

TEST(SlicTest, FollowsColourEdge) {
  RgbImage img = uniform_image(40, 40, 200, 30, 30);
  for (int y = 0; y < 40; ++y) {
    for (int x = 20; x < 40; ++x) {
      img(y, x, 0) = 30;
      img(y, x, 2) = 220;
    }
  }
  SlicParams p;
  p.segments = 16;
  const auto sp = slic_superpixels(img, p);
  for (int y = 0; y < 40; ++y) {
    for (int x = 0; x < 20; ++x) EXPECT_NE(sp.labels(y, x), sp.labels(y, 39 - x));
  }
}

TEST(SlicTest, InvalidArguments) {
  SlicParams p;
  p.segments = 26;
  try {
    slic_superpixels(uniform_image(5, 5), p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTooManySegments);
  }
  p.segments = 0;
  EXPECT_THROW(slic_superpixels(uniform_image(5, 5), p), Error);
  p.segments = 2;
  p.iterations = 0;
  EXPECT_THROW(slic_superpixels(uniform_image(5, 5), p), Error);
}

// --- masks ----------------------------------------------------------------------

SuperpixelMap two_halves() {
  SuperpixelMap sp;
  sp.labels = Grid<std::int32_t>(4, 6, 1, 0);
  for (int y = 0; y < 4; ++y) {
    for (int x = 3; x < 6; ++x) sp.labels(y, x) = 1;
  }
  sp.count = 2;
  return sp;
}

TEST(LabelsToMaskTest, Examples) {
  const auto sp = two_halves();
  const std::vector<int> zero = {0};
  const Mask m = labels_to_mask(sp, zero);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 6; ++x) EXPECT_EQ(m(y, x), x < 3 ? 255 : 0);
  }
  const Mask none = labels_to_mask(sp, {});
  for (auto v : none.values()) EXPECT_EQ(v, 0);
  const std::vector<int> all = {1, 0};
  const Mask full = labels_to_mask(sp, all);
  for (auto v : full.values()) EXPECT_EQ(v, 255);
}

TEST(LabelsToMaskTest, UnknownId) {
  const auto sp = two_halves();
  for (int bad : {2, -1}) {
    const std::vector<int> sel = {0, bad};
    try {
      labels_to_mask(sp, sel);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kUnknownSegmentId);
    }
  }
}

TEST(LabelsToMaskTest, UnionOfPartitionIsUnionMask) {
  std::mt19937_64 rng(5);
  SlicParams p;
  p.segments = 40;
  const auto sp = slic_superpixels(noisy_image(rng, 30, 40), p);
  for (int t = 0; t < 20; ++t) {
    std::vector<int> a, b;
    for (int id = 0; id < sp.count; ++id) {
      const double u = testing::uniform(rng, 0, 1);
      if (u < 0.3) a.push_back(id);
      else if (u < 0.6) b.push_back(id);
    }
    std::vector<int> both = a;
    both.insert(both.end(), b.begin(), b.end());
    const Mask ma = labels_to_mask(sp, a);
    const Mask mb = labels_to_mask(sp, b);
    const Mask mu = labels_to_mask(sp, both);
    for (std::size_t i = 0; i < mu.size(); ++i) {
      ASSERT_EQ(mu.data()[i], ma.data()[i] | mb.data()[i]);
    }
  }
}

// --- encodings ------------------------------------------------------------------

TEST(RunLengthTest, Example) {
  const auto sp = two_halves();
  const auto runs = run_length_encode(sp.labels);
  EXPECT_EQ(runs, (std::vector<std::int32_t>{0, 3, 1, 3, 0, 3, 1, 3, 0, 3, 1, 3, 0, 3, 1, 3}));
}

TEST(RunLengthTest, RoundTrip) {
  std::mt19937_64 rng(6);
  SlicParams p;
  p.segments = 25;
  const auto sp = slic_superpixels(noisy_image(rng, 33, 47), p);
  const auto runs = run_length_encode(sp.labels);
  const auto back = run_length_decode(runs, 33, 47);
  EXPECT_TRUE(std::equal(back.values().begin(), back.values().end(), sp.labels.values().begin()));
  const std::vector<std::int32_t> short_runs = {0, 5};
  EXPECT_THROW(run_length_decode(short_runs, 2, 3), Error);
  const std::vector<std::int32_t> odd = {0};
  EXPECT_THROW(run_length_decode(odd, 1, 1), Error);
}

long long signed_area_twice(const Polyline& loop) {
  long long a = 0;
  for (std::size_t i = 0; i + 1 < loop.size(); ++i) {
    a += static_cast<long long>(loop[i][0]) * loop[i + 1][1] - static_cast<long long>(loop[i + 1][0]) * loop[i][1];
  }
  return a;
}

TEST(PolylineTest, TwoHalves) {
  const auto lines = boundary_polylines(two_halves());
  ASSERT_EQ(lines.size(), 2u);
  ASSERT_EQ(lines[0].size(), 1u);
  const auto& loop = lines[0][0];
  EXPECT_EQ(loop.size(), 5u);  // rectangle, closed
  EXPECT_EQ(loop.front(), loop.back());
  std::set<std::array<int, 2>> corners(loop.begin(), loop.end());
  EXPECT_EQ(corners, (std::set<std::array<int, 2>>{{0, 0}, {3, 0}, {3, 4}, {0, 4}}));
}

TEST(PolylineTest, ClosedAxisAlignedAndEncloseSegment) {
  std::mt19937_64 rng(7);
  SlicParams p;
  p.segments = 20;
  const auto sp = slic_superpixels(noisy_image(rng, 24, 36), p);
  const auto lines = boundary_polylines(sp);
  const auto sizes = segment_sizes(sp);
  ASSERT_EQ(lines.size(), sizes.size());
  for (std::size_t id = 0; id < lines.size(); ++id) {
    ASSERT_FALSE(lines[id].empty());
    long long area = 0;
    for (const auto& loop : lines[id]) {
      ASSERT_GE(loop.size(), 5u);
      EXPECT_EQ(loop.front(), loop.back());
      for (std::size_t i = 0; i + 1 < loop.size(); ++i) {
        EXPECT_TRUE(loop[i][0] == loop[i + 1][0] || loop[i][1] == loop[i + 1][1]);
        EXPECT_GE(loop[i][0], 0);
        EXPECT_LE(loop[i][0], 36);
        EXPECT_LE(loop[i][1], 24);
      }
      area += signed_area_twice(loop);
    }
    EXPECT_EQ(std::llabs(area), 2 * static_cast<long long>(sizes[id])) << "segment " << id;
  }
}

}  // namespace
}  // namespace tomd
