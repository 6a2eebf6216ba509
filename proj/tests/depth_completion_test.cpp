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

#include "tomd/depth_completion.hpp"

#include <algorithm>
#include <random>

#include "gtest/gtest.h"
#include "test_support.hpp"

namespace tomd {
namespace {

DepthMap random_sparse(std::mt19937_64& rng, double max_depth) {
  const int h = testing::uniform_int(rng, 4, 40);
  const int w = testing::uniform_int(rng, 4, 40);
  const double density = testing::uniform(rng, 0.01, 0.6);
  DepthMap d(h, w);
  for (double& v : d.values.values()) {
    if (testing::uniform(rng, 0, 1) < density) v = testing::uniform(rng, 0.5, max_depth);
  }
  if (d.valid_count() == 0) d(h / 2, w / 2) = testing::uniform(rng, 0.5, max_depth);
  return d;
}

std::pair<double, double> valid_range(const DepthMap& d) {
  double lo = 1e300, hi = -1e300;
  for (double v : d.values.values()) {
    if (v > 0.0) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  return {lo, hi};
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::kIoError;
}

TEST(RemoveDepthNoiseTest, ConstantUnchanged) {
  DepthMap d(6, 6);
  for (double& v : d.values.values()) v = 4.0;
  const auto out = remove_depth_noise(d, {});
  EXPECT_TRUE(std::equal(d.values.values().begin(), d.values.values().end(),
                         out.values.values().begin()));
}

TEST(RemoveDepthNoiseTest, OutlierInvalidated) {
  DepthMap d(5, 5);
  for (double& v : d.values.values()) v = 10.0;
  d(2, 2) = 30.0;
  CompletionParams p;
  p.noise_rel_threshold = 0.3;
  const auto out = remove_depth_noise(d, p);
  EXPECT_EQ(out(2, 2), 0.0);
  EXPECT_EQ(out.valid_count(), 24u);
  EXPECT_EQ(out(0, 0), 10.0);
}

TEST(RemoveDepthNoiseTest, IsolatedPixelRetained) {
  DepthMap d(9, 9);
  d(4, 4) = 50.0;
  EXPECT_EQ(remove_depth_noise(d, {})(4, 4), 50.0);
}

TEST(RemoveDepthNoiseTest, SurvivorsUnchanged) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 50; ++t) {
    const DepthMap d = random_sparse(rng, 90.0);
    const DepthMap out = remove_depth_noise(d, {});
    for (std::size_t i = 0; i < d.values.size(); ++i) {
      const double o = out.values.data()[i];
      EXPECT_TRUE(o == 0.0 || o == d.values.data()[i]);
    }
  }
}

TEST(CompleteDepthTest, ConstantFixedPoint) {
  DepthMap d(12, 9);
  for (double& v : d.values.values()) v = 5.0;
  const auto out = complete_depth(d, {});
  EXPECT_EQ(out.kind, DepthKind::kDense);
  for (double v : out.values.values()) EXPECT_NEAR(v, 5.0, 1e-9);
}

TEST(CompleteDepthTest, SinglePixelFloods) {
  DepthMap d(17, 23);
  d(3, 20) = 10.0;
  const auto out = complete_depth(d, {});
  for (double v : out.values.values()) EXPECT_NEAR(v, 10.0, 1e-9);
}

TEST(CompleteDepthTest, AllZeroIsEmptyDepth) {
  EXPECT_EQ(code_of([] { complete_depth(DepthMap(5, 5), {}); }), ErrorCode::kEmptyDepth);
}

TEST(CompleteDepthTest, AboveMaxDepthRejected) {
  DepthMap d(5, 5);
  d(1, 1) = 120.0;
  EXPECT_EQ(code_of([&] { complete_depth(d, {}); }), ErrorCode::kDepthOutOfRange);
}

TEST(CompleteDepthTest, EvenKernelRejected) {
  DepthMap d(5, 5);
  d(1, 1) = 1.0;
  CompletionParams p;
  p.small_kernel = 4;
  EXPECT_EQ(code_of([&] { complete_depth(d, p); }), ErrorCode::kInvalidArgument);
}

TEST(CompleteDepthTest, RandomMapsTotalEnvelopeMonotone) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 100; ++t) {
    const DepthMap d = random_sparse(rng, 90.0);
    const DepthMap cleaned = remove_depth_noise(d, {});
    if (cleaned.valid_count() == 0) {
      EXPECT_EQ(code_of([&] { complete_depth(d, {}); }), ErrorCode::kEmptyDepth);
      continue;
    }
    CompletionTrace trace;
    const DepthMap out = complete_depth(d, {}, &trace);
    const auto [lo, hi] = valid_range(d);
    for (double v : out.values.values()) {
      ASSERT_GT(v, 0.0);
      ASSERT_GE(v, lo - 1e-6);
      ASSERT_LE(v, hi + 1e-6);
    }
    ASSERT_FALSE(trace.valid_after_stage.empty());
    EXPECT_EQ(trace.valid_after_stage.front(), cleaned.valid_count());
    EXPECT_TRUE(std::is_sorted(trace.valid_after_stage.begin(), trace.valid_after_stage.end()));
    EXPECT_EQ(trace.valid_after_stage.back(), out.values.size());
  }
}

TEST(CompleteDepthTest, Deterministic) {
  std::mt19937_64 rng(23);
  const DepthMap d = random_sparse(rng, 50.0);
  const auto a = complete_depth(d, {});
  const auto b = complete_depth(d, {});
  EXPECT_TRUE(std::equal(a.values.values().begin(), a.values.values().end(),
                         b.values.values().begin()));
}

TEST(CompleteDepthTest, ParamsJsonUsesFieldNames) {
  testing::TempDir dir("params");
  {
    std::ofstream out(dir / "p.json");
    out << R"({"max_depth": 20, "median_kernel": 3})";
  }
  const auto p = load_completion_params(dir / "p.json");
  EXPECT_EQ(p.max_depth, 20.0);
  EXPECT_EQ(p.median_kernel, 3);
  EXPECT_EQ(p.small_kernel, 5);
}

}  // namespace
}  // namespace tomd
