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

#include "tomd/metrics.hpp"

#include <random>
#include <sstream>

#include "gtest/gtest.h"
#include "test_support.hpp"
#include "tomd/evaluation.hpp"
#include "tomd/nn/network.hpp"

namespace tomd {
namespace {

Mask mask_from(std::initializer_list<int> bits) {
  Mask m(1, static_cast<int>(bits.size()), 1);
  std::size_t i = 0;
  for (int b : bits) m.data()[i++] = static_cast<std::uint8_t>(b ? 255 : 0);
  return m;
}

TEST(ConfusionTest, PerfectPrediction) {
  Mask gt(10, 10, 1, 0);
  for (int x = 0; x < 10; ++x) gt(0, x) = 255;
  const auto c = confusion(gt, gt);
  EXPECT_EQ(c, (ConfusionCounts{10, 0, 0, 90}));
}

TEST(ConfusionTest, PartialHit) {
  const Mask gt = mask_from({1, 1, 1, 1, 0, 0, 0, 0, 0, 0});
  const Mask pred = mask_from({1, 1, 0, 0, 1, 1, 0, 0, 0, 0});
  const auto c = confusion(pred, gt);
  EXPECT_EQ(c.tp, 2u);
  EXPECT_EQ(c.fp, 2u);
  EXPECT_EQ(c.fn, 2u);
  EXPECT_EQ(c.tn, 4u);
}

TEST(ConfusionTest, AnyNonZeroIsPositive) {
  Mask pred(1, 2, 1);
  pred(0, 0) = 1;
  pred(0, 1) = 0;
  Mask gt(1, 2, 1);
  gt(0, 0) = 255;
  gt(0, 1) = 0;
  EXPECT_EQ(confusion(pred, gt), (ConfusionCounts{1, 0, 0, 1}));
}

TEST(ConfusionTest, ShapeMismatch) {
  try {
    confusion(Mask(2, 2, 1), Mask(2, 3, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

TEST(MetricsTest, WorkedExamples) {
  auto m = compute_metrics({10, 0, 0, 90});
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.iou, 1.0);
  EXPECT_EQ(m.f1, 1.0);
  m = compute_metrics({2, 2, 2, 4});
  EXPECT_NEAR(m.accuracy, 0.6, 1e-12);
  EXPECT_NEAR(m.iou, 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(m.f1, 0.5, 1e-12);
}

TEST(MetricsTest, NoPositivesAnywhere) {
  const auto m = compute_metrics({0, 0, 0, 100});
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.iou, 1.0);
  EXPECT_EQ(m.f1, 1.0);
}

TEST(MetricsTest, EmptyCountsRejected) {
  try {
    compute_metrics({});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyEvaluation);
  }
}

TEST(MetricsTest, F1IouIdentityAndRange) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20000; ++t) {
    ConfusionCounts c;
    c.tp = testing::uniform_int(rng, 0, 1000);
    c.fp = testing::uniform_int(rng, 0, 1000);
    c.fn = testing::uniform_int(rng, 0, 1000);
    c.tn = testing::uniform_int(rng, 0, 1000);
    if (c.total() == 0) continue;
    const auto m = compute_metrics(c);
    ASSERT_NEAR(m.f1, 2.0 * m.iou / (1.0 + m.iou), 1e-12);
    for (double v : {m.accuracy, m.iou, m.f1}) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
    }
  }
}

TEST(LuxBinTest, Boundaries) {
  EXPECT_EQ(lux_bin(0.0), LuxBin::kLow);
  EXPECT_EQ(lux_bin(50.0), LuxBin::kLow);
  EXPECT_EQ(lux_bin(99.999), LuxBin::kLow);
  EXPECT_EQ(lux_bin(100.0), LuxBin::kMedium);
  EXPECT_EQ(lux_bin(10000.0), LuxBin::kMedium);
  EXPECT_EQ(lux_bin(10000.01), LuxBin::kHigh);
  EXPECT_EQ(lux_bin(1e9), LuxBin::kHigh);
  EXPECT_THROW(lux_bin(-1.0), Error);
}

struct LuxOnly {
  std::optional<double> lux;
};

TEST(LuxBinTest, PartitionIsDisjointAndExhaustive) {
  std::mt19937_64 rng(4);
  std::vector<LuxOnly> frames;
  for (double b : {0.0, 100.0, 10000.0, 10000.01}) frames.push_back({b});
  for (int i = 0; i < 2000; ++i) frames.push_back({std::exp(testing::uniform(rng, -3.0, 12.0))});
  const auto part = bin_by_lux(std::span<const LuxOnly>(frames));
  std::vector<int> hits(frames.size(), 0);
  for (LuxBin b : kLuxBins) {
    for (std::size_t i : part[b]) {
      ++hits[i];
      EXPECT_EQ(lux_bin(*frames[i].lux), b);
    }
  }
  for (int h : hits) EXPECT_EQ(h, 1);
}

TEST(LuxBinTest, MissingLux) {
  const std::vector<LuxOnly> frames = {{5.0}, {std::nullopt}};
  try {
    bin_by_lux(std::span<const LuxOnly>(frames));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingLux);
  }
}

TEST(AggregationTest, MicroDiffersFromMacro) {
  // One frame with many positives predicted well, one with few predicted badly.
  const ConfusionCounts a{90, 5, 5, 0};
  const ConfusionCounts b{1, 9, 0, 90};
  const double macro = 0.5 * (compute_metrics(a).iou + compute_metrics(b).iou);
  const double micro = compute_metrics(a + b).iou;
  EXPECT_NEAR(micro, 91.0 / 110.0, 1e-12);
  EXPECT_GT(std::abs(micro - macro), 0.1);
}

// --- evaluation ---------------------------------------------------------------

nn::Model constant_model(float head_bias) {
  nn::Model m;
  m.config = testing::tiny_config();
  m.spec = {FusionMode::kNone, std::nullopt};
  m.weights = nn::init_network<float>(m.config, m.spec, 1);
  auto& head = m.weights.at("head.weight");
  std::fill(head.data.begin(), head.data.end(), 0.0f);
  m.weights.at("head.bias").data[0] = head_bias;
  return m;
}

LabeledFrame random_frame(std::mt19937_64& rng, double lux, int size = 8) {
  LabeledFrame f;
  f.id = "f";
  f.rgb = RgbImage(size, size, 3);
  for (auto& v : f.rgb.values()) v = static_cast<std::uint8_t>(testing::uniform_int(rng, 0, 255));
  f.mask = testing::random_mask(rng, size, size);
  f.lux = lux;
  return f;
}

TEST(EvaluateTest, PerfectSingleFrame) {
  std::mt19937_64 rng(5);
  LabeledFrame f = random_frame(rng, 500.0);
  std::fill(f.mask.values().begin(), f.mask.values().end(), 255);
  const auto r = evaluate_model(constant_model(20.0f), std::span<const LabeledFrame>(&f, 1));
  const auto& medium = r.bins[static_cast<std::size_t>(LuxBin::kMedium)];
  EXPECT_EQ(medium.frames, 1u);
  const auto m = medium.metrics();
  ASSERT_TRUE(m.has_value());
  EXPECT_EQ(m->accuracy, 1.0);
  EXPECT_EQ(m->iou, 1.0);
  EXPECT_EQ(m->f1, 1.0);
  EXPECT_FALSE(r.bins[0].metrics().has_value());
}

TEST(EvaluateTest, OverallEqualsPooledCounts) {
  std::mt19937_64 rng(6);
  std::vector<LabeledFrame> frames;
  for (double lux : {10.0, 80.0, 100.0, 4000.0, 10000.0, 20000.0, 70000.0}) {
    frames.push_back(random_frame(rng, lux));
  }
  nn::Model model;
  model.config = testing::tiny_config();
  model.spec = {FusionMode::kNone, std::nullopt};
  model.weights = nn::init_network<float>(model.config, model.spec, 2);
  const auto r = evaluate_model(model, frames);
  ConfusionCounts pooled;
  for (const auto& f : frames) pooled += confusion(predict(model, f), f.mask);
  EXPECT_EQ(r.overall().counts, pooled);
  EXPECT_EQ(r.overall().frames, frames.size());
  EXPECT_EQ(r.bins[0].frames, 2u);
  EXPECT_EQ(r.bins[1].frames, 3u);
  EXPECT_EQ(r.bins[2].frames, 2u);
  const auto overall = compute_metrics(pooled);
  EXPECT_EQ(r.overall().metrics()->iou, overall.iou);
}

TEST(EvaluateTest, EmptyFrameList) {
  try {
    evaluate_model(constant_model(0.0f), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyDataset);
  }
}

TEST(ReportTest, CsvLayoutAndBlankBins) {
  std::mt19937_64 rng(7);
  const std::vector<LabeledFrame> frames = {random_frame(rng, 20000.0)};
  const std::vector<nn::Model> models = {constant_model(20.0f)};
  const auto report = evaluate(models, frames);
  std::ostringstream csv;
  write_report_csv(csv, report);
  std::istringstream lines(csv.str());
  std::vector<std::string> rows;
  for (std::string l; std::getline(lines, l);) rows.push_back(l);
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0], "mode,input1,input2,bin,accuracy,iou,f1,frames");
  EXPECT_EQ(rows[1], "na,RGB,RGB,low,,,,0");
  EXPECT_EQ(rows[2], "na,RGB,RGB,medium,,,,0");
  EXPECT_EQ(rows[3].substr(0, 15), "na,RGB,RGB,high");
  EXPECT_EQ(rows[4].substr(0, 18), "na,RGB,RGB,overall");
  EXPECT_EQ(rows[4].substr(rows[4].size() - 2), ",1");

  std::ostringstream text;
  write_report_text(text, report);
  EXPECT_NE(text.str().find("overall"), std::string::npos);
}

TEST(FpsTest, Arithmetic) {
  EXPECT_DOUBLE_EQ(fps_from(100, 4.0), 25.0);
  EXPECT_THROW(fps_from(0, 1.0), Error);
  EXPECT_THROW(fps_from(10, 0.0), Error);
}

TEST(FpsTest, MeasuredThroughputIsTagged) {
  std::mt19937_64 rng(8);
  const nn::Model model = constant_model(0.0f);
  std::vector<FusionInput> inputs;
  for (int i = 0; i < 4; ++i) {
    inputs.push_back(frame_input(random_frame(rng, 1.0, 16), model.spec, model.max_depth));
  }
  const auto r = measure_fps(model, inputs, 3);
  EXPECT_EQ(r.frames, 4u);
  EXPECT_GT(r.fps, 0.0);
  EXPECT_GT(r.seconds, 0.0);
  EXPECT_NEAR(r.fps, 4.0 / r.seconds, 1e-9 * r.fps);
  EXPECT_FALSE(r.machine.empty());
  EXPECT_NE(r.machine.find("hw threads"), std::string::npos);
  EXPECT_THROW(measure_fps(model, {}, 0), Error);
}

}  // namespace
}  // namespace tomd
