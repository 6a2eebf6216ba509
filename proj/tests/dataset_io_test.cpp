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

#include "tomd/dataset.hpp"

#include <fstream>
#include <random>
#include <sstream>

#include "gtest/gtest.h"
#include "test_support.hpp"

namespace tomd {
namespace {

constexpr std::int64_t kMs = 1'000'000;

SensorStream stream(std::string id, std::vector<std::int64_t> ts_ms, std::string payload = "x") {
  SensorStream s;
  s.id = std::move(id);
  for (auto t : ts_ms) s.readings.push_back({t * kMs, payload + std::to_string(t)});
  return s;
}

SensorStream lux_stream(std::vector<std::int64_t> ts_ms, double lux = 250.0) {
  SensorStream s;
  s.id = std::string(stream_id::kLux);
  for (auto t : ts_ms) s.readings.push_back({t * kMs, std::to_string(lux)});
  return s;
}

// --- synchronisation ------------------------------------------------------

TEST(SynchronizeTest, NearestWithinTolerance) {
  const std::vector<SensorStream> streams = {stream("lidar", {0, 100}, "c"),
                                             stream("camera", {3, 103}, "i"),
                                             lux_stream({0, 100})};
  const auto r = synchronize(streams, stream_id::kLidar, 50 * kMs);
  ASSERT_EQ(r.records.size(), 2u);
  EXPECT_EQ(r.dropped, 0u);
  EXPECT_EQ(r.records[0].image_path, "i3");
  EXPECT_EQ(r.records[1].image_path, "i103");
  EXPECT_EQ(r.records[1].cloud_path, "c100");
  EXPECT_EQ(r.records[1].timestamp_ns, 100 * kMs);
  EXPECT_DOUBLE_EQ(*r.records[0].lux, 250.0);
}

TEST(SynchronizeTest, OutOfToleranceDropped) {
  const std::vector<SensorStream> streams = {stream("lidar", {0, 100}), stream("camera", {60, 103}),
                                             lux_stream({0, 100})};
  const auto r = synchronize(streams, stream_id::kLidar, 50 * kMs);
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.dropped, 1u);
  EXPECT_EQ(r.records[0].timestamp_ns, 100 * kMs);
}

TEST(SynchronizeTest, MissingLuxDropped) {
  const std::vector<SensorStream> streams = {stream("lidar", {0, 100, 200}),
                                             stream("camera", {0, 100, 200}), lux_stream({0})};
  const auto r = synchronize(streams, stream_id::kLidar, 50 * kMs);
  EXPECT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.dropped, 2u);
}

TEST(SynchronizeTest, EquidistantTiePicksEarlier) {
  const SensorStream cam = stream("camera", {40, 60});
  EXPECT_EQ(nearest_reading(cam, 50 * kMs, 50 * kMs), 0u);
  EXPECT_EQ(nearest_reading(cam, 51 * kMs, 50 * kMs), 1u);
  EXPECT_FALSE(nearest_reading(cam, 200 * kMs, 50 * kMs).has_value());
}

TEST(SynchronizeTest, OptionalStreamsPassThrough) {
  std::vector<SensorStream> streams = {stream("lidar", {0}), stream("camera", {1}), lux_stream({2})};
  SensorStream gnss;
  gnss.id = "gnss";
  gnss.readings.push_back({0, "51.5,-0.12,30"});
  streams.push_back(gnss);
  streams.push_back(stream("teleop", {0}, "forward"));
  const auto r = synchronize(streams, stream_id::kLidar, 50 * kMs);
  ASSERT_EQ(r.records.size(), 1u);
  ASSERT_TRUE(r.records[0].gnss.has_value());
  EXPECT_DOUBLE_EQ(r.records[0].gnss->longitude, -0.12);
  EXPECT_EQ(r.records[0].teleop, "forward0");
  EXPECT_FALSE(r.records[0].imu.has_value());
}

TEST(SynchronizeTest, EmptyMaster) {
  const std::vector<SensorStream> streams = {stream("lidar", {}), stream("camera", {0})};
  try {
    synchronize(streams, stream_id::kLidar, 50 * kMs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyMaster);
  }
}

TEST(SynchronizeTest, RandomStreamsKeepMasterTimestamps) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    auto jittered = [&](std::string id, double rate_hz) {
      SensorStream s;
      s.id = std::move(id);
      std::int64_t t = testing::uniform_int(rng, 0, 30) * kMs;
      const auto period = static_cast<std::int64_t>(1e9 / rate_hz);
      for (int i = 0; i < 40; ++i) {
        s.readings.push_back({t, std::to_string(testing::uniform(rng, 0, 5000))});
        t += period + testing::uniform_int(rng, -period / 4, period / 4);
      }
      return s;
    };
    const std::vector<SensorStream> streams = {jittered("lidar", 10), jittered("camera", 15),
                                               jittered("lux", 5)};
    const std::int64_t tol = testing::uniform_int(rng, 5, 60) * kMs;
    const auto r = synchronize(streams, stream_id::kLidar, tol);
    EXPECT_EQ(r.records.size() + r.dropped, streams[0].readings.size());
    std::size_t j = 0;
    for (const auto& rec : r.records) {
      while (streams[0].readings[j].timestamp_ns != rec.timestamp_ns) {
        ++j;
        ASSERT_LT(j, streams[0].readings.size());
      }
      const auto cam = nearest_reading(streams[1], rec.timestamp_ns, tol);
      ASSERT_TRUE(cam.has_value());
      EXPECT_LE(std::llabs(streams[1].readings[*cam].timestamp_ns - rec.timestamp_ns), tol);
      EXPECT_EQ(rec.image_path, streams[1].readings[*cam].payload);
    }
  }
}

TEST(SynchronizeTest, NonMonotonicStreamRejected) {
  const std::vector<SensorStream> streams = {stream("lidar", {0, 100}), stream("camera", {5, 3}),
                                             lux_stream({0})};
  EXPECT_THROW(synchronize(streams, stream_id::kLidar, 50 * kMs), Error);
}

// --- keyframes and splits ---------------------------------------------------

std::vector<FrameRecord> blank_records(std::size_t n) {
  std::vector<FrameRecord> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i].id = std::to_string(i);
  return out;
}

TEST(KeyframeTest, Stride) {
  auto r = blank_records(100);
  select_keyframes(r, 10);
  for (std::size_t i = 0; i < r.size(); ++i) EXPECT_EQ(r[i].keyframe, i % 10 == 0);
  select_keyframes(r, 1);
  for (const auto& f : r) EXPECT_TRUE(f.keyframe);
  auto few = blank_records(5);
  select_keyframes(few, 10);
  EXPECT_TRUE(few[0].keyframe);
  for (std::size_t i = 1; i < 5; ++i) EXPECT_FALSE(few[i].keyframe);
  EXPECT_THROW(select_keyframes(few, 0), Error);
}

TEST(SplitTest, Sizes) {
  EXPECT_EQ(split_sizes(3508, {}), (SplitSizes{2806, 350, 352}));
  EXPECT_EQ(split_sizes(10, {}), (SplitSizes{8, 1, 1}));
  for (std::size_t n = 3; n < 2000; ++n) {
    const auto s = split_sizes(n, {});
    ASSERT_EQ(s.train, static_cast<std::size_t>(std::floor(0.8 * n + 1e-9)));
    ASSERT_EQ(s.val, static_cast<std::size_t>(std::floor(0.1 * n + 1e-9)));
    ASSERT_EQ(s.train + s.val + s.test, n);
  }
  EXPECT_THROW(split_sizes(10, {0.5, 0.1, 0.1}), Error);
}

TEST(SplitTest, TagsPartitionAndAreDeterministic) {
  auto a = blank_records(3508);
  auto b = blank_records(3508);
  const auto sizes = split_dataset(a, {}, 42);
  split_dataset(b, {}, 42);
  std::size_t train = 0, val = 0, test = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].split, b[i].split);
    EXPECT_EQ(a[i].id, std::to_string(i));
    train += a[i].split == Split::kTrain;
    val += a[i].split == Split::kVal;
    test += a[i].split == Split::kTest;
  }
  EXPECT_EQ((SplitSizes{train, val, test}), sizes);
  EXPECT_EQ(sizes, (SplitSizes{2806, 350, 352}));
  auto c = blank_records(3508);
  split_dataset(c, {}, 43);
  std::size_t differ = 0;
  for (std::size_t i = 0; i < a.size(); ++i) differ += a[i].split != c[i].split;
  EXPECT_GT(differ, 0u);
}

TEST(SplitTest, EmptyDataset) {
  std::vector<FrameRecord> none;
  try {
    split_dataset(none, {}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyDataset);
  }
}

// --- manifest -----------------------------------------------------------------

std::vector<FrameRecord> random_records(std::mt19937_64& rng, std::size_t n) {
  std::vector<FrameRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    FrameRecord r;
    r.id = "frame_" + std::to_string(i);
    r.timestamp_ns = testing::uniform_int(rng, 0, 2'000'000'000) * 1000LL + 7;
    r.image_path = "images/" + std::to_string(r.timestamp_ns) + ".png";
    r.cloud_path = i % 7 == 0 ? "" : "clouds/" + std::to_string(r.timestamp_ns) + ".bin";
    if (i % 5 != 0) r.lux = testing::uniform(rng, 0, 1e5);
    if (i % 3 == 0) r.gnss = GnssFix{testing::uniform(rng, -90, 90), testing::uniform(rng, -180, 180), 12.5};
    if (i % 4 == 0) r.imu = "0.1,0.2,9.81";
    if (i % 6 == 0) r.teleop = "v=0.5 \"quoted\"";
    r.split = static_cast<Split>(i % 4);
    r.keyframe = i % 10 == 0;
    if (i % 2 == 0) r.mask_path = "masks/" + r.id + ".png";
    if (i % 9 == 0) r.calibration_path = "calibration.json";
    if (i % 8 == 0) r.sparse_depth_path = "sparse/" + r.id + ".png";
    if (i % 8 == 1) r.dense_depth_path = "dense/" + r.id + ".png";
    out.push_back(r);
  }
  return out;
}

TEST(ManifestTest, RoundTrip) {
  testing::TempDir dir("manifest");
  std::mt19937_64 rng(12);
  const auto records = random_records(rng, 1000);
  write_manifest(records, dir / "m.jsonl");
  const auto back = load_manifest(dir / "m.jsonl");
  ASSERT_EQ(back.size(), records.size());
  for (std::size_t i = 0; i < records.size(); ++i) ASSERT_TRUE(back[i] == records[i]) << i;
}

TEST(ManifestTest, EmptyFile) {
  testing::TempDir dir("manifest");
  { std::ofstream(dir / "m.jsonl"); }
  EXPECT_TRUE(load_manifest(dir / "m.jsonl").empty());
  std::istringstream blank("\n\n");
  EXPECT_TRUE(parse_manifest(blank).empty());
}

TEST(ManifestTest, MissingFieldNamesFieldAndLine) {
  std::istringstream in(
      R"({"id":"a","timestamp_ns":1,"image":"a.png","lux":5,"split":"none","keyframe":false})"
      "\n"
      R"({"id":"b","image":"b.png","lux":5,"split":"none","keyframe":false})"
      "\n");
  try {
    parse_manifest(in);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_EQ(e.field(), "timestamp_ns");
    EXPECT_EQ(e.code(), ErrorCode::kParseError);
  }
}

TEST(ManifestTest, BadValues) {
  auto field_of = [](const std::string& text) {
    std::istringstream in(text);
    try {
      parse_manifest(in);
    } catch (const ParseError& e) {
      return e.field();
    }
    return std::string("none");
  };
  EXPECT_EQ(field_of(R"({"id":"a","timestamp_ns":"x","image":"a.png","split":"none","keyframe":false})"),
            "timestamp_ns");
  EXPECT_EQ(field_of(R"({"id":"a","timestamp_ns":1,"image":"a.png","lux":-1,"split":"none","keyframe":false})"),
            "lux");
  EXPECT_EQ(field_of(R"({"id":"a","timestamp_ns":1,"image":"a.png","split":"dev","keyframe":false})"),
            "split");
  EXPECT_NE(field_of("{not json"), "none");
}

TEST(ManifestTest, MissingFileIsIoError) {
  try {
    load_manifest("/nonexistent/manifest.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIoError);
  }
}

// --- sequence directories -----------------------------------------------------

TEST(SequenceTest, LoadsStreamsFromLayout) {
  testing::TempDir dir("seq");
  std::filesystem::create_directories(dir / "images");
  std::filesystem::create_directories(dir / "clouds");
  for (std::int64_t t : {0, 100, 200}) {
    std::ofstream(dir / "clouds" / (std::to_string(t * kMs) + ".bin"));
    std::ofstream(dir / "images" / (std::to_string(t * kMs + 2 * kMs) + ".png"));
  }
  std::ofstream(dir / "images" / "notes.png");
  {
    std::ofstream lux(dir / "lux.csv");
    lux << "timestamp_ns,lux\n" << 0 << ",40\n" << 100 * kMs << ",150\n" << 200 * kMs << ",20000\r\n";
    std::ofstream imu(dir / "imu.csv");
    imu << 1 << ",0.1,0.2\n";
  }
  const auto streams = load_sequence_streams(dir.path());
  ASSERT_EQ(streams.size(), 4u);
  EXPECT_EQ(streams[0].readings.size(), 3u);
  EXPECT_EQ(streams[1].readings.size(), 3u);
  EXPECT_EQ(streams[2].readings.size(), 3u);
  EXPECT_EQ(streams[3].id, "imu");
  const auto r = synchronize(streams, stream_id::kLidar, 50 * kMs);
  ASSERT_EQ(r.records.size(), 3u);
  EXPECT_DOUBLE_EQ(*r.records[2].lux, 20000.0);
  EXPECT_EQ(r.records[0].imu, "0.1,0.2");
  EXPECT_FALSE(r.records[2].imu.has_value());
  EXPECT_NE(r.records[1].image_path.find(std::to_string(102 * kMs)), std::string::npos);
}

}  // namespace
}  // namespace tomd
