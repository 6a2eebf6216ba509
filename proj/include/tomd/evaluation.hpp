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

#pragma once

#include <array>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "tomd/dataset.hpp"
#include "tomd/error.hpp"
#include "tomd/frame_data.hpp"
#include "tomd/metrics.hpp"
#include "tomd/nn/network.hpp"
#include "tomd/nn/normalization.hpp"
#include "tomd/nn/weights_io.hpp"

namespace tomd {

// --- lux partition ------------------------------------------------------------

struct LuxPartition {
  std::array<std::vector<std::size_t>, 3> indices;  // low, medium, high

  const std::vector<std::size_t>& operator[](LuxBin b) const {
    return indices[static_cast<std::size_t>(b)];
  }
};

/// Indices of `frames` per lux bin; each index lands in exactly one bin.
/// Works for any record type with an optional<double> `lux` member.
template <typename Frame>
LuxPartition bin_by_lux(std::span<const Frame> frames) {
  LuxPartition p;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const std::optional<double>& lux = frames[i].lux;
    require(lux.has_value(), ErrorCode::kMissingLux,
            "frame at index " + std::to_string(i) + " has no lux reading");
    require(*lux >= 0.0, ErrorCode::kMissingLux,
            "frame at index " + std::to_string(i) + " has negative lux");
    p.indices[static_cast<std::size_t>(lux_bin(*lux))].push_back(i);
  }
  return p;
}

// --- inference ------------------------------------------------------------------

/// Binary 0 / 1 prediction for a raw (unnormalised) input.
inline Mask predict(const nn::Model& model, const FusionInput& raw) {
  const FusionInput in = nn::normalized(raw, model.normalization);
  return nn::predict_mask(nn::network_forward(in, model.weights, model.config),
                          model.threshold);
}

inline Mask predict(const nn::Model& model, const LabeledFrame& frame) {
  return predict(model, frame_input(frame, model.spec, model.max_depth));
}

// --- report -------------------------------------------------------------------

struct BinResult {
  ConfusionCounts counts;
  std::size_t frames = 0;

  std::optional<SegmentationMetrics> metrics() const {
    if (frames == 0) return std::nullopt;
    return compute_metrics(counts);
  }
};

struct ModeResult {
  FusionSpec spec;
  std::array<BinResult, 3> bins;  // low, medium, high

  BinResult overall() const {
    BinResult all;
    for (const auto& b : bins) {
      all.counts += b.counts;
      all.frames += b.frames;
    }
    return all;
  }
};

struct FpsResult {
  double fps = 0.0;
  std::size_t frames = 0;
  double seconds = 0.0;
  std::string machine;
};

struct MetricsReport {
  std::vector<ModeResult> modes;
  std::optional<FpsResult> fps;
};

/// Micro-averaged: confusion counts are summed over the frames of a bin
/// before metrics are computed.
inline ModeResult evaluate_model(const nn::Model& model,
                                 std::span<const LabeledFrame> frames) {
  require(!frames.empty(), ErrorCode::kEmptyDataset, "no frames to evaluate");
  const LuxPartition part = bin_by_lux(frames);
  ModeResult r;
  r.spec = model.spec;
  for (LuxBin b : kLuxBins) {
    auto& bin = r.bins[static_cast<std::size_t>(b)];
    for (std::size_t i : part[b]) {
      bin.counts += confusion(predict(model, frames[i]), frames[i].mask);
      ++bin.frames;
    }
  }
  return r;
}

inline MetricsReport evaluate(std::span<const nn::Model> models,
                              std::span<const LabeledFrame> frames) {
  MetricsReport report;
  for (const auto& m : models) report.modes.push_back(evaluate_model(m, frames));
  return report;
}

namespace detail {

struct ReportRow {
  std::string mode, input1, input2, bin;
  std::optional<SegmentationMetrics> metrics;
  std::size_t frames = 0;
};

inline std::vector<ReportRow> report_rows(const MetricsReport& report) {
  std::vector<ReportRow> rows;
  for (const auto& m : report.modes) {
    auto add = [&](std::string bin, const BinResult& b) {
      rows.push_back({std::string(to_string(m.spec.mode)),
                      std::string(to_string(m.spec.stream1())),
                      std::string(to_string(m.spec.stream2())), std::move(bin),
                      b.metrics(), b.frames});
    };
    for (LuxBin b : kLuxBins) add(std::string(to_string(b)), m.bins[static_cast<std::size_t>(b)]);
    add("overall", m.overall());
  }
  return rows;
}

inline std::string fixed(double v, int precision) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

}  // namespace detail

/// Columns: mode,input1,input2,bin,accuracy,iou,f1,frames. Empty bins
/// leave the metric fields blank.
inline void write_report_csv(std::ostream& out, const MetricsReport& report) {
  out << "mode,input1,input2,bin,accuracy,iou,f1,frames\n";
  for (const auto& row : detail::report_rows(report)) {
    out << row.mode << ',' << row.input1 << ',' << row.input2 << ',' << row.bin << ',';
    if (row.metrics) {
      out << detail::fixed(row.metrics->accuracy, 6) << ','
          << detail::fixed(row.metrics->iou, 6) << ','
          << detail::fixed(row.metrics->f1, 6);
    } else {
      out << ",,";
    }
    out << ',' << row.frames << '\n';
  }
}

inline void write_report_text(std::ostream& out, const MetricsReport& report) {
  out << std::left << std::setw(7) << "mode" << std::setw(8) << "input1"
      << std::setw(8) << "input2" << std::setw(9) << "bin" << std::right
      << std::setw(10) << "acc(%)" << std::setw(10) << "IoU(%)" << std::setw(10)
      << "F1(%)" << std::setw(8) << "frames" << '\n';
  for (const auto& row : detail::report_rows(report)) {
    out << std::left << std::setw(7) << row.mode << std::setw(8) << row.input1
        << std::setw(8) << row.input2 << std::setw(9) << row.bin << std::right;
    for (double v : row.metrics ? std::array{row.metrics->accuracy, row.metrics->iou,
                                             row.metrics->f1}
                                : std::array{-1.0, -1.0, -1.0}) {
      out << std::setw(10) << (v < 0.0 ? std::string("-") : detail::fixed(100.0 * v, 2));
    }
    out << std::setw(8) << row.frames << '\n';
  }
  if (report.fps) {
    out << "FPS " << detail::fixed(report.fps->fps, 2) << " over "
        << report.fps->frames << " frames (" << detail::fixed(report.fps->seconds, 3)
        << " s) on " << report.fps->machine << '\n';
  }
}

// --- throughput -----------------------------------------------------------------

inline double fps_from(std::size_t frames, double seconds) {
  require(frames > 0 && seconds > 0.0, ErrorCode::kInvalidArgument,
          "FPS needs a positive frame count and duration");
  return static_cast<double>(frames) / seconds;
}

inline std::string machine_descriptor() {
  std::string cpu = "unknown-cpu";
  std::ifstream info("/proc/cpuinfo");
  for (std::string line; std::getline(info, line);) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) {
        cpu = line.substr(line.find_first_not_of(' ', colon + 1));
      }
      break;
    }
  }
  std::ostringstream s;
  s << cpu << "; " << std::thread::hardware_concurrency() << " hw threads; "
#if defined(__clang__)
    << "clang " << __clang_major__ << '.' << __clang_minor__
#elif defined(__GNUC__)
    << "gcc " << __GNUC__ << '.' << __GNUC_MINOR__
#else
    << "unknown compiler"
#endif
#ifdef NDEBUG
    << "; optimised build";
#else
    << "; debug build";
#endif
  return s.str();
}

/// Times network_forward + predict_mask on pre-assembled, pre-normalised
/// inputs. The first `warmup` runs (cycling through `inputs`) are untimed;
/// then every input is run once under the clock.
inline FpsResult measure_fps(const nn::Model& model,
                             std::span<const FusionInput> raw_inputs,
                             std::size_t warmup) {
  require(!raw_inputs.empty(), ErrorCode::kEmptyDataset, "no frames to time");
  std::vector<FusionInput> inputs;
  inputs.reserve(raw_inputs.size());
  for (const auto& in : raw_inputs) inputs.push_back(nn::normalized(in, model.normalization));

  std::size_t sink = 0;
  auto run = [&](const FusionInput& in) {
    const Mask m = nn::predict_mask(
        nn::network_forward(in, model.weights, model.config), model.threshold);
    sink += m.data()[0];
  };
  for (std::size_t i = 0; i < warmup; ++i) run(inputs[i % inputs.size()]);
  const auto start = std::chrono::steady_clock::now();
  for (const auto& in : inputs) run(in);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  static_cast<void>(sink);
  FpsResult r;
  r.frames = inputs.size();
  r.seconds = seconds;
  r.fps = fps_from(r.frames, seconds);
  r.machine = machine_descriptor();
  return r;
}

}  // namespace tomd
