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
#include <cstdint>
#include <optional>
#include <string_view>

#include "tomd/error.hpp"
#include "tomd/grid.hpp"

namespace tomd {

/// Pixel counts with traversable as the positive class.
struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const noexcept { return tp + fp + fn + tn; }

  ConfusionCounts& operator+=(const ConfusionCounts& o) noexcept {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  friend ConfusionCounts operator+(ConfusionCounts a, const ConfusionCounts& b) {
    return a += b;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Any non-zero mask value counts as traversable.
inline ConfusionCounts confusion(const Mask& pred, const Mask& gt) {
  require(pred.same_shape(gt), ErrorCode::kDimensionMismatch,
          "prediction " + shape_string(pred) + " vs ground truth " +
              shape_string(gt));
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred.data()[i] != 0;
    const bool g = gt.data()[i] != 0;
    if (p && g) {
      ++c.tp;
    } else if (p) {
      ++c.fp;
    } else if (g) {
      ++c.fn;
    } else {
      ++c.tn;
    }
  }
  return c;
}

struct SegmentationMetrics {
  double accuracy = 0.0;
  double iou = 0.0;
  double f1 = 0.0;
};

/// With no positives predicted or present (TP = FP = FN = 0) IoU and F1
/// are defined as 1.
inline SegmentationMetrics compute_metrics(const ConfusionCounts& c) {
  require(c.total() > 0, ErrorCode::kEmptyEvaluation, "no pixels evaluated");
  SegmentationMetrics m;
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  const std::uint64_t union_count = c.tp + c.fp + c.fn;
  if (union_count == 0) {
    m.iou = 1.0;
    m.f1 = 1.0;
  } else {
    m.iou = static_cast<double>(c.tp) / static_cast<double>(union_count);
    m.f1 = static_cast<double>(2 * c.tp) / static_cast<double>(2 * c.tp + c.fp + c.fn);
  }
  return m;
}

enum class LuxBin { kLow, kMedium, kHigh };

inline constexpr double kLowLuxUpper = 100.0;      // low = [0, 100)
inline constexpr double kMediumLuxUpper = 10000.0; // medium = [100, 10000]

inline LuxBin lux_bin(double lux) {
  require(lux >= 0.0, ErrorCode::kInvalidArgument, "lux must be >= 0");
  if (lux < kLowLuxUpper) return LuxBin::kLow;
  if (lux <= kMediumLuxUpper) return LuxBin::kMedium;
  return LuxBin::kHigh;
}

inline std::string_view to_string(LuxBin bin) {
  switch (bin) {
    case LuxBin::kLow: return "low";
    case LuxBin::kMedium: return "medium";
    case LuxBin::kHigh: return "high";
  }
  return "?";
}

inline constexpr std::array<LuxBin, 3> kLuxBins = {LuxBin::kLow, LuxBin::kMedium,
                                                   LuxBin::kHigh};

}  // namespace tomd
