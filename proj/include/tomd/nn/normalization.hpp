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

#include <cmath>
#include <span>
#include <vector>

#include <json.hpp>

#include "tomd/chromaticity_fusion.hpp"
#include "tomd/error.hpp"
#include "tomd/nn/network.hpp"

namespace tomd::nn {

/// Per-channel affine standardisation (x - mean) / std of each stream,
/// fitted on training inputs and applied before the stems.
struct ChannelStats {
  std::vector<float> mean;
  std::vector<float> stddev;

  friend bool operator==(const ChannelStats&, const ChannelStats&) = default;
};

struct InputNormalization {
  ChannelStats stream1;
  ChannelStats stream2;

  bool empty() const { return stream1.mean.empty() && stream2.mean.empty(); }

  friend bool operator==(const InputNormalization&,
                         const InputNormalization&) = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ChannelStats, mean, stddev)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(InputNormalization, stream1, stream2)

namespace detail {

inline ChannelStats fit_stats(std::span<const LabeledSample> samples,
                              Grid<float> FusionInput::*member) {
  const int c = (samples.front().input.*member).channels();
  std::vector<double> sum(c, 0.0), sq(c, 0.0);
  double n = 0.0;
  for (const auto& s : samples) {
    const Grid<float>& g = s.input.*member;
    require(g.channels() == c, ErrorCode::kShapeMismatch,
            "training samples disagree on channel count");
    for (std::size_t p = 0; p < g.pixels(); ++p) {
      for (int k = 0; k < c; ++k) {
        const double v = g.data()[p * c + k];
        sum[k] += v;
        sq[k] += v * v;
      }
    }
    n += static_cast<double>(g.pixels());
  }
  ChannelStats st;
  for (int k = 0; k < c; ++k) {
    const double mean = sum[k] / n;
    const double var = std::max(0.0, sq[k] / n - mean * mean);
    st.mean.push_back(static_cast<float>(mean));
    // Constant channels (e.g. an all-zero sparse plane) keep unit scale.
    st.stddev.push_back(static_cast<float>(var > 1e-12 ? std::sqrt(var) : 1.0));
  }
  return st;
}

inline void apply_stats(Grid<float>& g, const ChannelStats& st) {
  if (st.mean.empty()) return;
  const int c = g.channels();
  require(static_cast<int>(st.mean.size()) == c, ErrorCode::kShapeMismatch,
          "normalisation has " + std::to_string(st.mean.size()) +
              " channels, stream has " + std::to_string(c));
  for (std::size_t p = 0; p < g.pixels(); ++p) {
    for (int k = 0; k < c; ++k) {
      float& v = g.data()[p * c + k];
      v = (v - st.mean[k]) / st.stddev[k];
    }
  }
}

}  // namespace detail

inline InputNormalization fit_normalization(std::span<const LabeledSample> samples) {
  require(!samples.empty(), ErrorCode::kEmptyDataset, "no samples to fit");
  return {detail::fit_stats(samples, &FusionInput::input1),
          detail::fit_stats(samples, &FusionInput::input2)};
}

inline void normalize_inplace(FusionInput& input, const InputNormalization& n) {
  detail::apply_stats(input.input1, n.stream1);
  detail::apply_stats(input.input2, n.stream2);
}

inline FusionInput normalized(FusionInput input, const InputNormalization& n) {
  normalize_inplace(input, n);
  return input;
}

inline std::vector<LabeledSample> normalized(std::span<const LabeledSample> samples,
                                             const InputNormalization& n) {
  std::vector<LabeledSample> out(samples.begin(), samples.end());
  for (auto& s : out) normalize_inplace(s.input, n);
  return out;
}

}  // namespace tomd::nn
