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

// Dynamic convolutional module (DCM).
//
// For scale k the module reduces F1 with a 1x1 conv f_k (c -> c'), turns
// the k x k adaptive average pool of F2 into a filter bank with a 1x1 conv
// g_k (c -> c'), correlates every reduced channel with its own k x k filter
// and finishes with a 1x1 conv (c' -> c'):
//
//   O_k = post_k( f_k(F1) (*) g_k(pool_k(F2)) )
//
// Several scales run in parallel; their outputs are concatenated along
// channels and merged back to c channels by a 1x1 conv.

#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include <json.hpp>

#include "tomd/error.hpp"
#include "tomd/nn/layers.hpp"
#include "tomd/nn/parameters.hpp"

namespace tomd::nn {

struct DcmConfig {
  std::vector<int> scales{1, 3, 5};
  int reduced_channels = 8;  // c'
  int backbone_channels = 32;  // c
  int backbone_depth = 4;
  int stem_channels = 16;
  int decoder_channels = 16;

  void validate() const {
    require(!scales.empty(), ErrorCode::kInvalidArgument, "no DCM scales");
    for (int k : scales) {
      require(k >= 1 && k % 2 == 1, ErrorCode::kInvalidArgument,
              "DCM scales must be odd and >= 1");
    }
    auto sorted = scales;
    std::sort(sorted.begin(), sorted.end());
    require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(),
            ErrorCode::kInvalidArgument, "duplicate DCM scale");
    require(reduced_channels >= 1 && reduced_channels < backbone_channels,
            ErrorCode::kInvalidArgument, "need 1 <= c' < c");
    require(backbone_depth >= 1 && stem_channels >= 1 && decoder_channels >= 1,
            ErrorCode::kInvalidArgument, "layer sizes must be positive");
  }

  int max_scale() const { return *std::max_element(scales.begin(), scales.end()); }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DcmConfig, scales,
                                                reduced_channels,
                                                backbone_channels,
                                                backbone_depth, stem_channels,
                                                decoder_channels)

inline std::string dcm_name(int k, const char* part) {
  return "dcm.k" + std::to_string(k) + "." + part;
}

template <typename T>
void add_dcm_parameters(Parameters<T>& p, int c, int c_reduced, int k) {
  add_conv(p, dcm_name(k, "f"), c, c_reduced);
  add_conv(p, dcm_name(k, "g"), c, c_reduced);
  add_conv(p, dcm_name(k, "post"), c_reduced, c_reduced);
}

template <typename T>
void add_multiscale_parameters(Parameters<T>& p, const DcmConfig& cfg) {
  for (int k : cfg.scales) {
    add_dcm_parameters(p, cfg.backbone_channels, cfg.reduced_channels, k);
  }
  add_conv(p, "merge",
           static_cast<int>(cfg.scales.size()) * cfg.reduced_channels,
           cfg.backbone_channels);
}

template <typename T>
struct DcmCache {
  FeatureMap<T> reduced;    // f_k(F1), h x w x c'
  FeatureMap<T> pooled;     // pool_k(F2), k x k x c
  FeatureMap<T> filters;    // g_k(pooled), k x k x c'
  FeatureMap<T> correlated; // reduced (*) filters
};

template <typename T>
FeatureMap<T> dcm_forward(const FeatureMap<T>& f1, const FeatureMap<T>& f2,
                          int k, const Parameters<T>& w,
                          DcmCache<T>* cache = nullptr) {
  require(f1.same_shape(f2), ErrorCode::kDimensionMismatch,
          "F1 " + shape_string(f1) + " vs F2 " + shape_string(f2));
  DcmCache<T> local;
  DcmCache<T>& c = cache != nullptr ? *cache : local;
  c.reduced = apply_conv(f1, w, dcm_name(k, "f"));
  c.pooled = adaptive_avg_pool(f2, k);
  c.filters = apply_conv(c.pooled, w, dcm_name(k, "g"));
  c.correlated = dynamic_depthwise_conv(c.reduced, c.filters);
  return apply_conv(c.correlated, w, dcm_name(k, "post"));
}

/// Accumulates parameter gradients into `grads` and input gradients into
/// grad_f1 / grad_f2.
template <typename T>
void dcm_backward(const FeatureMap<T>& f1, const FeatureMap<T>& f2, int k,
                  const Parameters<T>& w, const DcmCache<T>& c,
                  const FeatureMap<T>& grad_out, Parameters<T>& grads,
                  FeatureMap<T>& grad_f1, FeatureMap<T>& grad_f2) {
  require(f1.same_shape(grad_f1) && f2.same_shape(grad_f2),
          ErrorCode::kShapeMismatch, "input gradient buffers mis-shaped");
  FeatureMap<T> g_corr(c.correlated.height(), c.correlated.width(),
                       c.correlated.channels(), T(0));
  apply_conv_backward(c.correlated, w, dcm_name(k, "post"), {}, grad_out,
                      grads, &g_corr);
  FeatureMap<T> g_reduced(c.reduced.height(), c.reduced.width(),
                          c.reduced.channels(), T(0));
  FeatureMap<T> g_filters(k, k, c.filters.channels(), T(0));
  dynamic_depthwise_conv_backward(c.reduced, c.filters, g_corr, g_reduced,
                                  g_filters);
  FeatureMap<T> g_pooled(k, k, c.pooled.channels(), T(0));
  apply_conv_backward(c.pooled, w, dcm_name(k, "g"), {}, g_filters, grads,
                      &g_pooled);
  adaptive_avg_pool_backward(g_pooled, grad_f2);
  apply_conv_backward(f1, w, dcm_name(k, "f"), {}, g_reduced, grads, &grad_f1);
}

template <typename T>
struct MultiscaleCache {
  std::vector<DcmCache<T>> dcm;
  FeatureMap<T> concat;
};

template <typename T>
FeatureMap<T> multiscale_fuse(const FeatureMap<T>& f1, const FeatureMap<T>& f2,
                              const DcmConfig& cfg, const Parameters<T>& w,
                              MultiscaleCache<T>* cache = nullptr) {
  require(f1.same_shape(f2), ErrorCode::kDimensionMismatch,
          "F1 " + shape_string(f1) + " vs F2 " + shape_string(f2));
  MultiscaleCache<T> local;
  MultiscaleCache<T>& c = cache != nullptr ? *cache : local;
  c.dcm.assign(cfg.scales.size(), {});
  std::vector<FeatureMap<T>> outputs;
  outputs.reserve(cfg.scales.size());
  for (std::size_t i = 0; i < cfg.scales.size(); ++i) {
    outputs.push_back(dcm_forward(f1, f2, cfg.scales[i], w, &c.dcm[i]));
  }
  c.concat = concat_channels(outputs);
  return apply_conv(c.concat, w, "merge");
}

template <typename T>
void multiscale_fuse_backward(const FeatureMap<T>& f1, const FeatureMap<T>& f2,
                              const DcmConfig& cfg, const Parameters<T>& w,
                              const MultiscaleCache<T>& c,
                              const FeatureMap<T>& grad_out,
                              Parameters<T>& grads, FeatureMap<T>& grad_f1,
                              FeatureMap<T>& grad_f2) {
  FeatureMap<T> g_concat(c.concat.height(), c.concat.width(),
                         c.concat.channels(), T(0));
  apply_conv_backward(c.concat, w, "merge", {}, grad_out, grads, &g_concat);
  std::vector<FeatureMap<T>> g_parts;
  for (std::size_t i = 0; i < cfg.scales.size(); ++i) {
    g_parts.emplace_back(f1.height(), f1.width(), cfg.reduced_channels, T(0));
  }
  concat_channels_backward(g_concat, g_parts);
  for (std::size_t i = 0; i < cfg.scales.size(); ++i) {
    dcm_backward(f1, f2, cfg.scales[i], w, c.dcm[i], g_parts[i], grads,
                 grad_f1, grad_f2);
  }
}

}  // namespace tomd::nn
