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

// Two-stream dynamic multiscale fusion network.
//
//   input1 -> stem[tag1] -> s1 -> backbone -> F1 --+
//                                                  +-> multiscale DCM -> fused
//   input2 -> stem[tag2] -> s2 -> backbone -> F2 --+
//
//   logits = head( relu( up(relu(fused)) * W_up + s1 * W_skip1 + s2 * W_skip2 ) )
//
// The backbone is shared between the streams: a stride-2 3x3 conv followed
// by dilated 3x3 convs at constant resolution. `up` is bilinear resampling
// back to the input size; the skips are 1x1 convs on the full-resolution
// stem activations.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <span>
#include <string>
#include <vector>

#include "tomd/chromaticity_fusion.hpp"
#include "tomd/error.hpp"
#include "tomd/nn/dcm.hpp"
#include "tomd/nn/layers.hpp"
#include "tomd/nn/parameters.hpp"

namespace tomd::nn {

inline std::string stem_name(Modality m) {
  return "stem." + std::string(to_string(m));
}

inline std::string backbone_name(int block) {
  return "backbone." + std::to_string(block);
}

inline ConvGeometry backbone_geometry(int block) {
  if (block == 0) return {3, 2, 1};
  return {3, 1, 1 << std::min(block, 2)};
}

/// Allocates every tensor the network needs for the two stream modalities
/// of `spec`, He-initialised from `seed`.
template <typename T>
Parameters<T> init_network(const DcmConfig& cfg, const FusionSpec& spec,
                           std::uint64_t seed) {
  cfg.validate();
  Parameters<T> p;
  const auto [m1, m2] = spec.modalities();
  add_conv(p, stem_name(m1), channel_count(m1), cfg.stem_channels);
  if (m2 != m1) add_conv(p, stem_name(m2), channel_count(m2), cfg.stem_channels);
  for (int b = 0; b < cfg.backbone_depth; ++b) {
    add_conv(p, backbone_name(b),
             b == 0 ? cfg.stem_channels : cfg.backbone_channels,
             cfg.backbone_channels, 3);
  }
  add_multiscale_parameters(p, cfg);
  add_conv(p, "decoder.up", cfg.backbone_channels, cfg.decoder_channels);
  add_conv(p, "decoder.skip1", cfg.stem_channels, cfg.decoder_channels);
  add_conv(p, "decoder.skip2", cfg.stem_channels, cfg.decoder_channels);
  add_conv(p, "head", cfg.decoder_channels, 1);
  he_initialize(p, seed);
  return p;
}

template <typename T>
FeatureMap<T> to_feature_map(const Grid<float>& g) {
  FeatureMap<T> out(g.height(), g.width(), g.channels());
  std::copy(g.values().begin(), g.values().end(), out.data());
  return out;
}

template <typename T>
struct StreamCache {
  FeatureMap<T> input;
  FeatureMap<T> stem_pre;
  FeatureMap<T> stem;
  std::vector<FeatureMap<T>> block_pre;
  std::vector<FeatureMap<T>> block_out;

  const FeatureMap<T>& features() const { return block_out.back(); }
};

template <typename T>
struct ForwardCache {
  StreamCache<T> stream1;
  StreamCache<T> stream2;
  MultiscaleCache<T> multiscale;
  FeatureMap<T> fused_pre;
  FeatureMap<T> fused;
  FeatureMap<T> upsampled;
  FeatureMap<T> decoder_pre;
  FeatureMap<T> decoder;
  FeatureMap<T> logits;

  /// Sign pattern of every ReLU input; used to detect kinks when comparing
  /// against finite differences.
  std::vector<bool> relu_signature() const {
    std::vector<bool> sig;
    auto push = [&](const FeatureMap<T>& g) {
      for (T v : g.values()) sig.push_back(v > T(0));
    };
    for (const auto* s : {&stream1, &stream2}) {
      push(s->stem_pre);
      for (const auto& b : s->block_pre) push(b);
    }
    push(fused_pre);
    push(decoder_pre);
    return sig;
  }
};

namespace detail {

template <typename T>
void stream_forward(const Grid<float>& input, Modality tag,
                    const DcmConfig& cfg, const Parameters<T>& w,
                    StreamCache<T>& c) {
  require(input.channels() == channel_count(tag), ErrorCode::kShapeMismatch,
          std::string(to_string(tag)) + " stream has " +
              std::to_string(input.channels()) + " channels");
  c.input = to_feature_map<T>(input);
  c.stem_pre = apply_conv(c.input, w, stem_name(tag));
  c.stem = relu(c.stem_pre);
  c.block_pre.clear();
  c.block_out.clear();
  const FeatureMap<T>* x = &c.stem;
  for (int b = 0; b < cfg.backbone_depth; ++b) {
    c.block_pre.push_back(apply_conv(*x, w, backbone_name(b), backbone_geometry(b)));
    c.block_out.push_back(relu(c.block_pre.back()));
    x = &c.block_out.back();
  }
}

template <typename T>
void stream_backward(Modality tag, const DcmConfig& cfg,
                     const Parameters<T>& w, const StreamCache<T>& c,
                     FeatureMap<T> grad_features, FeatureMap<T> grad_stem,
                     Parameters<T>& grads) {
  FeatureMap<T> g = std::move(grad_features);
  for (int b = cfg.backbone_depth - 1; b >= 0; --b) {
    FeatureMap<T> g_pre(g.height(), g.width(), g.channels(), T(0));
    relu_backward(c.block_pre[b], g, g_pre);
    const FeatureMap<T>& in = b == 0 ? c.stem : c.block_out[b - 1];
    FeatureMap<T> g_in(in.height(), in.width(), in.channels(), T(0));
    apply_conv_backward(in, w, backbone_name(b), backbone_geometry(b), g_pre,
                        grads, &g_in);
    g = std::move(g_in);
  }
  add_inplace(g, grad_stem);
  FeatureMap<T> g_stem_pre(g.height(), g.width(), g.channels(), T(0));
  relu_backward(c.stem_pre, g, g_stem_pre);
  apply_conv_backward<T>(c.input, w, stem_name(tag), {}, g_stem_pre, grads,
                         nullptr);
}

}  // namespace detail

/// Returns the H x W x 1 logit map for `sample`.
template <typename T>
FeatureMap<T> network_forward(const FusionInput& sample,
                              const Parameters<T>& w, const DcmConfig& cfg,
                              ForwardCache<T>* cache = nullptr) {
  require(sample.input1.same_extent(sample.input2), ErrorCode::kShapeMismatch,
          "input streams differ in size");
  ForwardCache<T> local;
  ForwardCache<T>& c = cache != nullptr ? *cache : local;
  detail::stream_forward(sample.input1, sample.tag1, cfg, w, c.stream1);
  detail::stream_forward(sample.input2, sample.tag2, cfg, w, c.stream2);
  const auto& f1 = c.stream1.features();
  const auto& f2 = c.stream2.features();
  require(cfg.max_scale() <= std::min(f1.height(), f1.width()),
          ErrorCode::kShapeMismatch,
          "input too small for DCM scale " + std::to_string(cfg.max_scale()));
  c.fused_pre = multiscale_fuse(f1, f2, cfg, w, &c.multiscale);
  c.fused = relu(c.fused_pre);
  c.upsampled = bilinear_resize(c.fused, sample.height(), sample.width());
  c.decoder_pre = apply_conv(c.upsampled, w, "decoder.up");
  add_inplace(c.decoder_pre, apply_conv(c.stream1.stem, w, "decoder.skip1"));
  add_inplace(c.decoder_pre, apply_conv(c.stream2.stem, w, "decoder.skip2"));
  c.decoder = relu(c.decoder_pre);
  c.logits = apply_conv(c.decoder, w, "head");
  return c.logits;
}

/// Back-propagates dL/dlogits through a cached forward pass and
/// accumulates parameter gradients into `grads`.
template <typename T>
void network_backward(const FusionInput& sample, const Parameters<T>& w,
                      const DcmConfig& cfg, const ForwardCache<T>& c,
                      const FeatureMap<T>& grad_logits, Parameters<T>& grads) {
  auto zeros = [](const FeatureMap<T>& like) {
    return FeatureMap<T>(like.height(), like.width(), like.channels(), T(0));
  };
  FeatureMap<T> g_dec = zeros(c.decoder);
  apply_conv_backward(c.decoder, w, "head", {}, grad_logits, grads, &g_dec);
  FeatureMap<T> g_dec_pre = zeros(c.decoder_pre);
  relu_backward(c.decoder_pre, g_dec, g_dec_pre);

  FeatureMap<T> g_up = zeros(c.upsampled);
  apply_conv_backward(c.upsampled, w, "decoder.up", {}, g_dec_pre, grads, &g_up);
  FeatureMap<T> g_stem1 = zeros(c.stream1.stem);
  FeatureMap<T> g_stem2 = zeros(c.stream2.stem);
  apply_conv_backward(c.stream1.stem, w, "decoder.skip1", {}, g_dec_pre, grads,
                      &g_stem1);
  apply_conv_backward(c.stream2.stem, w, "decoder.skip2", {}, g_dec_pre, grads,
                      &g_stem2);

  FeatureMap<T> g_fused = zeros(c.fused);
  bilinear_resize_backward(g_up, g_fused);
  FeatureMap<T> g_fused_pre = zeros(c.fused_pre);
  relu_backward(c.fused_pre, g_fused, g_fused_pre);

  const auto& f1 = c.stream1.features();
  const auto& f2 = c.stream2.features();
  FeatureMap<T> g_f1 = zeros(f1);
  FeatureMap<T> g_f2 = zeros(f2);
  multiscale_fuse_backward(f1, f2, cfg, w, c.multiscale, g_fused_pre, grads,
                           g_f1, g_f2);
  detail::stream_backward(sample.tag1, cfg, w, c.stream1, std::move(g_f1),
                          std::move(g_stem1), grads);
  detail::stream_backward(sample.tag2, cfg, w, c.stream2, std::move(g_f2),
                          std::move(g_stem2), grads);
}

/// A network input paired with its ground-truth mask (non-zero = traversable).
struct LabeledSample {
  FusionInput input;
  Mask mask;
};

template <typename T>
struct LossAndGradients {
  T loss = T(0);
  Parameters<T> grads;
};

namespace detail {

/// Sum (not mean) of per-pixel BCE for one sample; gradients are scaled by
/// `scale` before accumulation.
template <typename T>
T sample_loss_and_gradients(const LabeledSample& s, const Parameters<T>& w,
                            const DcmConfig& cfg, T scale,
                            Parameters<T>& grads) {
  require(s.mask.height() == s.input.height() &&
              s.mask.width() == s.input.width() && s.mask.channels() == 1,
          ErrorCode::kShapeMismatch,
          "mask " + shape_string(s.mask) + " vs input " +
              shape_string(s.input.input1));
  ForwardCache<T> cache;
  const FeatureMap<T> logits = network_forward(s.input, w, cfg, &cache);
  FeatureMap<T> g(logits.height(), logits.width(), 1);
  T loss = T(0);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const T z = logits.data()[i];
    const T y = s.mask.data()[i] != 0 ? T(1) : T(0);
    loss += bce_with_logit(z, y);
    g.data()[i] = scale * (sigmoid(z) - y);
  }
  network_backward(s.input, w, cfg, cache, g, grads);
  return loss;
}

}  // namespace detail

/// Mean per-pixel binary cross-entropy over the batch and its gradient.
///
/// Samples may be evaluated on `workers` threads; per-sample gradients are
/// reduced in batch order, so results do not depend on the worker count.
template <typename T>
LossAndGradients<T> loss_and_gradients(
    std::span<const LabeledSample* const> batch, const Parameters<T>& w,
    const DcmConfig& cfg, int workers = 1) {
  require(!batch.empty(), ErrorCode::kEmptyDataset, "empty batch");
  std::size_t pixels = 0;
  for (const auto* s : batch) pixels += s->mask.pixels();
  const T scale = T(1) / static_cast<T>(pixels);

  std::vector<Parameters<T>> per_sample(batch.size());
  std::vector<T> losses(batch.size(), T(0));
  auto run = [&](std::size_t i) {
    per_sample[i] = w.zeros_like();
    losses[i] = detail::sample_loss_and_gradients(*batch[i], w, cfg, scale,
                                                  per_sample[i]);
  };
  if (workers <= 1 || batch.size() == 1) {
    for (std::size_t i = 0; i < batch.size(); ++i) run(i);
  } else {
    std::vector<std::future<void>> jobs;
    const std::size_t n = batch.size();
    const std::size_t nw = std::min<std::size_t>(workers, n);
    for (std::size_t t = 0; t < nw; ++t) {
      jobs.push_back(std::async(std::launch::async, [&, t] {
        for (std::size_t i = t; i < n; i += nw) run(i);
      }));
    }
    for (auto& j : jobs) j.get();
  }

  LossAndGradients<T> out;
  out.grads = w.zeros_like();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out.loss += losses[i];
    out.grads.axpy(T(1), per_sample[i]);
  }
  out.loss *= scale;
  return out;
}

template <typename T>
LossAndGradients<T> loss_and_gradients(std::span<const LabeledSample> batch,
                                       const Parameters<T>& w,
                                       const DcmConfig& cfg, int workers = 1) {
  std::vector<const LabeledSample*> ptrs;
  ptrs.reserve(batch.size());
  for (const auto& s : batch) ptrs.push_back(&s);
  return loss_and_gradients<T>(std::span<const LabeledSample* const>(ptrs), w,
                               cfg, workers);
}

/// Binary mask (0 / 1): traversable iff sigmoid(logit) >= threshold.
template <typename T>
Mask predict_mask(const FeatureMap<T>& logits, double threshold) {
  require(threshold > 0.0 && threshold < 1.0, ErrorCode::kInvalidArgument,
          "threshold must lie in (0, 1)");
  Mask out(logits.height(), logits.width(), 1);
  for (std::size_t i = 0; i < logits.pixels(); ++i) {
    const double p = sigmoid(static_cast<double>(logits.data()[i * logits.channels()]));
    out.data()[i] = p >= threshold ? 1 : 0;
  }
  return out;
}

}  // namespace tomd::nn
