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

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "tomd/chromaticity_fusion.hpp"
#include "tomd/dataset.hpp"
#include "tomd/depth_completion.hpp"
#include "tomd/geometry.hpp"
#include "tomd/image_io.hpp"
#include "tomd/nn/network.hpp"

namespace tomd {

/// Decoded per-frame data. Depth maps and the mask are empty (0 x 0) when
/// not loaded.
struct LabeledFrame {
  std::string id;
  RgbImage rgb;
  DepthMap sparse;
  DepthMap dense;
  Mask mask;
  std::optional<double> lux;
};

struct FrameLoadOptions {
  bool need_sparse = false;
  bool need_dense = false;
  bool need_mask = true;
  CompletionParams completion;
};

/// Depth comes from the record's cached PNGs when present; otherwise the
/// point cloud is projected with the record's calibration (and completed
/// for dense depth).
inline LabeledFrame load_frame(const std::filesystem::path& manifest,
                               const FrameRecord& r, const FrameLoadOptions& opt) {
  LabeledFrame f;
  f.id = r.id;
  f.lux = r.lux;
  f.rgb = png::read_rgb(resolve_path(manifest, r.image_path));
  if (opt.need_mask) {
    require(r.mask_path.has_value(), ErrorCode::kMissingModality,
            "frame " + r.id + " has no mask");
    f.mask = png::read_gray8(resolve_path(manifest, *r.mask_path));
  }
  const bool cached_dense = opt.need_dense && r.dense_depth_path;
  if (opt.need_sparse || (opt.need_dense && !cached_dense)) {
    if (r.sparse_depth_path) {
      f.sparse = load_depth_png(resolve_path(manifest, *r.sparse_depth_path),
                                DepthKind::kSparse);
    } else {
      require(r.calibration_path.has_value() && !r.cloud_path.empty(),
              ErrorCode::kMissingModality,
              "frame " + r.id + " has neither cached depth nor cloud + calibration");
      const Calibration cal = load_calibration(resolve_path(manifest, *r.calibration_path));
      const PointCloud cloud = load_point_cloud(resolve_path(manifest, r.cloud_path));
      f.sparse = project_to_sparse_depth(transform_points(cloud, cal.extrinsic),
                                         cal.camera)
                     .depth;
    }
  }
  if (opt.need_dense) {
    f.dense = cached_dense
                  ? load_depth_png(resolve_path(manifest, *r.dense_depth_path),
                                   DepthKind::kDense)
                  : complete_depth(f.sparse, opt.completion);
  }
  return f;
}

inline FrameLoadOptions load_options_for(const FusionSpec& spec, bool need_mask) {
  FrameLoadOptions o;
  o.need_mask = need_mask;
  if (spec.needs_depth()) {
    o.need_sparse = spec.depth == DepthKind::kSparse;
    o.need_dense = spec.depth == DepthKind::kDense;
  }
  return o;
}

inline FusionInput frame_input(const LabeledFrame& f, const FusionSpec& spec,
                               double max_depth) {
  const DepthMap* depth = nullptr;
  if (spec.needs_depth()) depth = spec.depth == DepthKind::kSparse ? &f.sparse : &f.dense;
  return assemble_fusion_input(spec, f.rgb, depth, max_depth);
}

inline nn::LabeledSample to_labeled_sample(const LabeledFrame& f,
                                           const FusionSpec& spec,
                                           double max_depth) {
  return {frame_input(f, spec, max_depth), f.mask};
}

inline std::vector<nn::LabeledSample> to_labeled_samples(
    std::span<const LabeledFrame> frames, const FusionSpec& spec,
    double max_depth) {
  std::vector<nn::LabeledSample> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(to_labeled_sample(f, spec, max_depth));
  return out;
}

}  // namespace tomd
