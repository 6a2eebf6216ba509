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

// LiDAR -> camera rigid transform and pinhole projection into sparse depth.

#pragma once

#include <Eigen/Core>
#include <Eigen/LU>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <vector>

#include <json.hpp>

#include "tomd/error.hpp"
#include "tomd/grid.hpp"
#include "tomd/image_io.hpp"

namespace tomd {

struct ExtrinsicCalibration {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static constexpr double kOrthonormalTolerance = 1e-6;

  /// Throws kInvalidRotation unless R is a proper rotation and t is finite.
  void validate() const {
    const double err =
        (rotation.transpose() * rotation - Eigen::Matrix3d::Identity())
            .cwiseAbs()
            .maxCoeff();
    require(rotation.allFinite() && err < kOrthonormalTolerance,
            ErrorCode::kInvalidRotation, "R is not orthonormal");
    require(rotation.determinant() > 0.0, ErrorCode::kInvalidRotation,
            "det(R) must be +1");
    require(translation.allFinite(), ErrorCode::kInvalidArgument,
            "t must be finite");
  }

  ExtrinsicCalibration inverse() const {
    return {rotation.transpose(), -(rotation.transpose() * translation)};
  }
};

struct CameraModel {
  Eigen::Matrix3d intrinsics = Eigen::Matrix3d::Identity();
  int width = 0;
  int height = 0;

  void validate() const {
    const auto& k = intrinsics;
    require(k(0, 0) > 0.0 && k(1, 1) > 0.0, ErrorCode::kInvalidArgument,
            "focal lengths must be positive");
    require(k(1, 0) == 0.0 && k(2, 0) == 0.0 && k(2, 1) == 0.0 &&
                k(2, 2) == 1.0,
            ErrorCode::kInvalidArgument,
            "K must be upper-triangular with last row [0, 0, 1]");
    require(width > 0 && height > 0, ErrorCode::kInvalidArgument,
            "image size must be positive");
  }
};

struct PointCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<float> intensity;  // empty, or one entry per point

  std::size_t size() const noexcept { return points.size(); }
};

enum class DepthKind { kSparse, kDense };

/// Per-pixel range in meters; 0 marks an invalid pixel.
struct DepthMap {
  Grid<double> values;
  DepthKind kind = DepthKind::kSparse;

  DepthMap() = default;
  DepthMap(int height, int width, DepthKind k = DepthKind::kSparse)
      : values(height, width, 1, 0.0), kind(k) {}

  int height() const noexcept { return values.height(); }
  int width() const noexcept { return values.width(); }
  double& operator()(int y, int x) noexcept { return values(y, x); }
  double operator()(int y, int x) const noexcept { return values(y, x); }

  std::size_t valid_count() const {
    return static_cast<std::size_t>(std::count_if(
        values.values().begin(), values.values().end(),
        [](double d) { return d > 0.0; }));
  }
};

/// How colliding projections are resolved when several points hit a pixel.
enum class CollisionRule {
  kNearestDepth,        // z-buffer: keep the minimum Z'
  kNearestPixelCenter,  // keep the point whose sub-pixel hit is closest
};

struct ProjectionOptions {
  CollisionRule collision = CollisionRule::kNearestDepth;
  /// Points with Z' at or below this are considered behind the camera.
  double min_depth = 1e-6;
};

struct SparseProjection {
  DepthMap depth;
  std::size_t behind_camera = 0;
  std::size_t out_of_bounds = 0;

  std::size_t dropped() const noexcept { return behind_camera + out_of_bounds; }
};

inline PointCloud transform_points(const PointCloud& cloud,
                                   const ExtrinsicCalibration& ext) {
  ext.validate();
  PointCloud out;
  out.points.reserve(cloud.points.size());
  for (const auto& p : cloud.points) {
    out.points.push_back(ext.rotation * p + ext.translation);
  }
  out.intensity = cloud.intensity;
  return out;
}

/// Pixel hit of a camera-frame point: round(K p / Z') - (1, 1). The
/// coordinates are integral but kept in double so far-off hits cannot
/// overflow. Returns nullopt for points at or behind the camera plane.
struct PixelHit {
  double u = 0.0;
  double v = 0.0;
  double subpixel_distance = 0.0;  // distance of the hit to its pixel centre
};

inline std::optional<PixelHit> project_point(const Eigen::Vector3d& p,
                                             const Eigen::Matrix3d& k,
                                             double min_depth = 1e-6) {
  if (!(p.z() > min_depth)) return std::nullopt;
  const Eigen::Vector3d h = k * p / p.z();
  const double ru = std::round(h.x());
  const double rv = std::round(h.y());
  return PixelHit{ru - 1.0, rv - 1.0, std::hypot(h.x() - ru, h.y() - rv)};
}

inline SparseProjection project_to_sparse_depth(
    const PointCloud& camera_cloud, const CameraModel& cam,
    const ProjectionOptions& options = {}) {
  cam.validate();
  SparseProjection out;
  out.depth = DepthMap(cam.height, cam.width, DepthKind::kSparse);
  // Tie-break key of the point currently owning each pixel.
  Grid<double> best_key(cam.height, cam.width, 1,
                        std::numeric_limits<double>::infinity());

  for (const auto& p : camera_cloud.points) {
    const auto hit = project_point(p, cam.intrinsics, options.min_depth);
    if (!hit) {
      ++out.behind_camera;
      continue;
    }
    if (hit->u < 0 || hit->u >= cam.width || hit->v < 0 ||
        hit->v >= cam.height) {
      ++out.out_of_bounds;
      continue;
    }
    const int u = static_cast<int>(hit->u);
    const int v = static_cast<int>(hit->v);
    const double key = options.collision == CollisionRule::kNearestDepth
                           ? p.z()
                           : hit->subpixel_distance;
    double& owner = best_key(v, u);
    // Equal keys under the pixel-centre rule fall back to the nearer point.
    if (key < owner || (key == owner && p.z() < out.depth(v, u))) {
      owner = key;
      out.depth(v, u) = p.z();
    }
  }
  return out;
}

/// Maps depth to a blue (near) -> red (far) ramp over the map's valid range.
inline std::array<std::uint8_t, 3> depth_ramp_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const double r = std::clamp(1.5 - std::abs(4.0 * t - 3.0), 0.0, 1.0);
  const double g = std::clamp(1.5 - std::abs(4.0 * t - 2.0), 0.0, 1.0);
  const double b = std::clamp(1.5 - std::abs(4.0 * t - 1.0), 0.0, 1.0);
  return {static_cast<std::uint8_t>(std::lround(255 * r)),
          static_cast<std::uint8_t>(std::lround(255 * g)),
          static_cast<std::uint8_t>(std::lround(255 * b))};
}

inline RgbImage overlay_projection(const RgbImage& image,
                                   const DepthMap& depth) {
  require(image.height() == depth.height() && image.width() == depth.width(),
          ErrorCode::kDimensionMismatch,
          "image " + shape_string(image) + " vs depth " +
              shape_string(depth.values));
  require(image.channels() == 3, ErrorCode::kDimensionMismatch,
          "overlay needs an RGB image");
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (double d : depth.values.values()) {
    if (d > 0.0) {
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
  }
  RgbImage out = image;
  const double span = hi > lo ? hi - lo : 1.0;
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      const double d = depth(y, x);
      if (d <= 0.0) continue;
      const auto rgb = depth_ramp_color((d - lo) / span);
      for (int c = 0; c < 3; ++c) out(y, x, c) = rgb[c];
    }
  }
  return out;
}

// --- file formats ---------------------------------------------------------

struct Calibration {
  CameraModel camera;
  ExtrinsicCalibration extrinsic;
};

namespace detail {

inline Eigen::Matrix3d matrix3_from_json(const nlohmann::json& j,
                                         const char* field) {
  require(j.is_array() && j.size() == 3, ErrorCode::kParseError,
          std::string(field) + " must be a 3x3 array");
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r) {
    require(j[r].is_array() && j[r].size() == 3, ErrorCode::kParseError,
            std::string(field) + " must be a 3x3 array");
    for (int c = 0; c < 3; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

inline nlohmann::json matrix3_to_json(const Eigen::Matrix3d& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2)});
  return rows;
}

}  // namespace detail

inline Calibration calibration_from_json(const nlohmann::json& j) {
  for (const char* key : {"K", "R", "t", "width", "height"}) {
    require(j.contains(key), ErrorCode::kParseError,
            std::string("calibration missing '") + key + "'");
  }
  Calibration cal;
  cal.camera.intrinsics = detail::matrix3_from_json(j["K"], "K");
  cal.camera.width = j["width"].get<int>();
  cal.camera.height = j["height"].get<int>();
  cal.extrinsic.rotation = detail::matrix3_from_json(j["R"], "R");
  const auto& t = j["t"];
  require(t.is_array() && t.size() == 3, ErrorCode::kParseError,
          "t must be a 3-array");
  cal.extrinsic.translation = {t[0].get<double>(), t[1].get<double>(),
                               t[2].get<double>()};
  cal.camera.validate();
  cal.extrinsic.validate();
  return cal;
}

inline nlohmann::json calibration_to_json(const Calibration& cal) {
  const auto& t = cal.extrinsic.translation;
  return {{"K", detail::matrix3_to_json(cal.camera.intrinsics)},
          {"R", detail::matrix3_to_json(cal.extrinsic.rotation)},
          {"t", {t.x(), t.y(), t.z()}},
          {"width", cal.camera.width},
          {"height", cal.camera.height}};
}

inline Calibration load_calibration(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIoError,
          "cannot open " + path.string());
  try {
    return calibration_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
}

inline void save_calibration(const std::filesystem::path& path,
                             const Calibration& cal) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::kIoError,
          "cannot write " + path.string());
  out << calibration_to_json(cal).dump(2) << '\n';
}

/// Little-endian records of four float32: x, y, z, intensity.
inline PointCloud load_point_cloud(const std::filesystem::path& path) {
  const auto bytes = png::read_file_bytes(path);
  constexpr std::size_t kRecord = 4 * sizeof(float);
  require(bytes.size() % kRecord == 0, ErrorCode::kParseError,
          path.string() + ": size is not a multiple of 16 bytes");
  PointCloud cloud;
  const std::size_t n = bytes.size() / kRecord;
  cloud.points.reserve(n);
  cloud.intensity.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    float rec[4];
    std::memcpy(rec, bytes.data() + i * kRecord, kRecord);
    cloud.points.emplace_back(rec[0], rec[1], rec[2]);
    cloud.intensity.push_back(rec[3]);
  }
  return cloud;
}

inline void save_point_cloud(const std::filesystem::path& path,
                             const PointCloud& cloud) {
  std::vector<std::uint8_t> bytes(cloud.size() * 4 * sizeof(float));
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const float rec[4] = {
        static_cast<float>(cloud.points[i].x()),
        static_cast<float>(cloud.points[i].y()),
        static_cast<float>(cloud.points[i].z()),
        cloud.intensity.empty() ? 0.0f : cloud.intensity[i]};
    std::memcpy(bytes.data() + i * sizeof(rec), rec, sizeof(rec));
  }
  png::write_file_bytes(path, bytes);
}

/// 16-bit PNG in millimetres, 0 = invalid.
inline DepthMap load_depth_png(const std::filesystem::path& path,
                               DepthKind kind) {
  const auto mm = png::read_gray16(path);
  DepthMap depth(mm.height(), mm.width(), kind);
  for (std::size_t i = 0; i < mm.size(); ++i) {
    depth.values.data()[i] = mm.data()[i] / 1000.0;
  }
  return depth;
}

inline Grid<std::uint16_t> depth_to_millimetres(const DepthMap& depth) {
  Grid<std::uint16_t> mm(depth.height(), depth.width(), 1);
  for (std::size_t i = 0; i < mm.size(); ++i) {
    const double d = depth.values.data()[i];
    const double v = d > 0.0 ? std::clamp(std::round(d * 1000.0), 1.0, 65535.0)
                             : 0.0;
    mm.data()[i] = static_cast<std::uint16_t>(v);
  }
  return mm;
}

inline void save_depth_png(const std::filesystem::path& path,
                           const DepthMap& depth) {
  png::write_gray16(path, depth_to_millimetres(depth));
}

}  // namespace tomd
