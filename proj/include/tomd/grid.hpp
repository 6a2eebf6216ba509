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

#include <cassert>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tomd/error.hpp"

namespace tomd {

/// Dense row-major H x W x C container with interleaved channels.
///
/// Used for images, depth maps, masks and network feature maps alike; the
/// element type carries the meaning (uint8 pixels, double meters, ...).
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(int height, int width, int channels = 1, T fill = T{})
      : height_(height),
        width_(width),
        channels_(channels),
        data_(static_cast<std::size_t>(height) * width * channels, fill) {
    require(height >= 0 && width >= 0 && channels >= 0,
            ErrorCode::kInvalidArgument, "negative grid dimension");
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixels() const noexcept {
    return static_cast<std::size_t>(height_) * width_;
  }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(int y, int x, int c = 0) noexcept {
    assert(in_bounds(y, x) && c >= 0 && c < channels_);
    return data_[index(y, x, c)];
  }
  const T& operator()(int y, int x, int c = 0) const noexcept {
    assert(in_bounds(y, x) && c >= 0 && c < channels_);
    return data_[index(y, x, c)];
  }

  bool in_bounds(int y, int x) const noexcept {
    return y >= 0 && y < height_ && x >= 0 && x < width_;
  }

  std::size_t index(int y, int x, int c = 0) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }

  bool same_shape(const Grid& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ &&
           channels_ == other.channels_;
  }
  template <typename U>
  bool same_extent(const Grid<U>& other) const noexcept {
    return height_ == other.height() && width_ == other.width();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<T> data_;
};

/// 8-bit RGB image, channels = 3.
using RgbImage = Grid<std::uint8_t>;
/// Binary mask stored as 0 / 255 (or 0 / 1 in network code), channels = 1.
using Mask = Grid<std::uint8_t>;

inline std::string shape_string(int h, int w, int c) {
  return std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(c);
}

template <typename T>
std::string shape_string(const Grid<T>& g) {
  return shape_string(g.height(), g.width(), g.channels());
}

}  // namespace tomd
