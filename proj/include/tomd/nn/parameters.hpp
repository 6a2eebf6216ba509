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
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "tomd/error.hpp"
#include "tomd/random.hpp"
#include "tomd/nn/layers.hpp"

namespace tomd::nn {

/// Ordered, named collection of tensors. Insertion order is the
/// serialization order and the order used by every reduction.
template <typename T>
class Parameters {
 public:
  Tensor<T>& add(const std::string& name, std::vector<int> shape) {
    require(!contains(name), ErrorCode::kInvalidArgument,
            "duplicate parameter '" + name + "'");
    index_.emplace(name, tensors_.size());
    names_.push_back(name);
    tensors_.emplace_back(std::move(shape));
    return tensors_.back();
  }

  bool contains(std::string_view name) const {
    return index_.find(name) != index_.end();
  }

  Tensor<T>& at(std::string_view name) {
    return tensors_[lookup(name)];
  }
  const Tensor<T>& at(std::string_view name) const {
    return tensors_[lookup(name)];
  }

  std::size_t count() const noexcept { return tensors_.size(); }
  std::size_t total_size() const noexcept {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
  }

  const std::vector<std::string>& names() const noexcept { return names_; }
  std::vector<Tensor<T>>& tensors() noexcept { return tensors_; }
  const std::vector<Tensor<T>>& tensors() const noexcept { return tensors_; }

  Parameters zeros_like() const {
    Parameters out;
    for (std::size_t i = 0; i < names_.size(); ++i) {
      out.add(names_[i], tensors_[i].shape);
    }
    return out;
  }

  template <typename U>
  Parameters<U> cast() const {
    Parameters<U> out;
    for (std::size_t i = 0; i < names_.size(); ++i) {
      out.add(names_[i], tensors_[i].shape).data.assign(
          tensors_[i].data.begin(), tensors_[i].data.end());
    }
    return out;
  }

  bool same_layout(const Parameters& other) const {
    if (names_ != other.names_) return false;
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
      if (tensors_[i].shape != other.tensors_[i].shape) return false;
    }
    return true;
  }

  /// this += scale * other, element-wise; layouts must match.
  void axpy(T scale, const Parameters& other) {
    require(same_layout(other), ErrorCode::kShapeMismatch,
            "parameter layouts differ");
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
      auto& dst = tensors_[i].data;
      const auto& src = other.tensors_[i].data;
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += scale * src[j];
    }
  }

  friend bool operator==(const Parameters& a, const Parameters& b) {
    return a.names_ == b.names_ && a.tensors_ == b.tensors_;
  }

 private:
  std::size_t lookup(std::string_view name) const {
    const auto it = index_.find(name);
    require(it != index_.end(), ErrorCode::kShapeMismatch,
            "missing parameter '" + std::string(name) + "'");
    return it->second;
  }

  std::vector<std::string> names_;
  std::vector<Tensor<T>> tensors_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

/// Adds "<name>.weight" [out][k][k][in] and "<name>.bias" [out].
template <typename T>
void add_conv(Parameters<T>& p, const std::string& name, int in, int out,
              int kernel = 1) {
  p.add(name + ".weight", {out, kernel, kernel, in});
  p.add(name + ".bias", {out});
}

/// He-normal weights (std = sqrt(2 / fan_in)); biases are zero.
template <typename T>
void he_initialize(Parameters<T>& p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < p.count(); ++i) {
    auto& t = p.tensors()[i];
    if (t.shape.size() != 4) continue;
    const double fan_in =
        static_cast<double>(t.shape[1]) * t.shape[2] * t.shape[3];
    const double stddev = std::sqrt(2.0 / fan_in);
    for (auto& v : t.data) v = static_cast<T>(stddev * standard_normal(rng));
  }
}

template <typename T>
struct ConvRef {
  const Tensor<T>& weight;
  const Tensor<T>& bias;
};

template <typename T>
ConvRef<T> conv_ref(const Parameters<T>& p, const std::string& name) {
  return {p.at(name + ".weight"), p.at(name + ".bias")};
}

template <typename T>
FeatureMap<T> apply_conv(const FeatureMap<T>& in, const Parameters<T>& p,
                         const std::string& name, ConvGeometry g = {}) {
  const auto c = conv_ref(p, name);
  return conv2d(in, c.weight, c.bias, g);
}

template <typename T>
void apply_conv_backward(const FeatureMap<T>& in, const Parameters<T>& p,
                         const std::string& name, ConvGeometry g,
                         const FeatureMap<T>& grad_out, Parameters<T>& grads,
                         FeatureMap<T>* grad_in) {
  conv2d_backward(in, p.at(name + ".weight"), g, grad_out,
                  grads.at(name + ".weight"), grads.at(name + ".bias"),
                  grad_in);
}

}  // namespace tomd::nn
