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

// Forward and backward kernels over HWC feature maps. Backward functions
// accumulate (+=) into gradient buffers so that branches can share them.

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "tomd/error.hpp"
#include "tomd/grid.hpp"

namespace tomd::nn {

template <typename T>
using FeatureMap = Grid<T>;

/// Flat parameter tensor with an explicit shape.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s, T fill = T{})
      : shape(std::move(s)),
        data(static_cast<std::size_t>(std::accumulate(
                 shape.begin(), shape.end(), 1, std::multiplies<>())),
             fill) {}

  std::size_t size() const noexcept { return data.size(); }
  T& operator[](std::size_t i) noexcept { return data[i]; }
  const T& operator[](std::size_t i) const noexcept { return data[i]; }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.assign(data.begin(), data.end());
    return out;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// Square convolution hyper-parameters; padding keeps "same" size at
/// stride 1.
struct ConvGeometry {
  int kernel = 1;
  int stride = 1;
  int dilation = 1;

  int padding() const noexcept { return dilation * (kernel - 1) / 2; }
  int output_size(int input) const noexcept {
    return (input + 2 * padding() - dilation * (kernel - 1) - 1) / stride + 1;
  }
};

/// Weight layout [out][ky][kx][in]; bias [out].
template <typename T>
FeatureMap<T> conv2d(const FeatureMap<T>& in, const Tensor<T>& w,
                     const Tensor<T>& b, ConvGeometry g) {
  const int cout = w.shape[0];
  const int k = g.kernel;
  const int cin = in.channels();
  require(w.shape.size() == 4 && w.shape[1] == k && w.shape[2] == k &&
              w.shape[3] == cin && b.size() == static_cast<std::size_t>(cout),
          ErrorCode::kShapeMismatch,
          "conv weight does not match input " + shape_string(in));
  const int ho = g.output_size(in.height());
  const int wo = g.output_size(in.width());
  const int pad = g.padding();
  FeatureMap<T> out(ho, wo, cout);
  for (int oy = 0; oy < ho; ++oy) {
    for (int ox = 0; ox < wo; ++ox) {
      T* o = &out(oy, ox, 0);
      for (int co = 0; co < cout; ++co) o[co] = b[co];
      for (int ky = 0; ky < k; ++ky) {
        const int iy = oy * g.stride - pad + ky * g.dilation;
        if (iy < 0 || iy >= in.height()) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = ox * g.stride - pad + kx * g.dilation;
          if (ix < 0 || ix >= in.width()) continue;
          const T* ip = &in(iy, ix, 0);
          for (int co = 0; co < cout; ++co) {
            const T* wp = &w[((static_cast<std::size_t>(co) * k + ky) * k + kx) * cin];
            T acc = T(0);
            for (int ci = 0; ci < cin; ++ci) acc += ip[ci] * wp[ci];
            o[co] += acc;
          }
        }
      }
    }
  }
  return out;
}

/// Accumulates dL/dw, dL/db and (when `grad_in` is non-null) dL/din.
template <typename T>
void conv2d_backward(const FeatureMap<T>& in, const Tensor<T>& w,
                     ConvGeometry g, const FeatureMap<T>& grad_out,
                     Tensor<T>& grad_w, Tensor<T>& grad_b,
                     FeatureMap<T>* grad_in) {
  const int cout = w.shape[0];
  const int k = g.kernel;
  const int cin = in.channels();
  const int pad = g.padding();
  for (int oy = 0; oy < grad_out.height(); ++oy) {
    for (int ox = 0; ox < grad_out.width(); ++ox) {
      const T* go = &grad_out(oy, ox, 0);
      for (int co = 0; co < cout; ++co) grad_b[co] += go[co];
      for (int ky = 0; ky < k; ++ky) {
        const int iy = oy * g.stride - pad + ky * g.dilation;
        if (iy < 0 || iy >= in.height()) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = ox * g.stride - pad + kx * g.dilation;
          if (ix < 0 || ix >= in.width()) continue;
          const T* ip = &in(iy, ix, 0);
          T* gi = grad_in != nullptr ? &(*grad_in)(iy, ix, 0) : nullptr;
          for (int co = 0; co < cout; ++co) {
            const T gv = go[co];
            if (gv == T(0)) continue;
            const std::size_t base =
                ((static_cast<std::size_t>(co) * k + ky) * k + kx) * cin;
            T* gw = &grad_w[base];
            const T* wp = &w[base];
            for (int ci = 0; ci < cin; ++ci) gw[ci] += gv * ip[ci];
            if (gi != nullptr) {
              for (int ci = 0; ci < cin; ++ci) gi[ci] += gv * wp[ci];
            }
          }
        }
      }
    }
  }
}

template <typename T>
FeatureMap<T> relu(const FeatureMap<T>& in) {
  FeatureMap<T> out = in;
  for (T& v : out.values()) v = std::max(v, T(0));
  return out;
}

/// grad_in += grad_out * [pre > 0]
template <typename T>
void relu_backward(const FeatureMap<T>& pre, const FeatureMap<T>& grad_out,
                   FeatureMap<T>& grad_in) {
  for (std::size_t i = 0; i < pre.size(); ++i) {
    if (pre.data()[i] > T(0)) grad_in.data()[i] += grad_out.data()[i];
  }
}

/// Window [floor(i*n/k), ceil((i+1)*n/k)) of adaptive pooling cell i.
inline std::pair<int, int> adaptive_window(int i, int n, int k) {
  const int begin = (i * n) / k;
  const int end = ((i + 1) * n + k - 1) / k;
  return {begin, end};
}

template <typename T>
FeatureMap<T> adaptive_avg_pool(const FeatureMap<T>& in, int k) {
  require(k >= 1 && k <= std::min(in.height(), in.width()),
          ErrorCode::kKernelTooLarge,
          "pool size " + std::to_string(k) + " exceeds feature map " +
              shape_string(in));
  const int c = in.channels();
  FeatureMap<T> out(k, k, c, T(0));
  for (int i = 0; i < k; ++i) {
    const auto [y0, y1] = adaptive_window(i, in.height(), k);
    for (int j = 0; j < k; ++j) {
      const auto [x0, x1] = adaptive_window(j, in.width(), k);
      T* o = &out(i, j, 0);
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          const T* ip = &in(y, x, 0);
          for (int ch = 0; ch < c; ++ch) o[ch] += ip[ch];
        }
      }
      const T inv = T(1) / static_cast<T>((y1 - y0) * (x1 - x0));
      for (int ch = 0; ch < c; ++ch) o[ch] *= inv;
    }
  }
  return out;
}

template <typename T>
void adaptive_avg_pool_backward(const FeatureMap<T>& grad_out,
                                FeatureMap<T>& grad_in) {
  const int k = grad_out.height();
  const int c = grad_in.channels();
  for (int i = 0; i < k; ++i) {
    const auto [y0, y1] = adaptive_window(i, grad_in.height(), k);
    for (int j = 0; j < k; ++j) {
      const auto [x0, x1] = adaptive_window(j, grad_in.width(), k);
      const T inv = T(1) / static_cast<T>((y1 - y0) * (x1 - x0));
      const T* go = &grad_out(i, j, 0);
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          T* gi = &grad_in(y, x, 0);
          for (int ch = 0; ch < c; ++ch) gi[ch] += go[ch] * inv;
        }
      }
    }
  }
}

/// Depthwise correlation of each channel of `in` with its own k x k filter
/// from `filters` (k x k x C), zero padding (k-1)/2, stride 1.
template <typename T>
FeatureMap<T> dynamic_depthwise_conv(const FeatureMap<T>& in,
                                     const FeatureMap<T>& filters) {
  const int k = filters.height();
  const int c = in.channels();
  require(filters.width() == k && filters.channels() == c && k % 2 == 1,
          ErrorCode::kShapeMismatch,
          "filters " + shape_string(filters) + " vs input " + shape_string(in));
  const int r = k / 2;
  FeatureMap<T> out(in.height(), in.width(), c, T(0));
  for (int y = 0; y < in.height(); ++y) {
    for (int x = 0; x < in.width(); ++x) {
      T* o = &out(y, x, 0);
      for (int a = 0; a < k; ++a) {
        const int iy = y + a - r;
        if (iy < 0 || iy >= in.height()) continue;
        for (int b = 0; b < k; ++b) {
          const int ix = x + b - r;
          if (ix < 0 || ix >= in.width()) continue;
          const T* ip = &in(iy, ix, 0);
          const T* fp = &filters(a, b, 0);
          for (int ch = 0; ch < c; ++ch) o[ch] += ip[ch] * fp[ch];
        }
      }
    }
  }
  return out;
}

template <typename T>
void dynamic_depthwise_conv_backward(const FeatureMap<T>& in,
                                     const FeatureMap<T>& filters,
                                     const FeatureMap<T>& grad_out,
                                     FeatureMap<T>& grad_in,
                                     FeatureMap<T>& grad_filters) {
  const int k = filters.height();
  const int c = in.channels();
  const int r = k / 2;
  for (int y = 0; y < in.height(); ++y) {
    for (int x = 0; x < in.width(); ++x) {
      const T* go = &grad_out(y, x, 0);
      for (int a = 0; a < k; ++a) {
        const int iy = y + a - r;
        if (iy < 0 || iy >= in.height()) continue;
        for (int b = 0; b < k; ++b) {
          const int ix = x + b - r;
          if (ix < 0 || ix >= in.width()) continue;
          const T* ip = &in(iy, ix, 0);
          const T* fp = &filters(a, b, 0);
          T* gi = &grad_in(iy, ix, 0);
          T* gf = &grad_filters(a, b, 0);
          for (int ch = 0; ch < c; ++ch) {
            gi[ch] += go[ch] * fp[ch];
            gf[ch] += go[ch] * ip[ch];
          }
        }
      }
    }
  }
}

/// Source coordinate and weights for half-pixel-centre bilinear resampling.
struct BilinearTap {
  int i0 = 0;
  int i1 = 0;
  double w1 = 0.0;  // weight of i1; i0 gets 1 - w1
};

inline std::vector<BilinearTap> bilinear_taps(int in, int out) {
  std::vector<BilinearTap> taps(out);
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    const double src = std::max((o + 0.5) * scale - 0.5, 0.0);
    const int i0 = std::min(static_cast<int>(src), in - 1);
    const int i1 = std::min(i0 + 1, in - 1);
    taps[o] = {i0, i1, src - i0};
  }
  return taps;
}

template <typename T>
FeatureMap<T> bilinear_resize(const FeatureMap<T>& in, int height, int width) {
  const auto ty = bilinear_taps(in.height(), height);
  const auto tx = bilinear_taps(in.width(), width);
  const int c = in.channels();
  FeatureMap<T> out(height, width, c);
  for (int y = 0; y < height; ++y) {
    const T wy = static_cast<T>(ty[y].w1);
    for (int x = 0; x < width; ++x) {
      const T wx = static_cast<T>(tx[x].w1);
      const T* p00 = &in(ty[y].i0, tx[x].i0, 0);
      const T* p01 = &in(ty[y].i0, tx[x].i1, 0);
      const T* p10 = &in(ty[y].i1, tx[x].i0, 0);
      const T* p11 = &in(ty[y].i1, tx[x].i1, 0);
      T* o = &out(y, x, 0);
      for (int ch = 0; ch < c; ++ch) {
        o[ch] = (T(1) - wy) * ((T(1) - wx) * p00[ch] + wx * p01[ch]) +
                wy * ((T(1) - wx) * p10[ch] + wx * p11[ch]);
      }
    }
  }
  return out;
}

template <typename T>
void bilinear_resize_backward(const FeatureMap<T>& grad_out,
                              FeatureMap<T>& grad_in) {
  const auto ty = bilinear_taps(grad_in.height(), grad_out.height());
  const auto tx = bilinear_taps(grad_in.width(), grad_out.width());
  const int c = grad_in.channels();
  for (int y = 0; y < grad_out.height(); ++y) {
    const T wy = static_cast<T>(ty[y].w1);
    for (int x = 0; x < grad_out.width(); ++x) {
      const T wx = static_cast<T>(tx[x].w1);
      const T* go = &grad_out(y, x, 0);
      T* g00 = &grad_in(ty[y].i0, tx[x].i0, 0);
      T* g01 = &grad_in(ty[y].i0, tx[x].i1, 0);
      T* g10 = &grad_in(ty[y].i1, tx[x].i0, 0);
      T* g11 = &grad_in(ty[y].i1, tx[x].i1, 0);
      for (int ch = 0; ch < c; ++ch) {
        g00[ch] += (T(1) - wy) * (T(1) - wx) * go[ch];
        g01[ch] += (T(1) - wy) * wx * go[ch];
        g10[ch] += wy * (T(1) - wx) * go[ch];
        g11[ch] += wy * wx * go[ch];
      }
    }
  }
}

template <typename T>
FeatureMap<T> concat_channels(const std::vector<FeatureMap<T>>& parts) {
  require(!parts.empty(), ErrorCode::kShapeMismatch, "nothing to concatenate");
  int c = 0;
  for (const auto& p : parts) {
    require(p.same_extent(parts.front()), ErrorCode::kDimensionMismatch,
            "concat extent mismatch");
    c += p.channels();
  }
  FeatureMap<T> out(parts.front().height(), parts.front().width(), c);
  for (std::size_t px = 0; px < out.pixels(); ++px) {
    T* o = out.data() + px * c;
    for (const auto& p : parts) {
      const T* s = p.data() + px * p.channels();
      o = std::copy(s, s + p.channels(), o);
    }
  }
  return out;
}

/// Splits `grad` along channels and accumulates slice i into grads[i].
template <typename T>
void concat_channels_backward(const FeatureMap<T>& grad,
                              std::vector<FeatureMap<T>>& grads) {
  for (std::size_t px = 0; px < grad.pixels(); ++px) {
    const T* g = grad.data() + px * grad.channels();
    for (auto& part : grads) {
      T* d = part.data() + px * part.channels();
      for (int ch = 0; ch < part.channels(); ++ch) d[ch] += *g++;
    }
  }
}

template <typename T>
void add_inplace(FeatureMap<T>& acc, const FeatureMap<T>& other) {
  require(acc.same_shape(other), ErrorCode::kShapeMismatch,
          shape_string(acc) + " + " + shape_string(other));
  for (std::size_t i = 0; i < acc.size(); ++i) acc.data()[i] += other.data()[i];
}

template <typename T>
T sigmoid(T z) {
  return z >= T(0) ? T(1) / (T(1) + std::exp(-z))
                   : std::exp(z) / (T(1) + std::exp(z));
}

/// Numerically stable binary cross-entropy on a logit.
template <typename T>
T bce_with_logit(T z, T target) {
  return std::max(z, T(0)) - z * target + std::log1p(std::exp(-std::abs(z)));
}

}  // namespace tomd::nn
