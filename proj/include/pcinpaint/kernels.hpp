// Copyright 2026 The pcinpaint Authors.
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

// Forward and backward kernels on raw tensors. No graph bookkeeping here;
// the autodiff layer in tape.hpp wires these together.

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "pcinpaint/tensor.hpp"

namespace pcinpaint::kernels {

using RowMatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using StridedMap = Eigen::Map<RowMatrixF, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const RowMatrixF, 0, Eigen::OuterStride<>>;

// Upper bound on im2col scratch, in floats (32 MiB).
inline constexpr int64_t kIm2colBudget = int64_t{8} << 20;

struct ConvGeometry {
  int64_t in_c, out_c, k, pad;
  int64_t h, w;    // input
  int64_t oh, ow;  // output
  int64_t patch() const { return in_c * k * k; }
};

inline ConvGeometry conv_geometry(const Shape& x, const Shape& weight, int64_t pad) {
  if (weight.h != weight.w) throw ShapeError("conv2d: kernel must be square, got " + weight.str());
  if (x.c != weight.c) {
    throw ShapeError("conv2d: input has " + std::to_string(x.c) + " channels but weight expects " +
                     std::to_string(weight.c) + " (weight " + weight.str() + ")");
  }
  if (pad < 0) throw ShapeError("conv2d: negative padding");
  ConvGeometry g{x.c, weight.n, weight.h, pad, x.h, x.w, x.h + 2 * pad - weight.h + 1,
                 x.w + 2 * pad - weight.w + 1};
  if (g.oh <= 0 || g.ow <= 0) throw ShapeError("conv2d: kernel larger than padded input");
  return g;
}

inline int64_t rows_per_chunk(const ConvGeometry& g) {
  const int64_t per_row = g.patch() * g.ow;
  return std::clamp<int64_t>(kIm2colBudget / std::max<int64_t>(per_row, 1), 1, g.oh);
}

// Fills cols (patch x (rows * ow)) for output rows [r0, r0 + rows).
inline void im2col(const float* img, const ConvGeometry& g, int64_t r0, int64_t rows, float* cols) {
  const int64_t npix = rows * g.ow;
  for (int64_t ci = 0; ci < g.in_c; ++ci) {
    const float* src = img + ci * g.h * g.w;
    for (int64_t ky = 0; ky < g.k; ++ky) {
      for (int64_t kx = 0; kx < g.k; ++kx) {
        float* dst = cols + ((ci * g.k + ky) * g.k + kx) * npix;
        const int64_t x_lo = std::max<int64_t>(0, g.pad - kx);
        const int64_t x_hi = std::min<int64_t>(g.ow, g.w + g.pad - kx);
        for (int64_t r = 0; r < rows; ++r) {
          float* row = dst + r * g.ow;
          const int64_t iy = r0 + r + ky - g.pad;
          if (iy < 0 || iy >= g.h || x_lo >= x_hi) {
            std::fill_n(row, g.ow, 0.0f);
            continue;
          }
          std::fill_n(row, x_lo, 0.0f);
          std::memcpy(row + x_lo, src + iy * g.w + (x_lo + kx - g.pad),
                      sizeof(float) * static_cast<size_t>(x_hi - x_lo));
          std::fill(row + x_hi, row + g.ow, 0.0f);
        }
      }
    }
  }
}

// Scatter-adds cols back into an image gradient.
inline void col2im(const float* cols, const ConvGeometry& g, int64_t r0, int64_t rows, float* img) {
  const int64_t npix = rows * g.ow;
  for (int64_t ci = 0; ci < g.in_c; ++ci) {
    float* dst = img + ci * g.h * g.w;
    for (int64_t ky = 0; ky < g.k; ++ky) {
      for (int64_t kx = 0; kx < g.k; ++kx) {
        const float* src = cols + ((ci * g.k + ky) * g.k + kx) * npix;
        const int64_t x_lo = std::max<int64_t>(0, g.pad - kx);
        const int64_t x_hi = std::min<int64_t>(g.ow, g.w + g.pad - kx);
        for (int64_t r = 0; r < rows; ++r) {
          const int64_t iy = r0 + r + ky - g.pad;
          if (iy < 0 || iy >= g.h) continue;
          const float* row = src + r * g.ow;
          float* out = dst + iy * g.w + (kx - g.pad);
          for (int64_t ox = x_lo; ox < x_hi; ++ox) out[ox] += row[ox];
        }
      }
    }
  }
}

/// Stride-1 zero-padded convolution. `bias` may be empty (no bias).
inline Tensor conv2d(const Tensor& x, const Tensor& weight, std::span<const float> bias, int64_t pad) {
  const ConvGeometry g = conv_geometry(x.shape(), weight.shape(), pad);
  if (!bias.empty() && static_cast<int64_t>(bias.size()) != g.out_c) {
    throw ShapeError("conv2d: bias length " + std::to_string(bias.size()) + " != out channels " +
                     std::to_string(g.out_c));
  }
  const int64_t batch = x.shape().n;
  Tensor out({batch, g.out_c, g.oh, g.ow});
  const int64_t chunk = rows_per_chunk(g);
  std::vector<float> cols(static_cast<size_t>(g.patch() * chunk * g.ow));
  Eigen::Map<const RowMatrixF> wmat(weight.ptr(), g.out_c, g.patch());
  for (int64_t n = 0; n < batch; ++n) {
    const float* img = x.plane(n, 0);
    for (int64_t r0 = 0; r0 < g.oh; r0 += chunk) {
      const int64_t rows = std::min(chunk, g.oh - r0);
      const int64_t npix = rows * g.ow;
      im2col(img, g, r0, rows, cols.data());
      Eigen::Map<const RowMatrixF> cmat(cols.data(), g.patch(), npix);
      StridedMap omat(out.plane(n, 0) + r0 * g.ow, g.out_c, npix,
                      Eigen::OuterStride<>(g.oh * g.ow));
      omat.noalias() = wmat * cmat;
    }
    if (!bias.empty()) {
      for (int64_t o = 0; o < g.out_c; ++o) {
        float* p = out.plane(n, o);
        const float b = bias[static_cast<size_t>(o)];
        for (int64_t i = 0; i < g.oh * g.ow; ++i) p[i] = p[i] + b;
      }
    }
  }
  return out;
}

/// Gradients of conv2d. Any of dx / dweight / dbias may be null; results are
/// accumulated into them.
inline void conv2d_backward(const Tensor& x, const Tensor& weight, int64_t pad, const Tensor& dy,
                            Tensor* dx, Tensor* dweight, std::vector<float>* dbias) {
  const ConvGeometry g = conv_geometry(x.shape(), weight.shape(), pad);
  const int64_t batch = x.shape().n;
  if (dy.shape() != Shape{batch, g.out_c, g.oh, g.ow}) {
    throw ShapeError("conv2d_backward: gradient shape " + dy.shape().str());
  }
  const int64_t chunk = rows_per_chunk(g);
  std::vector<float> cols(static_cast<size_t>(g.patch() * chunk * g.ow));
  Eigen::Map<const RowMatrixF> wmat(weight.ptr(), g.out_c, g.patch());
  RowMatrixF dw_acc;
  if (dweight) dw_acc = RowMatrixF::Zero(g.out_c, g.patch());
  for (int64_t n = 0; n < batch; ++n) {
    for (int64_t r0 = 0; r0 < g.oh; r0 += chunk) {
      const int64_t rows = std::min(chunk, g.oh - r0);
      const int64_t npix = rows * g.ow;
      ConstStridedMap dymat(dy.plane(n, 0) + r0 * g.ow, g.out_c, npix,
                            Eigen::OuterStride<>(g.oh * g.ow));
      if (dweight) {
        im2col(x.plane(n, 0), g, r0, rows, cols.data());
        Eigen::Map<const RowMatrixF> cmat(cols.data(), g.patch(), npix);
        dw_acc.noalias() += dymat * cmat.transpose();
      }
      if (dx) {
        Eigen::Map<RowMatrixF> cmat(cols.data(), g.patch(), npix);
        cmat.noalias() = wmat.transpose() * dymat;
        col2im(cols.data(), g, r0, rows, dx->plane(n, 0));
      }
    }
  }
  if (dweight) {
    float* dw = dweight->ptr();
    for (int64_t i = 0; i < dweight->numel(); ++i) dw[i] += dw_acc.data()[i];
  }
  if (dbias) {
    for (int64_t o = 0; o < g.out_c; ++o) {
      double s = 0.0;
      for (int64_t n = 0; n < batch; ++n) {
        s += sum_f64(std::span<const float>(dy.plane(n, o), static_cast<size_t>(g.oh * g.ow)));
      }
      (*dbias)[static_cast<size_t>(o)] += static_cast<float>(s);
    }
  }
}

struct PoolResult {
  Tensor out;
  std::vector<int32_t> argmax;  // flat index into the input plane per output element
};

inline PoolResult maxpool2(const Tensor& x) {
  const Shape& s = x.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) {
    throw ShapeError("maxpool2: spatial dims must be even, got " + s.str());
  }
  const int64_t oh = s.h / 2, ow = s.w / 2;
  PoolResult r{Tensor({s.n, s.c, oh, ow}), std::vector<int32_t>(static_cast<size_t>(s.n * s.c * oh * ow))};
  int64_t o = 0;
  for (int64_t n = 0; n < s.n; ++n) {
    for (int64_t c = 0; c < s.c; ++c) {
      const float* p = x.plane(n, c);
      float* q = r.out.plane(n, c);
      for (int64_t y = 0; y < oh; ++y) {
        for (int64_t xx = 0; xx < ow; ++xx, ++o) {
          int64_t best = (2 * y) * s.w + 2 * xx;
          for (int64_t idx : {best + 1, best + s.w, best + s.w + 1}) {
            if (p[idx] > p[best]) best = idx;
          }
          q[y * ow + xx] = p[best];
          r.argmax[static_cast<size_t>(o)] = static_cast<int32_t>(best);
        }
      }
    }
  }
  return r;
}

inline void maxpool2_backward(const Shape& in, std::span<const int32_t> argmax, const Tensor& dy,
                              Tensor& dx) {
  const int64_t per = dy.shape().h * dy.shape().w;
  int64_t o = 0;
  for (int64_t n = 0; n < in.n; ++n) {
    for (int64_t c = 0; c < in.c; ++c) {
      float* g = dx.plane(n, c);
      const float* d = dy.plane(n, c);
      for (int64_t i = 0; i < per; ++i, ++o) g[argmax[static_cast<size_t>(o)]] += d[i];
    }
  }
}

enum class UpsampleMode { kBilinear, kNearest };

// Source taps for one output coordinate of a x2 bilinear resize,
// align_corners = false.
struct LinearTap {
  int64_t i0, i1;
  float w0, w1;
};

inline std::vector<LinearTap> bilinear_taps(int64_t in_size) {
  std::vector<LinearTap> taps(static_cast<size_t>(2 * in_size));
  for (int64_t i = 0; i < 2 * in_size; ++i) {
    double src = (static_cast<double>(i) + 0.5) / 2.0 - 0.5;
    if (src < 0.0) src = 0.0;
    int64_t i0 = static_cast<int64_t>(src);
    if (i0 > in_size - 1) i0 = in_size - 1;
    const int64_t i1 = std::min(i0 + 1, in_size - 1);
    const float l = static_cast<float>(src - static_cast<double>(i0));
    taps[static_cast<size_t>(i)] = {i0, i1, 1.0f - l, l};
  }
  return taps;
}

inline Tensor upsample2(const Tensor& x, UpsampleMode mode) {
  const Shape& s = x.shape();
  Tensor out({s.n, s.c, 2 * s.h, 2 * s.w});
  const int64_t ow = 2 * s.w;
  if (mode == UpsampleMode::kNearest) {
    for (int64_t n = 0; n < s.n; ++n) {
      for (int64_t c = 0; c < s.c; ++c) {
        const float* p = x.plane(n, c);
        float* q = out.plane(n, c);
        for (int64_t y = 0; y < 2 * s.h; ++y) {
          for (int64_t xx = 0; xx < ow; ++xx) q[y * ow + xx] = p[(y / 2) * s.w + xx / 2];
        }
      }
    }
    return out;
  }
  const auto ty = bilinear_taps(s.h);
  const auto tx = bilinear_taps(s.w);
  for (int64_t n = 0; n < s.n; ++n) {
    for (int64_t c = 0; c < s.c; ++c) {
      const float* p = x.plane(n, c);
      float* q = out.plane(n, c);
      for (int64_t y = 0; y < 2 * s.h; ++y) {
        const LinearTap& a = ty[static_cast<size_t>(y)];
        const float* r0 = p + a.i0 * s.w;
        const float* r1 = p + a.i1 * s.w;
        for (int64_t xx = 0; xx < ow; ++xx) {
          const LinearTap& b = tx[static_cast<size_t>(xx)];
          const float top = b.w0 * r0[b.i0] + b.w1 * r0[b.i1];
          const float bot = b.w0 * r1[b.i0] + b.w1 * r1[b.i1];
          q[y * ow + xx] = a.w0 * top + a.w1 * bot;
        }
      }
    }
  }
  return out;
}

inline void upsample2_backward(const Tensor& dy, UpsampleMode mode, Tensor& dx) {
  const Shape& s = dx.shape();
  const int64_t ow = 2 * s.w;
  if (mode == UpsampleMode::kNearest) {
    for (int64_t n = 0; n < s.n; ++n) {
      for (int64_t c = 0; c < s.c; ++c) {
        const float* d = dy.plane(n, c);
        float* g = dx.plane(n, c);
        for (int64_t y = 0; y < 2 * s.h; ++y) {
          for (int64_t xx = 0; xx < ow; ++xx) g[(y / 2) * s.w + xx / 2] += d[y * ow + xx];
        }
      }
    }
    return;
  }
  const auto ty = bilinear_taps(s.h);
  const auto tx = bilinear_taps(s.w);
  for (int64_t n = 0; n < s.n; ++n) {
    for (int64_t c = 0; c < s.c; ++c) {
      const float* d = dy.plane(n, c);
      float* g = dx.plane(n, c);
      for (int64_t y = 0; y < 2 * s.h; ++y) {
        const LinearTap& a = ty[static_cast<size_t>(y)];
        float* r0 = g + a.i0 * s.w;
        float* r1 = g + a.i1 * s.w;
        for (int64_t xx = 0; xx < ow; ++xx) {
          const LinearTap& b = tx[static_cast<size_t>(xx)];
          const float v = d[y * ow + xx];
          r0[b.i0] += a.w0 * b.w0 * v;
          r0[b.i1] += a.w0 * b.w1 * v;
          r1[b.i0] += a.w1 * b.w0 * v;
          r1[b.i1] += a.w1 * b.w1 * v;
        }
      }
    }
  }
}

// k x k window sum of a (n,1,h,w) map with zero padding, same-size output.
inline Tensor box_sum(const Tensor& x, int64_t k) {
  const Shape& s = x.shape();
  const int64_t r = k / 2;
  Tensor tmp(s), out(s);
  for (int64_t n = 0; n < s.n; ++n) {
    for (int64_t c = 0; c < s.c; ++c) {
      const float* p = x.plane(n, c);
      float* t = tmp.plane(n, c);
      for (int64_t y = 0; y < s.h; ++y) {
        for (int64_t xx = 0; xx < s.w; ++xx) {
          float acc = 0.0f;
          for (int64_t dx = std::max<int64_t>(0, xx - r); dx <= std::min(s.w - 1, xx + r); ++dx) {
            acc += p[y * s.w + dx];
          }
          t[y * s.w + xx] = acc;
        }
      }
      float* q = out.plane(n, c);
      for (int64_t y = 0; y < s.h; ++y) {
        for (int64_t xx = 0; xx < s.w; ++xx) {
          float acc = 0.0f;
          for (int64_t dy = std::max<int64_t>(0, y - r); dy <= std::min(s.h - 1, y + r); ++dy) {
            acc += t[dy * s.w + xx];
          }
          q[y * s.w + xx] = acc;
        }
      }
    }
  }
  return out;
}

}  // namespace pcinpaint::kernels
