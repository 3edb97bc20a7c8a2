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

// Partial convolution and its mask update.
//
// For every output location p with window W(p):
//
//   x'(p) = W^T (X * M) * sum(1) / sum(M) + b   if sum(M) > 0
//   x'(p) = 0                                   otherwise
//   m'(p) = [sum(M) > 0]
//
// sum(1) = in_c * k * k counts the whole window, padding included. The mask
// is zero-padded, so border windows are scaled up even for a full mask.

#pragma once

#include <memory>
#include <utility>

#include "pcinpaint/kernels.hpp"
#include "pcinpaint/ops.hpp"
#include "pcinpaint/tape.hpp"

namespace pcinpaint {

struct PartialConvLayer {
  Tensor weight;  // (out_c, in_c, k, k)
  Tensor bias;    // (1, out_c, 1, 1)

  int64_t in_channels() const { return weight.shape().c; }
  int64_t out_channels() const { return weight.shape().n; }
  int64_t kernel() const { return weight.shape().h; }
  int64_t padding() const { return (kernel() - 1) / 2; }

  void validate() const {
    const Shape& s = weight.shape();
    if (s.h != s.w || s.h % 2 == 0) {
      throw ShapeError("partial conv kernel must be square and odd, got " + s.str());
    }
    if (bias.shape() != Shape{1, s.n, 1, 1}) {
      throw ShapeError("partial conv bias must be (1," + std::to_string(s.n) + ",1,1), got " +
                       bias.shape().str());
    }
    if (!weight.all_finite() || !bias.all_finite()) {
      throw std::domain_error("partial conv parameters must be finite");
    }
  }
};

namespace detail {

inline void check_pconv_inputs(const Shape& x, const Tensor& mask, int64_t in_c) {
  const Shape& m = mask.shape();
  if (x.c != in_c) {
    throw ShapeError("partial conv: input has " + std::to_string(x.c) +
                     " channels, layer expects " + std::to_string(in_c));
  }
  if (m.n != x.n || m.h != x.h || m.w != x.w || (m.c != 1 && m.c != x.c)) {
    throw ShapeError("partial conv: mask " + m.str() + " incompatible with input " + x.str());
  }
  if (!is_binary(mask)) throw std::invalid_argument("partial conv: mask values must be 0 or 1");
}

// Number of valid taps per output location, summed over channels.
inline Tensor valid_tap_count(const Tensor& mask, int64_t in_c, int64_t k) {
  const Shape& s = mask.shape();
  Tensor per_pixel({s.n, 1, s.h, s.w});
  const float scale = s.c == 1 ? static_cast<float>(in_c) : 1.0f;
  for (int64_t n = 0; n < s.n; ++n) {
    float* q = per_pixel.plane(n, 0);
    for (int64_t c = 0; c < s.c; ++c) {
      const float* p = mask.plane(n, c);
      for (int64_t i = 0; i < s.plane(); ++i) q[i] += p[i];
    }
    for (int64_t i = 0; i < s.plane(); ++i) q[i] *= scale;
  }
  return kernels::box_sum(per_pixel, k);
}

}  // namespace detail

struct PartialConvOutput {
  Var features;
  Tensor mask;  // (n, 1, h, w)
};

/// Partial convolution on the tape. The mask is treated as a constant: no
/// gradient flows into it. `mask` has one channel (broadcast) or in_c channels.
inline PartialConvOutput pconv_forward(const Var& x, const Tensor& mask, const Var& weight,
                                       const Var& bias) {
  const Shape& ws = weight.shape();
  if (ws.h != ws.w || ws.h % 2 == 0) throw ShapeError("partial conv kernel must be odd, got " + ws.str());
  detail::check_pconv_inputs(x.shape(), mask, ws.c);
  const int64_t k = ws.h;
  const int64_t out_c = ws.n;
  const Shape xs = x.shape();
  GradTape& tape = x.tape();

  Var masked = ops::mul(x, tape.constant(expand_channels(mask, xs.c)));
  Var raw = ops::conv2d(masked, weight, std::nullopt, (k - 1) / 2);

  const Tensor count = detail::valid_tap_count(mask, xs.c, k);
  const float window = static_cast<float>(xs.c * k * k);
  auto ratio = std::make_shared<Tensor>(count.shape());
  Tensor new_mask(count.shape());
  for (int64_t i = 0; i < count.numel(); ++i) {
    const bool any = count[i] > 0.0f;
    (*ratio)[i] = any ? window / count[i] : 0.0f;
    new_mask[i] = any ? 1.0f : 0.0f;
  }

  const Tensor& rv = raw.value();
  const Tensor& bv = bias.value();
  Tensor out(rv.shape());
  for (int64_t n = 0; n < xs.n; ++n) {
    const float* r = ratio->plane(n, 0);
    const float* valid = new_mask.plane(n, 0);
    for (int64_t o = 0; o < out_c; ++o) {
      const float* p = rv.plane(n, o);
      float* q = out.plane(n, o);
      const float b = bv[o];
      for (int64_t i = 0; i < xs.plane(); ++i) q[i] = valid[i] != 0.0f ? p[i] * r[i] + b : 0.0f;
    }
  }
  auto valid_map = std::make_shared<Tensor>(new_mask);
  Var features = tape.record(
      std::move(out), {raw, bias}, [raw, bias, ratio, valid_map](GradTape& t, const Tensor& g) {
        const Shape& s = g.shape();
        if (t.requires_grad(raw)) {
          Tensor& d = t.grad(raw);
          for (int64_t n = 0; n < s.n; ++n) {
            const float* r = ratio->plane(n, 0);
            for (int64_t o = 0; o < s.c; ++o) {
              const float* gp = g.plane(n, o);
              float* dp = d.plane(n, o);
              for (int64_t i = 0; i < s.plane(); ++i) dp[i] += gp[i] * r[i];
            }
          }
        }
        if (t.requires_grad(bias)) {
          Tensor db(bias.shape());
          for (int64_t o = 0; o < s.c; ++o) {
            double acc = 0.0;
            for (int64_t n = 0; n < s.n; ++n) {
              const float* gp = g.plane(n, o);
              const float* v = valid_map->plane(n, 0);
              for (int64_t i = 0; i < s.plane(); ++i) acc += v[i] != 0.0f ? gp[i] : 0.0f;
            }
            db[o] = static_cast<float>(acc);
          }
          t.accumulate(bias, db);
        }
      });
  return {features, std::move(new_mask)};
}

/// Tape-free convenience form.
inline std::pair<Tensor, Tensor> pconv_forward(const Tensor& x, const Tensor& mask,
                                               const PartialConvLayer& layer) {
  layer.validate();
  GradTape tape;
  auto out = pconv_forward(tape.constant(x), mask, tape.constant(layer.weight),
                           tape.constant(layer.bias));
  return {out.features.value(), std::move(out.mask)};
}

/// Literal per-window evaluation of the partial convolution, in double,
/// sharing no code with the tensor kernels. Used as a correctness oracle.
inline std::pair<Tensor, Tensor> pconv_oracle(const Tensor& x, const Tensor& mask,
                                              const PartialConvLayer& layer) {
  layer.validate();
  const Shape& xs = x.shape();
  detail::check_pconv_inputs(xs, mask, layer.in_channels());
  const int64_t k = layer.kernel();
  const int64_t pad = layer.padding();
  const int64_t out_c = layer.out_channels();
  const bool broadcast = mask.shape().c == 1;
  const double window = static_cast<double>(xs.c * k * k);
  Tensor out({xs.n, out_c, xs.h, xs.w});
  Tensor new_mask({xs.n, 1, xs.h, xs.w});
  for (int64_t n = 0; n < xs.n; ++n) {
    for (int64_t y = 0; y < xs.h; ++y) {
      for (int64_t xx = 0; xx < xs.w; ++xx) {
        double valid = 0.0;
        for (int64_t c = 0; c < xs.c; ++c) {
          for (int64_t ky = 0; ky < k; ++ky) {
            for (int64_t kx = 0; kx < k; ++kx) {
              const int64_t iy = y + ky - pad, ix = xx + kx - pad;
              if (iy < 0 || iy >= xs.h || ix < 0 || ix >= xs.w) continue;
              valid += mask.at(n, broadcast ? 0 : c, iy, ix);
            }
          }
        }
        new_mask.at(n, 0, y, xx) = valid > 0.0 ? 1.0f : 0.0f;
        for (int64_t o = 0; o < out_c; ++o) {
          if (valid == 0.0) {
            out.at(n, o, y, xx) = 0.0f;
            continue;
          }
          double acc = 0.0;
          for (int64_t c = 0; c < xs.c; ++c) {
            for (int64_t ky = 0; ky < k; ++ky) {
              for (int64_t kx = 0; kx < k; ++kx) {
                const int64_t iy = y + ky - pad, ix = xx + kx - pad;
                if (iy < 0 || iy >= xs.h || ix < 0 || ix >= xs.w) continue;
                const double m = mask.at(n, broadcast ? 0 : c, iy, ix);
                acc += static_cast<double>(layer.weight.at(o, c, ky, kx)) * x.at(n, c, iy, ix) * m;
              }
            }
          }
          out.at(n, o, y, xx) = static_cast<float>(acc * window / valid + layer.bias[o]);
        }
      }
    }
  }
  return {std::move(out), std::move(new_mask)};
}

/// Mask update alone: m'(p) = 1 iff any mask entry in the k x k window
/// centred at p is 1 (binary dilation by the kernel footprint).
inline Tensor mask_update(const Tensor& mask, int64_t k) {
  if (k < 1 || k % 2 == 0) throw ShapeError("mask_update: kernel must be odd and positive");
  if (!is_binary(mask)) throw std::invalid_argument("mask_update: mask values must be 0 or 1");
  Tensor count = detail::valid_tap_count(mask, 1, k);
  for (auto& v : count.data()) v = v > 0.0f ? 1.0f : 0.0f;
  return count;
}

// Any-valid 2x2 pooling of a binary mask.
inline Tensor pool_mask(const Tensor& mask) { return kernels::maxpool2(mask).out; }

inline Tensor upsample_mask(const Tensor& mask) {
  return kernels::upsample2(mask, kernels::UpsampleMode::kNearest);
}

}  // namespace pcinpaint
