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

// Differentiable operations recorded on a GradTape.

#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "pcinpaint/kernels.hpp"
#include "pcinpaint/tape.hpp"

namespace pcinpaint::ops {

namespace detail {

inline GradTape& tape_of(const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw std::invalid_argument("operands live on different tapes");
  return a.tape();
}

template <typename F>
Tensor map(const Tensor& x, F f) {
  Tensor out(x.shape());
  const float* p = x.ptr();
  float* q = out.ptr();
  for (int64_t i = 0; i < x.numel(); ++i) q[i] = f(p[i]);
  return out;
}

template <typename F>
Tensor zip(const Tensor& a, const Tensor& b, F f) {
  Tensor out(a.shape());
  const float* p = a.ptr();
  const float* r = b.ptr();
  float* q = out.ptr();
  for (int64_t i = 0; i < a.numel(); ++i) q[i] = f(p[i], r[i]);
  return out;
}

}  // namespace detail

inline Var conv2d(const Var& x, const Var& weight, std::optional<Var> bias, int64_t pad) {
  GradTape& tape = detail::tape_of(x, weight);
  std::span<const float> b;
  if (bias) {
    const Tensor& bv = bias->value();
    if (bv.shape() != Shape{1, weight.shape().n, 1, 1}) {
      throw ShapeError("conv2d: bias must have shape (1,out_c,1,1), got " + bv.shape().str());
    }
    b = bv.data();
  }
  Tensor y = kernels::conv2d(x.value(), weight.value(), b, pad);
  return tape.record(std::move(y), {x, weight, bias.value_or(weight)},
                     [x, weight, bias, pad](GradTape& t, const Tensor& g) {
                       const bool need_x = t.requires_grad(x);
                       const bool need_w = t.requires_grad(weight);
                       const bool need_b = bias && t.requires_grad(*bias);
                       std::vector<float> db;
                       if (need_b) db.assign(static_cast<size_t>(weight.shape().n), 0.0f);
                       kernels::conv2d_backward(x.value(), weight.value(), pad, g,
                                                need_x ? &t.grad(x) : nullptr,
                                                need_w ? &t.grad(weight) : nullptr,
                                                need_b ? &db : nullptr);
                       if (need_b) t.accumulate(*bias, Tensor(bias->shape(), std::move(db)));
                     });
}

inline Var maxpool2(const Var& x) {
  auto pooled = kernels::maxpool2(x.value());
  auto argmax = std::make_shared<std::vector<int32_t>>(std::move(pooled.argmax));
  return x.tape().record(std::move(pooled.out), {x}, [x, argmax](GradTape& t, const Tensor& g) {
    kernels::maxpool2_backward(x.shape(), *argmax, g, t.grad(x));
  });
}

inline Var upsample2(const Var& x, kernels::UpsampleMode mode) {
  return x.tape().record(kernels::upsample2(x.value(), mode), {x},
                         [x, mode](GradTape& t, const Tensor& g) {
                           kernels::upsample2_backward(g, mode, t.grad(x));
                         });
}

inline Var add(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "add");
  return detail::tape_of(a, b).record(
      detail::zip(a.value(), b.value(), [](float p, float q) { return p + q; }), {a, b},
      [a, b](GradTape& t, const Tensor& g) {
        t.accumulate(a, g);
        t.accumulate(b, g);
      });
}

inline Var sub(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "sub");
  return detail::tape_of(a, b).record(
      detail::zip(a.value(), b.value(), [](float p, float q) { return p - q; }), {a, b},
      [a, b](GradTape& t, const Tensor& g) {
        t.accumulate(a, g);
        if (t.requires_grad(b)) t.accumulate(b, detail::map(g, [](float v) { return -v; }));
      });
}

// Hadamard product.
inline Var mul(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "mul");
  return detail::tape_of(a, b).record(
      detail::zip(a.value(), b.value(), [](float p, float q) { return p * q; }), {a, b},
      [a, b](GradTape& t, const Tensor& g) {
        auto times = [](float p, float q) { return p * q; };
        if (t.requires_grad(a)) t.accumulate(a, detail::zip(g, b.value(), times));
        if (t.requires_grad(b)) t.accumulate(b, detail::zip(g, a.value(), times));
      });
}

inline Var scalar_mul(const Var& x, float s) {
  return x.tape().record(detail::map(x.value(), [s](float v) { return v * s; }), {x},
                         [x, s](GradTape& t, const Tensor& g) {
                           t.accumulate(x, detail::map(g, [s](float v) { return v * s; }));
                         });
}

// Sum of all entries as a (1,1,1,1) scalar; accumulated in double.
inline Var sum(const Var& x) {
  return x.tape().record(Tensor::scalar(static_cast<float>(sum_f64(x.value().data()))), {x},
                         [x](GradTape& t, const Tensor& g) {
                           t.accumulate(x, Tensor(x.shape(), g.item()));
                         });
}

inline Var abs_sum(const Var& x) {
  double s = 0.0;
  for (float v : x.value().data()) s += std::abs(v);
  return x.tape().record(Tensor::scalar(static_cast<float>(s)), {x},
                         [x](GradTape& t, const Tensor& g) {
                           const float gv = g.item();
                           t.accumulate(x, detail::map(x.value(), [gv](float v) {
                                          return v > 0.0f ? gv : (v < 0.0f ? -gv : 0.0f);
                                        }));
                         });
}

// Mean absolute entry, abs_sum / numel.
inline Var mean_abs(const Var& x) {
  return scalar_mul(abs_sum(x), 1.0f / static_cast<float>(x.value().numel()));
}

inline Var relu(const Var& x) {
  return x.tape().record(detail::map(x.value(), [](float v) { return v > 0.0f ? v : 0.0f; }), {x},
                         [x](GradTape& t, const Tensor& g) {
                           t.accumulate(x, detail::zip(g, x.value(), [](float d, float v) {
                                          return v > 0.0f ? d : 0.0f;
                                        }));
                         });
}

inline Var leaky_relu(const Var& x, float slope) {
  return x.tape().record(
      detail::map(x.value(), [slope](float v) { return v >= 0.0f ? v : slope * v; }), {x},
      [x, slope](GradTape& t, const Tensor& g) {
        t.accumulate(x, detail::zip(g, x.value(), [slope](float d, float v) {
                       return v >= 0.0f ? d : slope * d;
                     }));
      });
}

inline Var concat_channels(const Var& a, const Var& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    throw ShapeError("concat_channels: incompatible " + sa.str() + " and " + sb.str());
  }
  Tensor out({sa.n, sa.c + sb.c, sa.h, sa.w});
  const int64_t pa = sa.c * sa.plane(), pb = sb.c * sb.plane();
  for (int64_t n = 0; n < sa.n; ++n) {
    std::copy_n(a.value().ptr() + n * pa, pa, out.ptr() + n * (pa + pb));
    std::copy_n(b.value().ptr() + n * pb, pb, out.ptr() + n * (pa + pb) + pa);
  }
  return detail::tape_of(a, b).record(
      std::move(out), {a, b}, [a, b, pa, pb](GradTape& t, const Tensor& g) {
        const int64_t batch = a.shape().n;
        if (t.requires_grad(a)) {
          float* d = t.grad(a).ptr();
          for (int64_t n = 0; n < batch; ++n) {
            const float* s = g.ptr() + n * (pa + pb);
            for (int64_t i = 0; i < pa; ++i) d[n * pa + i] += s[i];
          }
        }
        if (t.requires_grad(b)) {
          float* d = t.grad(b).ptr();
          for (int64_t n = 0; n < batch; ++n) {
            const float* s = g.ptr() + n * (pa + pb) + pa;
            for (int64_t i = 0; i < pb; ++i) d[n * pb + i] += s[i];
          }
        }
      });
}

// Matrix product of (1,1,m,k) and (1,1,k,n) tensors, accumulated in double.
inline Var matmul(const Var& a, const Var& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.n != 1 || sa.c != 1 || sb.n != 1 || sb.c != 1 || sa.w != sb.h) {
    throw ShapeError("matmul: expected (1,1,m,k) x (1,1,k,n), got " + sa.str() + " x " + sb.str());
  }
  using kernels::RowMatrixF;
  auto as_mat = [](const Tensor& t) {
    return Eigen::Map<const RowMatrixF>(t.ptr(), t.shape().h, t.shape().w).cast<double>().eval();
  };
  Tensor out({1, 1, sa.h, sb.w});
  Eigen::Map<RowMatrixF>(out.ptr(), sa.h, sb.w) = (as_mat(a.value()) * as_mat(b.value())).cast<float>();
  return detail::tape_of(a, b).record(std::move(out), {a, b}, [a, b, as_mat](GradTape& t, const Tensor& g) {
    const auto gm = as_mat(g);
    if (t.requires_grad(a)) {
      Tensor da(a.shape());
      Eigen::Map<RowMatrixF>(da.ptr(), a.shape().h, a.shape().w) =
          (gm * as_mat(b.value()).transpose()).cast<float>();
      t.accumulate(a, da);
    }
    if (t.requires_grad(b)) {
      Tensor db(b.shape());
      Eigen::Map<RowMatrixF>(db.ptr(), b.shape().h, b.shape().w) =
          (as_mat(a.value()).transpose() * gm).cast<float>();
      t.accumulate(b, db);
    }
  });
}

/// Per-sample channel Gram matrix: features (n,C,h,w) -> (n,1,C,C) with
/// G = F F^T / (C h w), F the C x (h w) reshaping. Accumulated in double.
inline Var gram(const Var& features) {
  const Shape s = features.shape();
  const int64_t hw = s.plane();
  const double k = 1.0 / static_cast<double>(s.c * hw);
  using kernels::RowMatrixF;
  Tensor out({s.n, 1, s.c, s.c});
  for (int64_t n = 0; n < s.n; ++n) {
    const auto f = Eigen::Map<const RowMatrixF>(features.value().plane(n, 0), s.c, hw).cast<double>().eval();
    Eigen::Map<RowMatrixF>(out.plane(n, 0), s.c, s.c) = (k * (f * f.transpose())).cast<float>();
  }
  return features.tape().record(std::move(out), {features}, [features, s, hw, k](GradTape& t, const Tensor& g) {
    Tensor& d = t.grad(features);
    for (int64_t n = 0; n < s.n; ++n) {
      const auto f = Eigen::Map<const RowMatrixF>(features.value().plane(n, 0), s.c, hw).cast<double>().eval();
      const auto gm = Eigen::Map<const RowMatrixF>(g.plane(n, 0), s.c, s.c).cast<double>().eval();
      Eigen::Map<RowMatrixF> dm(d.plane(n, 0), s.c, hw);
      dm += (k * ((gm + gm.transpose()) * f)).cast<float>();
    }
  });
}

// y[n,c] = x[n,c] * scale[c] + shift[c]; scale/shift are constants.
inline Var channel_affine(const Var& x, std::span<const float> scale, std::span<const float> shift) {
  const Shape& s = x.shape();
  if (static_cast<int64_t>(scale.size()) != s.c || static_cast<int64_t>(shift.size()) != s.c) {
    throw ShapeError("channel_affine: expected " + std::to_string(s.c) + " coefficients");
  }
  std::vector<float> sc(scale.begin(), scale.end());
  Tensor out(s);
  for (int64_t n = 0; n < s.n; ++n) {
    for (int64_t c = 0; c < s.c; ++c) {
      const float* p = x.value().plane(n, c);
      float* q = out.plane(n, c);
      for (int64_t i = 0; i < s.plane(); ++i) q[i] = p[i] * scale[c] + shift[c];
    }
  }
  return x.tape().record(std::move(out), {x}, [x, sc](GradTape& t, const Tensor& g) {
    const Shape& s = x.shape();
    Tensor& d = t.grad(x);
    for (int64_t n = 0; n < s.n; ++n) {
      for (int64_t c = 0; c < s.c; ++c) {
        const float* gp = g.plane(n, c);
        float* dp = d.plane(n, c);
        for (int64_t i = 0; i < s.plane(); ++i) dp[i] += gp[i] * sc[static_cast<size_t>(c)];
      }
    }
  });
}

// Weighted sum of scalar vars.
inline Var weighted_sum(std::span<const Var> terms, std::span<const float> weights) {
  if (terms.empty() || terms.size() != weights.size()) {
    throw std::invalid_argument("weighted_sum: need matching, non-empty terms and weights");
  }
  Var total = scalar_mul(terms[0], weights[0]);
  for (size_t i = 1; i < terms.size(); ++i) total = add(total, scalar_mul(terms[i], weights[i]));
  return total;
}

}  // namespace pcinpaint::ops
