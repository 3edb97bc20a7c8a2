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

// Finite-difference sweep over every differentiable op, the partial
// convolution layer and the loss terms, on inputs of at most 6x6. Inputs to
// piecewise-linear functions are built so no kink lies within epsilon of a
// probe.

#pragma once

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "pcinpaint/gradcheck.hpp"
#include "pcinpaint/losses.hpp"
#include "pcinpaint/pconv.hpp"

namespace pcinpaint {

inline std::vector<GradCheckResult> gradient_suite(uint64_t seed = 2024) {
  std::mt19937_64 rng(seed);
  std::vector<GradCheckResult> out;
  using V = std::vector<Var>;
  auto rand = [&](Shape s) { return uniform_tensor(s, -1.0f, 1.0f, rng); };
  // Distinct values on a grid of spacing 0.02, shuffled: no ties for max
  // pooling and nothing within epsilon of zero.
  auto grid = [&](Shape s) {
    Tensor t(s);
    std::vector<float> v(static_cast<size_t>(t.numel()));
    for (size_t i = 0; i < v.size(); ++i) v[i] = 0.01f + 0.02f * static_cast<float>(i) - 0.01f * static_cast<float>(v.size());
    std::shuffle(v.begin(), v.end(), rng);
    std::copy(v.begin(), v.end(), t.data().begin());
    return t;
  };
  auto add = [&](const std::string& name, const NamedTensors& in, const GraphBuilder& f, GradCheckOptions o = {}) {
    out.push_back(check_gradients(name, in, f, o));
  };
  const Shape s{1, 2, 5, 5};

  add("conv2d", {{"x", rand(s)}, {"w", rand({3, 2, 3, 3})}, {"b", rand({1, 3, 1, 1})}},
      [](GradTape&, const V& v) { return ops::conv2d(v[0], v[1], v[2], 1); });
  add("maxpool2", {{"x", grid({1, 2, 6, 6})}}, [](GradTape&, const V& v) { return ops::maxpool2(v[0]); });
  add("upsample2.bilinear", {{"x", rand(s)}},
      [](GradTape&, const V& v) { return ops::upsample2(v[0], kernels::UpsampleMode::kBilinear); });
  add("upsample2.nearest", {{"x", rand(s)}},
      [](GradTape&, const V& v) { return ops::upsample2(v[0], kernels::UpsampleMode::kNearest); });
  add("add", {{"a", rand(s)}, {"b", rand(s)}}, [](GradTape&, const V& v) { return ops::add(v[0], v[1]); });
  add("sub", {{"a", rand(s)}, {"b", rand(s)}}, [](GradTape&, const V& v) { return ops::sub(v[0], v[1]); });
  add("mul", {{"a", rand(s)}, {"b", rand(s)}}, [](GradTape&, const V& v) { return ops::mul(v[0], v[1]); });
  add("scalar_mul", {{"a", rand(s)}}, [](GradTape&, const V& v) { return ops::scalar_mul(v[0], -1.7f); });
  add("sum", {{"a", rand(s)}}, [](GradTape&, const V& v) { return ops::sum(v[0]); });
  add("abs_sum", {{"a", grid(s)}}, [](GradTape&, const V& v) { return ops::abs_sum(v[0]); });
  add("mean_abs", {{"a", grid(s)}}, [](GradTape&, const V& v) { return ops::mean_abs(v[0]); });
  add("relu", {{"a", grid(s)}}, [](GradTape&, const V& v) { return ops::relu(v[0]); });
  add("leaky_relu", {{"a", grid(s)}}, [](GradTape&, const V& v) { return ops::leaky_relu(v[0], 0.2f); });
  add("concat_channels", {{"a", rand(s)}, {"b", rand({1, 3, 5, 5})}},
      [](GradTape&, const V& v) { return ops::concat_channels(v[0], v[1]); });
  add("channel_affine", {{"a", rand(s)}}, [](GradTape&, const V& v) {
    const std::vector<float> scale{0.5f, -2.0f}, shift{0.1f, 0.3f};
    return ops::channel_affine(v[0], scale, shift);
  });
  add("matmul", {{"a", rand({1, 1, 3, 4})}, {"b", rand({1, 1, 4, 2})}},
      [](GradTape&, const V& v) { return ops::matmul(v[0], v[1]); });
  add("gram", {{"f", rand({2, 3, 5, 5})}}, [](GradTape&, const V& v) { return ops::gram(v[0]); });
  add("weighted_sum", {{"a", rand({1, 1, 1, 1})}, {"b", rand({1, 1, 1, 1})}}, [](GradTape&, const V& v) {
    const std::vector<float> w{0.3f, -2.0f};
    return ops::weighted_sum(v, w);
  });

  Tensor pmask({1, 1, 5, 5});
  std::bernoulli_distribution keep(0.6);
  for (auto& m : pmask.data()) m = keep(rng) ? 1.0f : 0.0f;
  pmask.at(0, 0, 2, 2) = 0.0f;
  add("pconv(x,W,b)",
      {{"x", rand(s)}, {"w", uniform_tensor({3, 2, 3, 3}, -0.5f, 0.5f, rng)},
       {"b", uniform_tensor({1, 3, 1, 1}, -0.5f, 0.5f, rng)}},
      [pmask](GradTape&, const V& v) { return pconv_forward(v[0], pmask, v[1], v[2]).features; });

  // Loss terms w.r.t. I_out. gt and out are distinct multiples of 0.002 so
  // every L1 difference stays outside the probe interval.
  Tensor gt({1, 3, 6, 6}), io({1, 3, 6, 6}), lmask({1, 1, 6, 6});
  std::vector<int> perm(static_cast<size_t>(2 * gt.numel()));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  for (int64_t i = 0; i < gt.numel(); ++i) {
    gt[i] = 0.004f * static_cast<float>(perm[static_cast<size_t>(i)]);
    io[i] = 0.002f + 0.004f * static_cast<float>(perm[static_cast<size_t>(i + gt.numel())]);
  }
  for (auto& m : lmask.data()) m = keep(rng) ? 1.0f : 0.0f;
  FeatureNetConfig fc;
  fc.stage_channels = {4};
  fc.convs_per_stage = {1};
  auto net = std::make_shared<FeatureNetwork>(fc);
  auto loss = [&](const std::string& name, std::function<Var(const Var&, const Var&, const Var&)> term) {
    add("loss." + name, {{"out", io}}, [gt, lmask, term](GradTape& tape, const V& v) {
      Var g = tape.constant(gt);
      return term(v[0], g, composite(v[0], g, lmask));
    });
  };
  loss("tv", [](const Var&, const Var&, const Var& c) { return tv_loss(c); });
  loss("valid", [lmask](const Var& o, const Var& g, const Var&) { return hole_valid_losses(o, g, lmask).valid; });
  loss("hole", [lmask](const Var& o, const Var& g, const Var&) { return hole_valid_losses(o, g, lmask).hole; });
  loss("perceptual", [net](const Var& o, const Var& g, const Var& c) { return perceptual_loss(o, c, g, *net); });
  loss("style", [net](const Var& o, const Var& g, const Var& c) { return style_loss(o, c, g, *net); });
  return out;
}

}  // namespace pcinpaint
