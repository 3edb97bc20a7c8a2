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

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "pcinpaint/ns_inpaint.hpp"

namespace pcinpaint {
namespace {

Tensor ramp(int64_t c, int64_t h, int64_t w) {
  Tensor t({1, c, h, w});
  for (int64_t ch = 0; ch < c; ++ch)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x) t.at(0, ch, y, x) = static_cast<float>(x) / static_cast<float>(w);
  return t;
}

Tensor centred_hole(int64_t h, int64_t w, int64_t size) {
  Tensor m({1, 1, h, w}, 1.0f);
  for (int64_t y = (h - size) / 2; y < (h + size) / 2; ++y)
    for (int64_t x = (w - size) / 2; x < (w + size) / 2; ++x) m.at(0, 0, y, x) = 0.0f;
  return m;
}

void expect_valid_untouched(const Tensor& in, const Tensor& out, const Tensor& mask) {
  const Shape s = in.shape();
  for (int64_t n = 0; n < s.n; ++n)
    for (int64_t c = 0; c < s.c; ++c)
      for (int64_t y = 0; y < s.h; ++y)
        for (int64_t x = 0; x < s.w; ++x)
          if (mask.at(n, 0, y, x) == 1.0f) ASSERT_EQ(out.at(n, c, y, x), in.at(n, c, y, x));
}

TEST(NavierStokes, EmptyMaskIsIdentity) {
  std::mt19937_64 rng(1);
  Tensor img = uniform_tensor({1, 3, 16, 16}, 0, 1, rng);
  NSStats st;
  EXPECT_EQ(ns_inpaint(img, Tensor({1, 1, 16, 16}, 1.0f), {}, &st), img);
  EXPECT_EQ(st.iterations, 0);
}

TEST(NavierStokes, ConstantImageStaysConstant) {
  std::mt19937_64 rng(2);
  for (float v : {0.0f, 0.3f, 1.0f}) {
    Tensor img({1, 2, 20, 24}, v);
    Tensor mask = oracle::random_mask({1, 1, 20, 24}, 0.6, rng);
    Tensor out = ns_inpaint(img, mask);
    EXPECT_LE(max_abs_diff(out, img), 1e-6);
  }
}

TEST(NavierStokes, RecoversLinearRamp) {
  Tensor img = ramp(1, 64, 64);
  Tensor mask = centred_hole(64, 64, 8);
  NSStats st;
  Tensor out = ns_inpaint(img, mask, {}, &st);
  EXPECT_LE(max_abs_diff(out, img), 0.02);
  EXPECT_TRUE(st.converged);
  expect_valid_untouched(img, out, mask);
}

TEST(NavierStokes, UpdatesDecayOverFinalIterations) {
  NSConfig cfg;
  NSStats st;
  ns_inpaint(ramp(1, 64, 64), centred_hole(64, 64, 8), cfg, &st);
  ASSERT_EQ(st.updates.size(), 1u);
  const auto& h = st.updates[0];
  ASSERT_GE(h.size(), 100u);
  // A diffusion pass nudges the next transport step, so compare the largest
  // update of consecutive diffusion cycles.
  const size_t period = static_cast<size_t>(cfg.diffusion_every);
  const size_t start = (h.size() - h.size() / 10) / period * period;
  double prev = std::numeric_limits<double>::infinity();
  for (size_t c = start; c + period <= h.size(); c += period) {
    const double cycle = *std::max_element(h.begin() + static_cast<std::ptrdiff_t>(c),
                                           h.begin() + static_cast<std::ptrdiff_t>(c + period));
    EXPECT_LE(cycle, prev) << "cycle starting at " << c;
    prev = cycle;
  }
  // Within a cycle, transport-only steps never grow.
  for (size_t i = start + 1; i < h.size(); ++i) {
    if (i % period == 0) continue;
    EXPECT_LE(h[i], h[i - 1] * (1 + 1e-9)) << "iteration " << i;
  }
}

TEST(NavierStokes, MaximumPrincipleAndValidPixels) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 4; ++trial) {
    Tensor img = uniform_tensor({1, 3, 24, 24}, 0, 1, rng);
    Tensor mask = centred_hole(24, 24, 6 + 2 * trial);
    NSConfig cfg;
    cfg.max_iters = 500;
    Tensor out = ns_inpaint(img, mask, cfg);
    expect_valid_untouched(img, out, mask);
    for (int64_t c = 0; c < 3; ++c) {
      float lo = 1e9f, hi = -1e9f;
      for (int64_t y = 0; y < 24; ++y)
        for (int64_t x = 0; x < 24; ++x) {
          if (mask.at(0, 0, y, x) == 0.0f) continue;
          bool border = false;
          for (auto [dy, dx] : {std::pair{-1, 0}, {1, 0}, {0, -1}, {0, 1}}) {
            const int64_t yy = y + dy, xx = x + dx;
            border |= yy >= 0 && yy < 24 && xx >= 0 && xx < 24 && mask.at(0, 0, yy, xx) == 0.0f;
          }
          if (!border) continue;
          lo = std::min(lo, img.at(0, c, y, x));
          hi = std::max(hi, img.at(0, c, y, x));
        }
      for (int64_t y = 0; y < 24; ++y)
        for (int64_t x = 0; x < 24; ++x) {
          if (mask.at(0, 0, y, x) == 1.0f) continue;
          EXPECT_GE(out.at(0, c, y, x), lo - 1e-3f);
          EXPECT_LE(out.at(0, c, y, x), hi + 1e-3f);
        }
    }
  }
}

TEST(NavierStokes, ComponentsStartFromTheirOwnBorderMean) {
  // Left half 0, right half 1, one single-pixel hole in each: with no
  // iterations the holes take their own neighbours' means.
  Tensor img({1, 1, 8, 8});
  for (int64_t y = 0; y < 8; ++y)
    for (int64_t x = 4; x < 8; ++x) img.at(0, 0, y, x) = 1.0f;
  Tensor mask({1, 1, 8, 8}, 1.0f);
  mask.at(0, 0, 3, 1) = 0.0f;
  mask.at(0, 0, 3, 6) = 0.0f;
  NSConfig cfg;
  cfg.max_iters = 1;
  cfg.dt = 1e-12f;
  Tensor out = ns_inpaint(img, mask, cfg);
  EXPECT_NEAR(out.at(0, 0, 3, 1), 0.0f, 1e-9);
  EXPECT_NEAR(out.at(0, 0, 3, 6), 1.0f, 1e-9);
}

TEST(NavierStokes, RejectsBadInput) {
  Tensor img({1, 3, 8, 8});
  EXPECT_THROW(ns_inpaint(img, Tensor({1, 1, 8, 8}, 0.5f)), std::invalid_argument);
  EXPECT_THROW(ns_inpaint(img, Tensor({1, 1, 8, 7}, 1.0f)), ShapeError);
  NSConfig bad;
  bad.dt = 0;
  EXPECT_THROW(ns_inpaint(img, Tensor({1, 1, 8, 8}, 1.0f), bad), std::invalid_argument);
  bad = {};
  bad.max_iters = 0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(NavierStokes, Deterministic) {
  std::mt19937_64 rng(4);
  Tensor img = uniform_tensor({2, 3, 20, 20}, 0, 1, rng);
  Tensor mask = oracle::random_mask({2, 1, 20, 20}, 0.8, rng);
  NSConfig cfg;
  cfg.max_iters = 200;
  EXPECT_EQ(ns_inpaint(img, mask, cfg), ns_inpaint(img, mask, cfg));
}

}  // namespace
}  // namespace pcinpaint
