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

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "pcinpaint/gradcheck.hpp"
#include "pcinpaint/losses.hpp"

namespace pcinpaint {
namespace {

Tensor t22(std::vector<float> v) { return Tensor({1, 1, 2, 2}, std::move(v)); }

float scalar_of(const Var& v) { return v.value().item(); }

TEST(TvLoss, Examples) {
  GradTape tape;
  EXPECT_EQ(scalar_of(tv_loss(tape.constant(Tensor({2, 3, 5, 4}, 0.3f)))), 0.0f);
  EXPECT_EQ(scalar_of(tv_loss(tape.constant(Tensor({1, 1, 1, 1}, 0.7f)))), 0.0f);
  // Row diffs 1 + 1, column diffs 2 + 2, mean over 4 elements.
  EXPECT_FLOAT_EQ(scalar_of(tv_loss(tape.constant(t22({0, 1, 2, 3})))), 1.5f);
}

TEST(TvLoss, HoleRegionOption) {
  GradTape tape;
  Tensor img({1, 1, 1, 4}, std::vector<float>{0, 1, 3, 6});
  Tensor mask({1, 1, 1, 4}, std::vector<float>{1, 1, 1, 0});
  const Tensor region = dilated_hole_region(mask);
  EXPECT_EQ(region, Tensor({1, 1, 1, 4}, std::vector<float>{0, 0, 1, 1}));
  EXPECT_FLOAT_EQ(scalar_of(tv_loss(tape.constant(img), &region)), 3.0f / 4.0f);
}

TEST(Gram, Examples) {
  GradTape tape;
  EXPECT_EQ(ops::gram(tape.constant(Tensor({2, 3, 4, 4}))).value(), Tensor({2, 1, 3, 3}));
  // F = [[1,0],[0,1]] (C = 2, h*w = 2): F F^T / (2 * 2) = I / 4.
  Tensor f({1, 2, 1, 2}, std::vector<float>{1, 0, 0, 1});
  EXPECT_EQ(ops::gram(tape.constant(f)).value(), Tensor({1, 1, 2, 2}, std::vector<float>{0.25f, 0, 0, 0.25f}));
}

TEST(Gram, SymmetricPositiveSemidefinite) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 25; ++trial) {
    GradTape tape;
    const int64_t c = 1 + trial % 6;
    Tensor g = ops::gram(tape.constant(uniform_tensor({1, c, 3, 4}, -2, 2, rng))).value();
    Eigen::MatrixXd m(c, c);
    for (int64_t i = 0; i < c; ++i)
      for (int64_t j = 0; j < c; ++j) {
        EXPECT_EQ(g.at(0, 0, i, j), g.at(0, 0, j, i));
        m(i, j) = g.at(0, 0, i, j);
      }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-6);
  }
}

TEST(HoleValid, HandEvaluated) {
  GradTape tape;
  Tensor gt = t22({1, 2, 3, 4});
  Tensor out = t22({5, 10, 3, 4});  // diff [[4,8],[0,0]]
  Tensor m = t22({1, 0, 1, 1});
  auto hv = hole_valid_losses(tape.constant(out), tape.constant(gt), m);
  EXPECT_FLOAT_EQ(scalar_of(hv.hole), 2.0f);
  EXPECT_FLOAT_EQ(scalar_of(hv.valid), 1.0f);
  auto same = hole_valid_losses(tape.constant(gt), tape.constant(gt), m);
  EXPECT_EQ(scalar_of(same.hole), 0.0f);
  EXPECT_EQ(scalar_of(same.valid), 0.0f);
  auto full = hole_valid_losses(tape.constant(out), tape.constant(gt), t22({1, 1, 1, 1}));
  EXPECT_EQ(scalar_of(full.hole), 0.0f);
}

TEST(Perceptual, IdentityTapMatchesScalarLoop) {
  std::mt19937_64 rng(4);
  GradTape tape;
  Tensor out = uniform_tensor({1, 3, 4, 4}, 0, 1, rng), gt = uniform_tensor({1, 3, 4, 4}, 0, 1, rng);
  Tensor mask = oracle::random_mask({1, 1, 4, 4}, 0.5, rng);
  Tensor comp = composite(out, gt, mask);
  double a = 0, b = 0;
  for (int64_t i = 0; i < out.numel(); ++i) {
    a += std::abs(static_cast<double>(out[i]) - gt[i]);
    b += std::abs(static_cast<double>(comp[i]) - gt[i]);
  }
  const double expect = (a + b) / static_cast<double>(out.numel());
  Var o = tape.constant(out), c = tape.constant(comp), g = tape.constant(gt);
  EXPECT_NEAR(scalar_of(perceptual_loss(extract_features(identity_taps(), o, c, g))), expect, 1e-6);
}

TEST(Perceptual, NetworkCases) {
  std::mt19937_64 rng(5);
  FeatureNetwork net;
  GradTape tape;
  Tensor gt = uniform_tensor({1, 3, 16, 16}, 0, 1, rng), out = uniform_tensor({1, 3, 16, 16}, 0, 1, rng);
  Var g = tape.constant(gt), o = tape.constant(out);
  EXPECT_EQ(scalar_of(perceptual_loss(g, g, g, net)), 0.0f);
  // Full mask: I_comp = I_gt, so only the I_out sum remains.
  Var comp = composite(o, g, Tensor({1, 1, 16, 16}, 1.0f));
  EXPECT_EQ(comp.value(), gt);
  const float both = scalar_of(perceptual_loss(o, comp, g, net));
  const float out_only = scalar_of(perceptual_loss(o, g, g, net));
  EXPECT_GT(both, 0.0f);
  EXPECT_EQ(both, out_only);
  auto taps = net.taps(net.bind(tape), g);
  ASSERT_EQ(taps.size(), 3u);
  EXPECT_GT(taps[0].shape().h, taps[1].shape().h);
  EXPECT_GT(taps[1].shape().h, taps[2].shape().h);
}

TEST(Style, IdentityTapMatchesScalarLoop) {
  std::mt19937_64 rng(6);
  GradTape tape;
  const Shape s{1, 2, 2, 2};
  Tensor out = uniform_tensor(s, 0, 1, rng), gt = uniform_tensor(s, 0, 1, rng), comp = uniform_tensor(s, 0, 1, rng);
  auto gram_of = [&](const Tensor& t, int i, int j) {
    double acc = 0;
    for (int p = 0; p < 4; ++p) acc += static_cast<double>(t[i * 4 + p]) * t[j * 4 + p];
    return acc / 8.0;
  };
  double expect = 0;
  for (const Tensor* x : {&out, &comp})
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) expect += std::abs(gram_of(*x, i, j) - gram_of(gt, i, j)) / 4.0;
  Var o = tape.constant(out), c = tape.constant(comp), g = tape.constant(gt);
  EXPECT_NEAR(scalar_of(style_loss(extract_features(identity_taps(), o, c, g))), expect, 1e-6);
  EXPECT_EQ(scalar_of(style_loss(extract_features(identity_taps(), g, g, g))), 0.0f);
}

TEST(Style, InvariantToSharedPixelPermutation) {
  std::mt19937_64 rng(7);
  const Shape s{1, 3, 4, 4};
  Tensor out = uniform_tensor(s, 0, 1, rng), gt = uniform_tensor(s, 0, 1, rng);
  std::vector<int> perm(16);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  auto permute = [&](const Tensor& t) {
    Tensor p(t.shape());
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < 16; ++i) p[c * 16 + i] = t[c * 16 + perm[static_cast<size_t>(i)]];
    return p;
  };
  GradTape tape;
  auto loss = [&](const Tensor& o, const Tensor& g) {
    Var ov = tape.constant(o), gv = tape.constant(g);
    return scalar_of(style_loss(extract_features(identity_taps(), ov, ov, gv)));
  };
  EXPECT_NEAR(loss(out, gt), loss(permute(out), permute(gt)), 1e-6);
}

TEST(TotalLoss, ZeroCases) {
  std::mt19937_64 rng(8);
  FeatureNetwork net;
  GradTape tape;
  Tensor gt = uniform_tensor({1, 3, 8, 8}, 0, 1, rng), out = uniform_tensor({1, 3, 8, 8}, 0, 1, rng);
  Tensor mask = oracle::random_mask({1, 1, 8, 8}, 0.5, rng);
  LossWeights zero{0, 0, 0, 0, 0};
  EXPECT_EQ(total_loss(tape.constant(out), tape.constant(gt), mask, net, zero).total_value, 0.0);
  LossWeights valid_only{0, 1, 0, 0, 0};
  EXPECT_EQ(total_loss(tape.constant(gt), tape.constant(gt), mask, net, valid_only).total_value, 0.0);
  auto full = total_loss(tape.constant(gt), tape.constant(gt), Tensor({1, 1, 8, 8}, 1.0f), net, LossWeights{});
  EXPECT_EQ(full.tv > 0, true);  // TV of the image itself
  EXPECT_EQ(full.valid + full.hole + full.perceptual + full.style, 0.0);
  EXPECT_THROW(LossWeights({-1.0f}).validate(), std::invalid_argument);
}

TEST(TotalLoss, HandComposedDefaultWeights) {
  // gt = [[1,2],[3,4]], out = [[5,10],[3,4]], M = [[1,0],[1,1]]
  // comp = [[1,10],[3,4]]
  //   tv         = (|10-1| + |4-3| + |3-1| + |4-10|) / 4 = 4.5
  //   valid      = 4 / 4 = 1,  hole = 8 / 4 = 2
  //   perceptual = mean|out-gt| + mean|comp-gt| = 3 + 2 = 5          (identity tap)
  //   style      = |150/4 - 30/4| + |126/4 - 30/4| = 30 + 24 = 54    (C = 1, K = 1/4)
  //   total      = 0.1*4.5 + 1 + 6*2 + 0.05*5 + 120*54 = 6493.7
  GradTape tape;
  Tensor gt = t22({1, 2, 3, 4}), out = t22({5, 10, 3, 4}), m = t22({1, 0, 1, 1});
  auto r = total_loss(tape.constant(out), tape.constant(gt), m, identity_taps(), LossWeights{});
  EXPECT_FLOAT_EQ(static_cast<float>(r.tv), 4.5f);
  EXPECT_FLOAT_EQ(static_cast<float>(r.valid), 1.0f);
  EXPECT_FLOAT_EQ(static_cast<float>(r.hole), 2.0f);
  EXPECT_FLOAT_EQ(static_cast<float>(r.perceptual), 5.0f);
  EXPECT_FLOAT_EQ(static_cast<float>(r.style), 54.0f);
  EXPECT_NEAR(r.total_value, 6493.7, 1e-3);
}

TEST(TotalLoss, AblationSwitchesMatchZeroWeights) {
  std::mt19937_64 rng(9);
  FeatureNetwork net;
  Tensor gt = uniform_tensor({2, 3, 16, 16}, 0, 1, rng), out = uniform_tensor({2, 3, 16, 16}, 0, 1, rng);
  Tensor mask = oracle::random_mask({2, 1, 16, 16}, 0.7, rng);
  struct Run {
    Tensor total;
    double style;
  };
  auto run = [&](LossWeights w) {
    GradTape tape;
    auto r = total_loss(tape.constant(out), tape.constant(gt), mask, net, w);
    return Run{r.total.value(), r.style};
  };
  LossWeights no_style;
  no_style.use_style = false;
  LossWeights zero_style;
  zero_style.style = 0.0f;
  EXPECT_EQ(run(no_style).total, run(zero_style).total);
  EXPECT_EQ(run(no_style).style, 0.0);
  LossWeights no_perc;
  no_perc.use_perceptual = false;
  LossWeights zero_perc;
  zero_perc.perceptual = 0.0f;
  EXPECT_EQ(run(no_perc).total, run(zero_perc).total);
  EXPECT_GT(run(LossWeights{}).total.item(), run(no_style).total.item());
}

TEST(TotalLoss, NonNegative) {
  std::mt19937_64 rng(10);
  FeatureNetwork net;
  for (int trial = 0; trial < 5; ++trial) {
    GradTape tape;
    Tensor gt = uniform_tensor({1, 3, 8, 8}, 0, 1, rng), out = uniform_tensor({1, 3, 8, 8}, -1, 2, rng);
    auto r = total_loss(tape.constant(out), tape.constant(gt), oracle::random_mask({1, 1, 8, 8}, 0.5, rng), net,
                        LossWeights{});
    for (double v : {r.tv, r.valid, r.hole, r.perceptual, r.style}) EXPECT_GE(v, 0.0);
  }
}

class LossGradients : public ::testing::Test {
 protected:
  std::mt19937_64 rng{31};
  Tensor gt{{1, 3, 6, 6}};
  Tensor out{{1, 3, 6, 6}};
  Tensor mask = oracle::random_mask({1, 1, 6, 6}, 0.6, rng);
  FeatureNetwork net{[] {
    FeatureNetConfig c;
    c.stage_channels = {4};
    c.convs_per_stage = {1};
    return c;
  }()};

  LossGradients() {
    // gt and out values are all distinct multiples of 0.002, so every L1
    // difference stays outside the probe interval.
    std::vector<int> perm(static_cast<size_t>(2 * gt.numel()));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int64_t i = 0; i < gt.numel(); ++i) {
      gt[i] = 0.004f * static_cast<float>(perm[static_cast<size_t>(i)]);
      out[i] = 0.002f + 0.004f * static_cast<float>(perm[static_cast<size_t>(i + gt.numel())]);
    }
  }

  void expect_ok(const GradCheckResult& r) {
    EXPECT_TRUE(r.passed()) << r.name << ": max abs " << r.max_abs_error << " failures " << r.failures << "/"
                            << r.probes;
  }
};

TEST_F(LossGradients, EachTermWrtOutput) {
  auto run = [&](const std::string& name, auto term) {
    expect_ok(check_gradients(name, {{"out", out}}, [&](GradTape& tape, const std::vector<Var>& v) {
      Var g = tape.constant(gt);
      return term(v[0], g, composite(v[0], g, mask));
    }));
  };
  run("tv", [&](const Var&, const Var&, const Var& c) { return tv_loss(c); });
  run("hole", [&](const Var& o, const Var& g, const Var&) { return hole_valid_losses(o, g, mask).hole; });
  run("valid", [&](const Var& o, const Var& g, const Var&) { return hole_valid_losses(o, g, mask).valid; });
  run("perceptual", [&](const Var& o, const Var& g, const Var& c) { return perceptual_loss(o, c, g, net); });
  run("style", [&](const Var& o, const Var& g, const Var& c) { return style_loss(o, c, g, net); });
}

TEST_F(LossGradients, TotalWrtOutput) {
  // The total here is ~80, where one f32 ulp over 2*eps is already ~4e-3.
  GradCheckOptions opt;
  opt.atol = 2e-2;
  expect_ok(check_gradients(
      "total", {{"out", out}},
      [&](GradTape& tape, const std::vector<Var>& v) {
        return total_loss(v[0], tape.constant(gt), mask, net, LossWeights{}).total;
      },
      opt));
}

}  // namespace
}  // namespace pcinpaint
