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
#include "pcinpaint/gradcheck.hpp"
#include "pcinpaint/ops.hpp"

namespace pcinpaint {
namespace {

using kernels::UpsampleMode;

TEST(Backward, LinearFunctionGradientIsInput) {
  std::mt19937_64 rng(4);
  Tensor x = uniform_tensor({1, 2, 3, 3}, -1.0f, 1.0f, rng);
  GradTape tape;
  Var w = tape.parameter("W", Tensor(x.shape(), 0.5f));
  auto grads = tape.backward(ops::sum(ops::mul(w, tape.constant(x))));
  EXPECT_EQ(grads.at("W"), x);
}

TEST(Backward, ReluOfNegativesHasZeroGradient) {
  GradTape tape;
  Var x = tape.parameter("X", Tensor({1, 2, 5, 5}, -0.3f));
  auto grads = tape.backward(ops::sum(ops::relu(x)));
  EXPECT_EQ(grads.at("X"), Tensor({1, 2, 5, 5}, 0.0f));
}

TEST(Backward, RejectsNonScalarLoss) {
  GradTape tape;
  Var x = tape.parameter("X", Tensor({1, 1, 2, 2}, 1.0f));
  EXPECT_THROW(tape.backward(ops::relu(x)), ShapeError);
}

TEST(Backward, FanOutAccumulates) {
  GradTape tape;
  Var x = tape.parameter("X", Tensor({1, 1, 1, 3}, std::vector<float>{1, 2, 3}));
  // loss = sum(x) + sum(3x) + sum(x * x)  =>  d/dx = 1 + 3 + 2x
  Var loss = ops::add(ops::add(ops::sum(x), ops::sum(ops::scalar_mul(x, 3.0f))), ops::sum(ops::mul(x, x)));
  auto grads = tape.backward(loss);
  EXPECT_EQ(grads.at("X"), Tensor({1, 1, 1, 3}, std::vector<float>{6, 8, 10}));
}

TEST(Backward, UnusedParameterGetsZeros) {
  GradTape tape;
  Var x = tape.parameter("X", Tensor({1, 1, 2, 2}, 1.0f));
  tape.parameter("unused", Tensor({1, 1, 1, 2}, 3.0f));
  auto grads = tape.backward(ops::sum(x));
  EXPECT_EQ(grads.at("unused"), Tensor({1, 1, 1, 2}, 0.0f));
}

TEST(Backward, Deterministic) {
  std::mt19937_64 rng(8);
  Tensor x = uniform_tensor({1, 3, 8, 8}, -1.0f, 1.0f, rng);
  Tensor w = uniform_tensor({4, 3, 3, 3}, -1.0f, 1.0f, rng);
  auto run = [&] {
    GradTape tape;
    Var wv = tape.parameter("w", w);
    Var y = ops::leaky_relu(ops::conv2d(tape.constant(x), wv, std::nullopt, 1), 0.2f);
    return tape.backward(ops::abs_sum(ops::upsample2(ops::maxpool2(y), UpsampleMode::kBilinear)));
  };
  EXPECT_EQ(run().at("w"), run().at("w"));
}

class OpGradients : public ::testing::Test {
 protected:
  std::mt19937_64 rng{123};
  Tensor rand(Shape s) { return uniform_tensor(s, -1.0f, 1.0f, rng); }
  Tensor kinkless(Shape s) { return oracle::away_from_zero(s, -1.0f, 1.0f, 0.05f, rng); }
  void expect_ok(const GradCheckResult& r) {
    EXPECT_TRUE(r.passed()) << r.name << ": max abs " << r.max_abs_error << ", max rel "
                            << r.max_rel_error << ", failures " << r.failures << "/" << r.probes;
  }
};

TEST_F(OpGradients, Conv2d) {
  expect_ok(check_gradients(
      "conv2d", {{"x", rand({1, 2, 5, 5})}, {"w", rand({3, 2, 3, 3})}, {"b", rand({1, 3, 1, 1})}},
      [](GradTape&, const std::vector<Var>& v) { return ops::conv2d(v[0], v[1], v[2], 1); }));
}

TEST_F(OpGradients, Maxpool2) {
  // Distinct values spaced well beyond epsilon so no window has a near tie.
  Tensor x({1, 2, 6, 6});
  std::vector<float> vals(72);
  for (size_t i = 0; i < vals.size(); ++i) vals[i] = -0.7f + 0.02f * static_cast<float>(i);
  std::shuffle(vals.begin(), vals.end(), rng);
  std::copy(vals.begin(), vals.end(), x.data().begin());
  expect_ok(check_gradients("maxpool2", {{"x", x}},
                            [](GradTape&, const std::vector<Var>& v) { return ops::maxpool2(v[0]); }));
}

TEST_F(OpGradients, Upsample) {
  for (auto mode : {UpsampleMode::kBilinear, UpsampleMode::kNearest}) {
    expect_ok(check_gradients("upsample2", {{"x", rand({1, 2, 5, 5})}},
                              [mode](GradTape&, const std::vector<Var>& v) { return ops::upsample2(v[0], mode); }));
  }
}

TEST_F(OpGradients, Elementwise) {
  const Shape s{1, 2, 5, 5};
  expect_ok(check_gradients("add", {{"a", rand(s)}, {"b", rand(s)}},
                            [](GradTape&, const std::vector<Var>& v) { return ops::add(v[0], v[1]); }));
  expect_ok(check_gradients("sub", {{"a", rand(s)}, {"b", rand(s)}},
                            [](GradTape&, const std::vector<Var>& v) { return ops::sub(v[0], v[1]); }));
  expect_ok(check_gradients("mul", {{"a", rand(s)}, {"b", rand(s)}},
                            [](GradTape&, const std::vector<Var>& v) { return ops::mul(v[0], v[1]); }));
  expect_ok(check_gradients("scalar_mul", {{"a", rand(s)}},
                            [](GradTape&, const std::vector<Var>& v) { return ops::scalar_mul(v[0], -1.7f); }));
  expect_ok(check_gradients("sum", {{"a", rand(s)}},
                            [](GradTape&, const std::vector<Var>& v) { return ops::sum(v[0]); }));
  expect_ok(check_gradients("abs_sum", {{"a", kinkless(s)}},
                            [](GradTape&, const std::vector<Var>& v) { return ops::abs_sum(v[0]); }));
  expect_ok(check_gradients("relu", {{"a", kinkless(s)}},
                            [](GradTape&, const std::vector<Var>& v) { return ops::relu(v[0]); }));
  expect_ok(check_gradients("leaky_relu", {{"a", kinkless(s)}},
                            [](GradTape&, const std::vector<Var>& v) { return ops::leaky_relu(v[0], 0.2f); }));
  expect_ok(check_gradients("concat_channels", {{"a", rand(s)}, {"b", rand({1, 3, 5, 5})}},
                            [](GradTape&, const std::vector<Var>& v) { return ops::concat_channels(v[0], v[1]); }));
  const std::vector<float> scale{0.5f, -2.0f}, shift{0.1f, 0.3f};
  expect_ok(check_gradients("channel_affine", {{"a", rand(s)}}, [&](GradTape&, const std::vector<Var>& v) {
    return ops::channel_affine(v[0], scale, shift);
  }));
}

TEST_F(OpGradients, MatmulAndGram) {
  expect_ok(check_gradients("matmul", {{"a", rand({1, 1, 3, 4})}, {"b", rand({1, 1, 4, 2})}},
                            [](GradTape&, const std::vector<Var>& v) { return ops::matmul(v[0], v[1]); }));
  expect_ok(check_gradients("gram", {{"f", rand({2, 3, 5, 5})}},
                            [](GradTape&, const std::vector<Var>& v) { return ops::gram(v[0]); }));
}

}  // namespace
}  // namespace pcinpaint
