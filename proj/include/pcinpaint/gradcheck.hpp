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

// Central finite-difference checking of tape gradients. Only the forward
// pass is used for the numeric side.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pcinpaint/ops.hpp"
#include "pcinpaint/tape.hpp"

namespace pcinpaint {

struct GradCheckOptions {
  float epsilon = 1e-3f;
  double atol = 1e-3;
  double rtol = 1e-2;
  // Entries probed per input; all entries when the input is smaller.
  int64_t max_probes = 64;
  uint64_t seed = 17;
};

struct GradCheckResult {
  std::string name;
  double max_abs_error = 0.0;
  double max_rel_error = 0.0;
  int64_t probes = 0;
  int64_t failures = 0;
  bool passed() const { return failures == 0 && probes > 0; }
};

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

// Builds the function under test from tape variables (same order as the
// inputs). The output may have any shape; it is reduced with fixed random
// weights in double precision.
using GraphBuilder = std::function<Var(GradTape&, const std::vector<Var>&)>;

inline GradCheckResult check_gradients(const std::string& name, const NamedTensors& inputs,
                                       const GraphBuilder& build,
                                       const GradCheckOptions& opt = {}) {
  GradCheckResult res{name};
  std::mt19937_64 rng(opt.seed);

  Tensor weights;
  auto reduce = [&](const Tensor& out) {
    double s = 0.0;
    for (int64_t i = 0; i < out.numel(); ++i) s += static_cast<double>(weights[i]) * out[i];
    return s;
  };

  std::map<std::string, Tensor> analytic;
  {
    GradTape tape;
    std::vector<Var> vars;
    for (const auto& [n, t] : inputs) vars.push_back(tape.parameter(n, t));
    Var out = build(tape, vars);
    weights = out.value().numel() == 1 ? Tensor(out.shape(), 1.0f)
                                       : uniform_tensor(out.shape(), -1.0f, 1.0f, rng);
    Var loss = out.value().numel() == 1 ? out : ops::sum(ops::mul(out, tape.constant(weights)));
    analytic = tape.backward(loss);
  }

  auto evaluate = [&](const NamedTensors& probe) {
    GradTape tape;
    std::vector<Var> vars;
    for (const auto& [n, t] : probe) vars.push_back(tape.constant(t));
    return reduce(build(tape, vars).value());
  };

  NamedTensors work = inputs;
  for (size_t idx = 0; idx < work.size(); ++idx) {
    Tensor& t = work[idx].second;
    const Tensor& g = analytic.at(work[idx].first);
    std::vector<int64_t> order(static_cast<size_t>(t.numel()));
    for (int64_t i = 0; i < t.numel(); ++i) order[static_cast<size_t>(i)] = i;
    if (t.numel() > opt.max_probes) {
      std::shuffle(order.begin(), order.end(), rng);
      order.resize(static_cast<size_t>(opt.max_probes));
    }
    for (int64_t i : order) {
      const float orig = t[i];
      t[i] = orig + opt.epsilon;
      const double up = evaluate(work);
      t[i] = orig - opt.epsilon;
      const double down = evaluate(work);
      t[i] = orig;
      const double numeric = (up - down) / (2.0 * static_cast<double>(opt.epsilon));
      const double err = std::abs(numeric - g[i]);
      res.max_abs_error = std::max(res.max_abs_error, err);
      res.max_rel_error = std::max(res.max_rel_error, err / std::max(std::abs(numeric), 1e-12));
      if (err > opt.atol + opt.rtol * std::abs(numeric)) ++res.failures;
      ++res.probes;
    }
  }
  return res;
}

}  // namespace pcinpaint
