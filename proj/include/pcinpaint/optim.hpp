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

#pragma once

#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "pcinpaint/tensor.hpp"

namespace pcinpaint {

struct AdamConfig {
  float lr = 2e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

// Adam with bias correction. Moments are keyed by parameter name and can be
// exported for checkpoints.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }
  void set_lr(float lr) { cfg_.lr = lr; }
  int64_t step_count() const { return t_; }

  void step(std::vector<std::pair<std::string, Tensor>>& params, const std::map<std::string, Tensor>& grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(static_cast<double>(cfg_.beta1), static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(static_cast<double>(cfg_.beta2), static_cast<double>(t_));
    for (auto& [name, p] : params) {
      auto g = grads.find(name);
      if (g == grads.end()) continue;
      require_same_shape(p, g->second, "adam");
      auto [it, fresh] = moments_.try_emplace(name, Tensor(p.shape()), Tensor(p.shape()));
      Tensor& m = it->second.first;
      Tensor& v = it->second.second;
      for (int64_t i = 0; i < p.numel(); ++i) {
        const float gi = g->second[i];
        m[i] = cfg_.beta1 * m[i] + (1.0f - cfg_.beta1) * gi;
        v[i] = cfg_.beta2 * v[i] + (1.0f - cfg_.beta2) * gi * gi;
        const double mh = m[i] / bc1, vh = v[i] / bc2;
        p[i] -= static_cast<float>(cfg_.lr * mh / (std::sqrt(vh) + cfg_.eps));
      }
    }
  }

  /// "adam.m/<name>", "adam.v/<name>" and "adam.step" tensors.
  std::vector<std::pair<std::string, Tensor>> state() const {
    std::vector<std::pair<std::string, Tensor>> out;
    out.emplace_back("adam.step", Tensor({1, 1, 1, 1}, static_cast<float>(t_)));
    for (const auto& [name, mv] : moments_) {
      out.emplace_back("adam.m/" + name, mv.first);
      out.emplace_back("adam.v/" + name, mv.second);
    }
    return out;
  }

  void load_state(const std::vector<std::pair<std::string, Tensor>>& tensors) {
    moments_.clear();
    t_ = 0;
    for (const auto& [key, t] : tensors) {
      if (key == "adam.step") {
        t_ = static_cast<int64_t>(t.item());
      } else if (key.rfind("adam.m/", 0) == 0) {
        moments_[key.substr(7)].first = t;
      } else if (key.rfind("adam.v/", 0) == 0) {
        moments_[key.substr(7)].second = t;
      }
    }
  }

 private:
  AdamConfig cfg_;
  int64_t t_ = 0;
  std::map<std::string, std::pair<Tensor, Tensor>> moments_;
};

/// Learning rate for 1-based step `it` of `total`: constant, or cosine
/// annealing from `base` down to `base * floor`.
inline float scheduled_lr(float base, int64_t it, int64_t total, bool cosine, float floor = 0.01f) {
  if (!cosine || total <= 1) return base;
  const double t = static_cast<double>(it - 1) / static_cast<double>(total - 1);
  const double f = floor + (1.0 - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
  return static_cast<float>(base * f);
}

}  // namespace pcinpaint
