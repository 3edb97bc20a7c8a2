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

// Inpainting losses. All L1-style reductions are means, so weights do not
// depend on resolution.

#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pcinpaint/ops.hpp"
#include "pcinpaint/pconv.hpp"
#include "pcinpaint/unet.hpp"

namespace pcinpaint {

struct FeatureNetConfig {
  // VGG-16 layout up to pool3; one tap after each pool.
  std::vector<int64_t> stage_channels{64, 128, 256};
  std::vector<int64_t> convs_per_stage{2, 2, 3};
  std::array<float, 3> mean{0.485f, 0.456f, 0.406f};
  std::array<float, 3> stddev{0.229f, 0.224f, 0.225f};
  uint64_t seed = 1234;
  std::string weights_path;  // empty: seeded initialisation

  static FeatureNetConfig desk() {
    FeatureNetConfig c;
    c.stage_channels = {8, 16, 32};
    c.convs_per_stage = {2, 2, 2};
    return c;
  }

  void validate() const {
    if (stage_channels.empty() || stage_channels.size() != convs_per_stage.size()) {
      throw std::invalid_argument("feature network needs matching stage_channels / convs_per_stage");
    }
    for (int64_t c : convs_per_stage) {
      if (c < 1) throw std::invalid_argument("feature network stages need at least one conv");
    }
    for (float s : stddev) {
      if (!(s > 0.0f)) throw std::invalid_argument("feature network stddev must be positive");
    }
  }
};

/// Frozen conv/ReLU/maxpool stack. Parameters are named
/// "feat<s>.conv<j>.weight|bias" (1-based). They only ever enter a tape as
/// constants, so gradients flow through them to the image but never into
/// them.
class FeatureNetwork {
 public:
  FeatureNetwork() : FeatureNetwork(FeatureNetConfig::desk()) {}

  explicit FeatureNetwork(FeatureNetConfig cfg) : config_(std::move(cfg)) {
    config_.validate();
    std::mt19937_64 rng(config_.seed);
    int64_t in = 3;
    for (size_t s = 0; s < config_.stage_channels.size(); ++s) {
      const int64_t out = config_.stage_channels[s];
      for (int64_t j = 0; j < config_.convs_per_stage[s]; ++j) {
        const std::string name = "feat" + std::to_string(s + 1) + ".conv" + std::to_string(j + 1);
        const float bound = std::sqrt(6.0f / static_cast<float>(in * 9));
        params_.emplace_back(name + ".weight", uniform_tensor({out, in, 3, 3}, -bound, bound, rng));
        params_.emplace_back(name + ".bias", Tensor({1, out, 1, 1}));
        in = out;
      }
    }
  }

  const FeatureNetConfig& config() const { return config_; }
  size_t tap_count() const { return config_.stage_channels.size(); }
  int64_t divisor() const { return int64_t{1} << tap_count(); }
  const std::vector<std::pair<std::string, Tensor>>& parameters() const { return params_; }
  std::vector<std::pair<std::string, Tensor>>& mutable_parameters() { return params_; }

  struct Bound {
    std::vector<Var> params;  // weight, bias, weight, bias, ...
  };

  Bound bind(GradTape& tape) const {
    Bound b;
    for (const auto& [_, t] : params_) b.params.push_back(tape.constant(t));
    return b;
  }

  /// Activation maps after each pool, shallow to deep.
  std::vector<Var> taps(const Bound& bound, const Var& image) const {
    const Shape& s = image.shape();
    if (s.c != 3) throw ShapeError("feature network expects 3-channel images, got " + s.str());
    if (s.h % divisor() != 0 || s.w % divisor() != 0) {
      throw ShapeError("feature network input must be divisible by " + std::to_string(divisor()));
    }
    std::array<float, 3> scale{}, shift{};
    for (int c = 0; c < 3; ++c) {
      scale[c] = 1.0f / config_.stddev[c];
      shift[c] = -config_.mean[c] / config_.stddev[c];
    }
    Var x = ops::channel_affine(image, scale, shift);
    std::vector<Var> out;
    size_t p = 0;
    for (size_t st = 0; st < config_.stage_channels.size(); ++st) {
      for (int64_t j = 0; j < config_.convs_per_stage[st]; ++j, p += 2) {
        x = ops::relu(ops::conv2d(x, bound.params[p], bound.params[p + 1], 1));
      }
      x = ops::maxpool2(x);
      out.push_back(x);
    }
    return out;
  }

 private:
  FeatureNetConfig config_;
  std::vector<std::pair<std::string, Tensor>> params_;
};

struct LossWeights {
  float tv = 0.1f;
  float valid = 1.0f;
  float hole = 6.0f;
  float perceptual = 0.05f;
  float style = 120.0f;
  bool use_perceptual = true;
  bool use_style = true;
  // Restrict TV to the one-pixel dilation of the hole region.
  bool tv_hole_only = false;

  void validate() const {
    for (float v : {tv, valid, hole, perceptual, style}) {
      if (!(v >= 0.0f) || !std::isfinite(v)) {
        throw std::invalid_argument("loss weights must be finite and non-negative");
      }
    }
  }
  float effective_perceptual() const { return use_perceptual ? perceptual : 0.0f; }
  float effective_style() const { return use_style ? style : 0.0f; }
};

/// Anisotropic total variation in mean form:
/// (sum |I[i,j+1]-I[i,j]| + sum |I[i+1,j]-I[i,j]|) / numel.
/// With `region` (n,1,h,w), only pairs whose both pixels lie in the region count.
inline Var tv_loss(const Var& image, const Tensor* region = nullptr) {
  const Shape s = image.shape();
  if (region && region->shape() != Shape{s.n, 1, s.h, s.w}) {
    throw ShapeError("tv_loss: region must be " + Shape{s.n, 1, s.h, s.w}.str());
  }
  auto keep = std::make_shared<Tensor>(region ? *region : Tensor({s.n, 1, s.h, s.w}, 1.0f));
  const Tensor& x = image.value();
  double acc = 0.0;
  for (int64_t n = 0; n < s.n; ++n) {
    const float* r = keep->plane(n, 0);
    for (int64_t c = 0; c < s.c; ++c) {
      const float* p = x.plane(n, c);
      for (int64_t y = 0; y < s.h; ++y) {
        for (int64_t xx = 0; xx < s.w; ++xx) {
          const int64_t i = y * s.w + xx;
          if (xx + 1 < s.w && r[i] != 0.0f && r[i + 1] != 0.0f) acc += std::abs(p[i + 1] - p[i]);
          if (y + 1 < s.h && r[i] != 0.0f && r[i + s.w] != 0.0f) acc += std::abs(p[i + s.w] - p[i]);
        }
      }
    }
  }
  const double norm = s.numel() > 0 ? 1.0 / static_cast<double>(s.numel()) : 0.0;
  return image.tape().record(
      Tensor::scalar(static_cast<float>(acc * norm)), {image}, [image, keep, norm](GradTape& t, const Tensor& g) {
        const Shape& s = image.shape();
        const float scale = static_cast<float>(g.item() * norm);
        auto sign = [](float d) { return d > 0.0f ? 1.0f : (d < 0.0f ? -1.0f : 0.0f); };
        Tensor& d = t.grad(image);
        for (int64_t n = 0; n < s.n; ++n) {
          const float* r = keep->plane(n, 0);
          for (int64_t c = 0; c < s.c; ++c) {
            const float* p = image.value().plane(n, c);
            float* q = d.plane(n, c);
            for (int64_t y = 0; y < s.h; ++y) {
              for (int64_t xx = 0; xx < s.w; ++xx) {
                const int64_t i = y * s.w + xx;
                if (xx + 1 < s.w && r[i] != 0.0f && r[i + 1] != 0.0f) {
                  const float sg = scale * sign(p[i + 1] - p[i]);
                  q[i + 1] += sg;
                  q[i] -= sg;
                }
                if (y + 1 < s.h && r[i] != 0.0f && r[i + s.w] != 0.0f) {
                  const float sg = scale * sign(p[i + s.w] - p[i]);
                  q[i + s.w] += sg;
                  q[i] -= sg;
                }
              }
            }
          }
        }
      });
}

// One-pixel dilation of the hole region of a (n,1,h,w) mask.
inline Tensor dilated_hole_region(const Tensor& mask) {
  Tensor holes(mask.shape());
  for (int64_t i = 0; i < mask.numel(); ++i) holes[i] = mask[i] == 0.0f ? 1.0f : 0.0f;
  return mask_update(holes, 3);
}

inline Var mean_abs_diff(const Var& a, const Var& b) { return ops::mean_abs(ops::sub(a, b)); }

/// Feature taps of I_out, I_comp and I_gt, shared by the perceptual and
/// style terms.
struct FeatureSet {
  std::vector<Var> out, comp, gt;
};

// Maps an image on the tape to its activation maps psi_0..psi_{N-1}.
using TapSource = std::function<std::vector<Var>(const Var&)>;

// Binds the network weights to `tape` once and returns its tap function.
inline TapSource tap_source(const FeatureNetwork& net, GradTape& tape) {
  auto bound = std::make_shared<FeatureNetwork::Bound>(net.bind(tape));
  return [&net, bound](const Var& image) { return net.taps(*bound, image); };
}

// psi_0 = the image itself.
inline TapSource identity_taps() {
  return [](const Var& image) { return std::vector<Var>{image}; };
}

inline FeatureSet extract_features(const TapSource& taps, const Var& out, const Var& comp, const Var& gt) {
  require_same_shape(out.value(), gt.value(), "feature extraction");
  require_same_shape(comp.value(), gt.value(), "feature extraction");
  return {taps(out), taps(comp), taps(gt)};
}

inline FeatureSet extract_features(const FeatureNetwork& net, const Var& out, const Var& comp, const Var& gt) {
  return extract_features(tap_source(net, out.tape()), out, comp, gt);
}

// sum_i mean|psi_i(out) - psi_i(gt)| + sum_i mean|psi_i(comp) - psi_i(gt)|
inline Var perceptual_loss(const FeatureSet& f) {
  std::vector<Var> terms;
  for (size_t i = 0; i < f.gt.size(); ++i) terms.push_back(mean_abs_diff(f.out[i], f.gt[i]));
  for (size_t i = 0; i < f.gt.size(); ++i) terms.push_back(mean_abs_diff(f.comp[i], f.gt[i]));
  std::vector<float> ones(terms.size(), 1.0f);
  return ops::weighted_sum(terms, ones);
}

inline Var perceptual_loss(const Var& out, const Var& comp, const Var& gt, const FeatureNetwork& net) {
  return perceptual_loss(extract_features(net, out, comp, gt));
}

// Per tap, mean absolute difference of Gram matrices, for both branches.
inline Var style_loss(const FeatureSet& f) {
  std::vector<Var> terms;
  std::vector<Var> gt_grams;
  for (const Var& g : f.gt) gt_grams.push_back(ops::gram(g));
  for (size_t i = 0; i < f.gt.size(); ++i) terms.push_back(mean_abs_diff(ops::gram(f.out[i]), gt_grams[i]));
  for (size_t i = 0; i < f.gt.size(); ++i) terms.push_back(mean_abs_diff(ops::gram(f.comp[i]), gt_grams[i]));
  std::vector<float> ones(terms.size(), 1.0f);
  return ops::weighted_sum(terms, ones);
}

inline Var style_loss(const Var& out, const Var& comp, const Var& gt, const FeatureNetwork& net) {
  return style_loss(extract_features(net, out, comp, gt));
}

struct HoleValid {
  Var hole;
  Var valid;
};

/// hole  = mean |(1 - M) * (I_out - I_gt)|,  valid = mean |M * (I_out - I_gt)|,
/// both averaged over the full element count.
inline HoleValid hole_valid_losses(const Var& out, const Var& gt, const Tensor& mask) {
  require_same_shape(out.value(), gt.value(), "hole_valid_losses");
  GradTape& tape = out.tape();
  const Tensor keep = expand_channels(mask, out.shape().c);
  Tensor holes(keep.shape());
  for (int64_t i = 0; i < keep.numel(); ++i) holes[i] = 1.0f - keep[i];
  Var diff = ops::sub(out, gt);
  return {ops::mean_abs(ops::mul(tape.constant(std::move(holes)), diff)),
          ops::mean_abs(ops::mul(tape.constant(keep), diff))};
}

struct LossBreakdown {
  Var total;
  double tv = 0, valid = 0, hole = 0, perceptual = 0, style = 0, total_value = 0;
};

/// Weighted total of the five terms. Terms whose effective weight is zero
/// (including switched-off ablations) are not computed and report 0.
inline LossBreakdown total_loss(const Var& out, const Var& gt, const Tensor& mask, const TapSource& taps,
                                const LossWeights& w) {
  w.validate();
  LossBreakdown r;
  std::vector<Var> terms;
  std::vector<float> lambdas;
  auto add = [&](const Var& v, float lambda, double& slot) {
    slot = v.value().item();
    terms.push_back(v);
    lambdas.push_back(lambda);
  };
  Var comp = composite(out, gt, mask);
  if (w.tv > 0.0f) {
    if (w.tv_hole_only) {
      const Tensor region = dilated_hole_region(mask);
      add(tv_loss(comp, &region), w.tv, r.tv);
    } else {
      add(tv_loss(comp), w.tv, r.tv);
    }
  }
  if (w.valid > 0.0f || w.hole > 0.0f) {
    auto hv = hole_valid_losses(out, gt, mask);
    if (w.valid > 0.0f) add(hv.valid, w.valid, r.valid);
    if (w.hole > 0.0f) add(hv.hole, w.hole, r.hole);
  }
  const float lp = w.effective_perceptual(), ls = w.effective_style();
  if (lp > 0.0f || ls > 0.0f) {
    FeatureSet f = extract_features(taps, out, comp, gt);
    if (lp > 0.0f) add(perceptual_loss(f), lp, r.perceptual);
    if (ls > 0.0f) add(style_loss(f), ls, r.style);
  }
  if (terms.empty()) {
    r.total = ops::scalar_mul(ops::sum(out), 0.0f);
  } else {
    r.total = ops::weighted_sum(terms, lambdas);
  }
  r.total_value = r.total.value().item();
  return r;
}

inline LossBreakdown total_loss(const Var& out, const Var& gt, const Tensor& mask, const FeatureNetwork& net,
                                const LossWeights& w) {
  return total_loss(out, gt, mask, tap_source(net, out.tape()), w);
}

}  // namespace pcinpaint
