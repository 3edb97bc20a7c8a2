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

// Partial-convolution UNet.
//
// Encoder i (1-based) runs at H/2^(i-1) x W/2^(i-1): encoders after the first
// start with a 2x2 max pool of features and mask, then apply two partial
// convolutions, each followed by ReLU. The deepest decoder works on the
// deepest encoder output directly; every shallower decoder bilinearly
// upsamples the previous decoder output, nearest-upsamples its mask,
// concatenates the same-level encoder features and mask, and applies two
// partial convolutions with LeakyReLU. The topmost decoder has no
// activation on its final convolution and emits the output channels.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pcinpaint/ops.hpp"
#include "pcinpaint/pconv.hpp"

namespace pcinpaint {

struct UNetConfig {
  int64_t depth = 7;
  std::vector<int64_t> channels{64, 128, 256, 512, 512, 512, 512};
  std::vector<int64_t> kernels{7, 5, 3, 3, 3, 3, 3};
  float leaky_slope = 0.2f;
  int64_t in_channels = 3;
  int64_t out_channels = 3;
  // Decoders use partial convolutions; false switches them to plain
  // zero-padded convolutions.
  bool partial_decoders = true;
  // Both convolutions of the topmost decoder are linear; false keeps
  // LeakyReLU on its first convolution and drops activation on the last only.
  bool linear_top_decoder = true;

  // Small configuration used for CPU-scale training runs.
  static UNetConfig desk() {
    UNetConfig c;
    c.depth = 4;
    c.channels = {16, 32, 64, 64};
    c.kernels = {7, 5, 3, 3};
    return c;
  }

  int64_t divisor() const { return int64_t{1} << (depth - 1); }

  void validate() const {
    if (depth < 1) throw std::invalid_argument("UNet depth must be >= 1");
    if (static_cast<int64_t>(channels.size()) != depth || static_cast<int64_t>(kernels.size()) != depth) {
      throw std::invalid_argument("UNet config needs one channel count and one kernel size per level");
    }
    for (int64_t k : kernels) {
      if (k < 1 || k % 2 == 0) throw std::invalid_argument("UNet kernel sizes must be odd");
    }
    for (int64_t c : channels) {
      if (c < 1) throw std::invalid_argument("UNet channel counts must be positive");
    }
    if (in_channels < 1 || out_channels < 1) throw std::invalid_argument("UNet needs in/out channels");
    if (leaky_slope < 0.0f) throw std::invalid_argument("leaky slope must be non-negative");
  }

  void check_input(const Shape& image, const Shape& mask) const {
    if (image.c != in_channels) {
      throw ShapeError("UNet expects " + std::to_string(in_channels) + " input channels, got " + image.str());
    }
    if (image.h % divisor() != 0 || image.w % divisor() != 0 || image.h == 0 || image.w == 0) {
      throw ShapeError("UNet input " + std::to_string(image.h) + "x" + std::to_string(image.w) +
                       " must be divisible by " + std::to_string(divisor()));
    }
    if (mask != Shape{image.n, 1, image.h, image.w}) {
      throw ShapeError("UNet mask must be " + Shape{image.n, 1, image.h, image.w}.str() + ", got " + mask.str());
    }
  }
};

struct ConvSpec {
  std::string name;  // e.g. "enc3.conva"
  int64_t in_c, out_c, k;
};

// Layer plan in execution order.
inline std::vector<ConvSpec> unet_layers(const UNetConfig& cfg) {
  cfg.validate();
  std::vector<ConvSpec> specs;
  const auto& ch = cfg.channels;
  for (int64_t i = 1; i <= cfg.depth; ++i) {
    const int64_t in = i == 1 ? cfg.in_channels : ch[i - 2];
    const int64_t k = cfg.kernels[i - 1];
    specs.push_back({"enc" + std::to_string(i) + ".conva", in, ch[i - 1], k});
    specs.push_back({"enc" + std::to_string(i) + ".convb", ch[i - 1], ch[i - 1], k});
  }
  for (int64_t i = cfg.depth; i >= 1; --i) {
    const int64_t in = i == cfg.depth ? ch[i - 1] : 2 * ch[i - 1];
    const int64_t mid = i == 1 ? ch[0] : ch[i - 2];
    const int64_t out = i == 1 ? cfg.out_channels : mid;
    const int64_t k = cfg.kernels[i - 1];
    specs.push_back({"dec" + std::to_string(i) + ".conva", in, mid, k});
    specs.push_back({"dec" + std::to_string(i) + ".convb", mid, out, k});
  }
  return specs;
}

/// Network parameters addressable by name: "<layer>.weight" with shape
/// (out_c, in_c, k, k) and "<layer>.bias" with shape (1, out_c, 1, 1).
class UNetModel {
 public:
  UNetModel() = default;

  // Kaiming-uniform fan-in initialisation, zero biases.
  explicit UNetModel(UNetConfig cfg, uint64_t seed = 0) : config_(std::move(cfg)) {
    std::mt19937_64 rng(seed);
    for (const ConvSpec& s : unet_layers(config_)) {
      const float bound = std::sqrt(6.0f / static_cast<float>(s.in_c * s.k * s.k));
      params_.emplace_back(s.name + ".weight", uniform_tensor({s.out_c, s.in_c, s.k, s.k}, -bound, bound, rng));
      params_.emplace_back(s.name + ".bias", Tensor({1, s.out_c, 1, 1}));
    }
  }

  const UNetConfig& config() const { return config_; }
  UNetConfig& mutable_config() { return config_; }

  const std::vector<std::pair<std::string, Tensor>>& parameters() const { return params_; }
  std::vector<std::pair<std::string, Tensor>>& mutable_parameters() { return params_; }

  const Tensor& parameter(const std::string& name) const { return params_[index_of(name)].second; }
  Tensor& parameter(const std::string& name) { return params_[index_of(name)].second; }
  bool has_parameter(const std::string& name) const {
    return std::any_of(params_.begin(), params_.end(), [&](const auto& p) { return p.first == name; });
  }

  int64_t parameter_count() const {
    int64_t n = 0;
    for (const auto& [_, t] : params_) n += t.numel();
    return n;
  }

  bool operator==(const UNetModel& o) const { return params_ == o.params_; }

 private:
  size_t index_of(const std::string& name) const {
    for (size_t i = 0; i < params_.size(); ++i) {
      if (params_[i].first == name) return i;
    }
    throw std::out_of_range("no UNet parameter named " + name);
  }

  UNetConfig config_;
  std::vector<std::pair<std::string, Tensor>> params_;
};

using ParamVars = std::map<std::string, Var>;

// Puts the model parameters on the tape: as named trainable leaves when
// `trainable`, otherwise as constants.
inline ParamVars bind_parameters(const UNetModel& model, GradTape& tape, bool trainable) {
  ParamVars vars;
  for (const auto& [name, t] : model.parameters()) {
    vars.emplace(name, trainable ? tape.parameter(name, t) : tape.constant(t));
  }
  return vars;
}

struct UNetOutput {
  Var image;
  Tensor mask;
  std::vector<Shape> encoder_shapes;  // feature shape per level, shallow to deep
  std::vector<Shape> decoder_shapes;  // deep to shallow
  std::vector<Tensor> encoder_masks;  // mask after each encoder level
};

namespace detail {

inline PartialConvOutput unet_conv(const UNetConfig& cfg, const ParamVars& p, const std::string& layer,
                                   const Var& x, const Tensor& mask, bool partial) {
  const Var& w = p.at(layer + ".weight");
  const Var& b = p.at(layer + ".bias");
  if (partial) return pconv_forward(x, mask, w, b);
  (void)cfg;
  Var y = ops::conv2d(x, w, b, (w.shape().h - 1) / 2);
  return {y, Tensor({mask.shape().n, 1, mask.shape().h, mask.shape().w}, 1.0f)};
}

inline void expect_level_size(const Shape& s, const Shape& image, int64_t level) {
  const int64_t f = int64_t{1} << (level - 1);
  if (s.h != image.h / f || s.w != image.w / f) {
    throw std::logic_error("UNet level " + std::to_string(level) + " has size " + s.str() +
                           ", expected H/" + std::to_string(f));
  }
}

inline Tensor concat_masks(const Tensor& a, int64_t ca, const Tensor& b, int64_t cb) {
  GradTape scratch;
  return ops::concat_channels(scratch.constant(expand_channels(a, ca)), scratch.constant(expand_channels(b, cb)))
      .value();
}

}  // namespace detail

/// Forward pass. Hole pixels of `image` are expected to be zero already
/// (see zero_holes); `mask` is (n, 1, h, w) with 1 = valid.
inline UNetOutput unet_forward(const UNetModel& model, const ParamVars& p, const Var& image,
                               const Tensor& mask) {
  const UNetConfig& cfg = model.config();
  const Shape in = image.shape();
  cfg.check_input(in, mask.shape());
  if (!is_binary(mask)) throw std::invalid_argument("UNet mask values must be 0 or 1");

  UNetOutput res;
  std::vector<Var> skips;
  Var feat = image;
  Tensor m = mask;
  for (int64_t i = 1; i <= cfg.depth; ++i) {
    const std::string enc = "enc" + std::to_string(i);
    if (i > 1) {
      feat = ops::maxpool2(feat);
      m = pool_mask(m);
    }
    detail::expect_level_size(feat.shape(), in, i);
    auto a = detail::unet_conv(cfg, p, enc + ".conva", feat, m, true);
    auto b = detail::unet_conv(cfg, p, enc + ".convb", ops::relu(a.features), a.mask, true);
    feat = ops::relu(b.features);
    m = std::move(b.mask);
    skips.push_back(feat);
    res.encoder_masks.push_back(m);
    res.encoder_shapes.push_back(feat.shape());
  }

  Var dec = skips.back();
  Tensor dm = m;
  for (int64_t i = cfg.depth; i >= 1; --i) {
    const std::string name = "dec" + std::to_string(i);
    Var x = dec;
    Tensor xm = dm;
    if (i < cfg.depth) {
      Var up = ops::upsample2(dec, kernels::UpsampleMode::kBilinear);
      const Tensor up_mask = upsample_mask(dm);
      const Var& skip = skips[static_cast<size_t>(i - 1)];
      x = ops::concat_channels(up, skip);
      xm = detail::concat_masks(up_mask, up.shape().c, res.encoder_masks[static_cast<size_t>(i - 1)],
                                skip.shape().c);
    }
    detail::expect_level_size(x.shape(), in, i);
    const bool top = i == 1;
    auto a = detail::unet_conv(cfg, p, name + ".conva", x, xm, cfg.partial_decoders);
    Var fa = top && cfg.linear_top_decoder ? a.features : ops::leaky_relu(a.features, cfg.leaky_slope);
    auto b = detail::unet_conv(cfg, p, name + ".convb", fa, a.mask, cfg.partial_decoders);
    dec = top ? b.features : ops::leaky_relu(b.features, cfg.leaky_slope);
    dm = std::move(b.mask);
    res.decoder_shapes.push_back(dec.shape());
  }
  res.image = dec;
  res.mask = std::move(dm);
  return res;
}

// Inference without gradients.
inline std::pair<Tensor, Tensor> unet_infer(const UNetModel& model, const Tensor& image, const Tensor& mask) {
  GradTape tape;
  auto params = bind_parameters(model, tape, false);
  auto out = unet_forward(model, params, tape.constant(image), mask);
  return {out.image.value(), std::move(out.mask)};
}

/// Mask propagation through the encoder alone (no features): the mask after
/// each encoder level.
inline std::vector<Tensor> encoder_mask_cascade(const UNetConfig& cfg, const Tensor& mask) {
  cfg.validate();
  std::vector<Tensor> out;
  Tensor m = mask;
  for (int64_t i = 1; i <= cfg.depth; ++i) {
    if (i > 1) m = pool_mask(m);
    m = mask_update(mask_update(m, cfg.kernels[i - 1]), cfg.kernels[i - 1]);
    out.push_back(m);
  }
  return out;
}

// I_comp = M * I_gt + (1 - M) * I_out, with a (n,1,h,w) mask.
inline Var composite(const Var& output, const Var& ground_truth, const Tensor& mask) {
  require_same_shape(output.value(), ground_truth.value(), "composite");
  GradTape& tape = output.tape();
  const Tensor keep = expand_channels(mask, output.shape().c);
  Tensor fill(keep.shape());
  for (int64_t i = 0; i < keep.numel(); ++i) fill[i] = 1.0f - keep[i];
  return ops::add(ops::mul(tape.constant(keep), ground_truth), ops::mul(tape.constant(fill), output));
}

inline Tensor composite(const Tensor& output, const Tensor& ground_truth, const Tensor& mask) {
  GradTape tape;
  return composite(tape.constant(output), tape.constant(ground_truth), mask).value();
}

// Zeroes hole pixels of an image batch.
inline Tensor zero_holes(const Tensor& image, const Tensor& mask) {
  Tensor out = image;
  const Tensor m = expand_channels(mask, image.shape().c);
  require_same_shape(out, m, "zero_holes");
  for (int64_t i = 0; i < out.numel(); ++i) out[i] *= m[i];
  return out;
}

}  // namespace pcinpaint
