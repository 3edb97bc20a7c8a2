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

// Image quality metrics on the 0-255 scale and the table-shaped report.
//
//   l1    sum of |a - b| over every pixel and channel
//   mse   mean of (a - b)^2 per element
//   psnr  10 log10(255^2 / mse), capped at 100 dB
//   ssim  11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03, L = 255,
//         averaged over valid window positions, then over channels
//
// Datasets aggregate by averaging per-image values, so the mean PSNR is not
// the PSNR of the mean MSE.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "pcinpaint/tensor.hpp"

namespace pcinpaint {

inline constexpr double kPeak = 255.0;
inline constexpr double kPsnrCap = 100.0;

/// [0,1] floats to 8-bit levels (round half up, clamped), kept as floats.
inline Tensor to_255(const Tensor& t) {
  Tensor out(t.shape());
  for (int64_t i = 0; i < t.numel(); ++i) {
    const float v = std::clamp(t[i], 0.0f, 1.0f);
    out[i] = std::floor(v * 255.0f + 0.5f);
  }
  return out;
}

inline double l1_sum(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "l1_sum");
  double s = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) s += std::abs(static_cast<double>(a[i]) - b[i]);
  return s;
}

inline double mse(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mse");
  if (a.numel() == 0) throw ShapeError("mse of empty tensors");
  double s = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.numel());
}

inline double psnr(double mse_value) {
  if (mse_value < kPeak * kPeak * 1e-10) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(kPeak * kPeak / mse_value));
}

namespace detail {

inline constexpr int kSsimWindow = 11;

inline std::array<double, kSsimWindow> ssim_kernel() {
  std::array<double, kSsimWindow> g{};
  double total = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - kSsimWindow / 2;
    g[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    total += g[static_cast<size_t>(i)];
  }
  for (double& v : g) v /= total;
  return g;
}

// Separable "valid" Gaussian filter of an h x w plane.
inline std::vector<double> gauss_valid(const std::vector<double>& x, int64_t h, int64_t w) {
  static const auto g = ssim_kernel();
  const int64_t oh = h - kSsimWindow + 1, ow = w - kSsimWindow + 1;
  std::vector<double> rows(static_cast<size_t>(h * ow));
  for (int64_t y = 0; y < h; ++y)
    for (int64_t c = 0; c < ow; ++c) {
      double s = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) s += g[static_cast<size_t>(k)] * x[static_cast<size_t>(y * w + c + k)];
      rows[static_cast<size_t>(y * ow + c)] = s;
    }
  std::vector<double> out(static_cast<size_t>(oh * ow));
  for (int64_t r = 0; r < oh; ++r)
    for (int64_t c = 0; c < ow; ++c) {
      double s = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) s += g[static_cast<size_t>(k)] * rows[static_cast<size_t>((r + k) * ow + c)];
      out[static_cast<size_t>(r * ow + c)] = s;
    }
  return out;
}

}  // namespace detail

/// SSIM map of one channel plane, (h-10) x (w-10).
inline std::vector<double> ssim_map(const Tensor& a, const Tensor& b, int64_t n, int64_t c) {
  const Shape s = a.shape();
  const int64_t hw = s.plane();
  std::vector<double> x(static_cast<size_t>(hw)), y(x.size()), xx(x.size()), yy(x.size()), xy(x.size());
  const float* pa = a.ptr() + a.offset(n, c, 0, 0);
  const float* pb = b.ptr() + b.offset(n, c, 0, 0);
  for (int64_t i = 0; i < hw; ++i) {
    const auto u = static_cast<size_t>(i);
    x[u] = pa[i];
    y[u] = pb[i];
    xx[u] = x[u] * x[u];
    yy[u] = y[u] * y[u];
    xy[u] = x[u] * y[u];
  }
  const auto mx = detail::gauss_valid(x, s.h, s.w), my = detail::gauss_valid(y, s.h, s.w);
  const auto sxx = detail::gauss_valid(xx, s.h, s.w), syy = detail::gauss_valid(yy, s.h, s.w);
  const auto sxy = detail::gauss_valid(xy, s.h, s.w);
  const double c1 = (0.01 * kPeak) * (0.01 * kPeak), c2 = (0.03 * kPeak) * (0.03 * kPeak);
  std::vector<double> out(mx.size());
  for (size_t i = 0; i < out.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cov = sxy[i] - mx[i] * my[i];
    out[i] = ((2 * (mx[i] * my[i]) + c1) * (2 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return out;
}

/// Mean SSIM of single images (n = 1) on the 0-255 scale. With `region`
/// (1,1,h,w), only windows centred on nonzero region pixels count.
inline double ssim(const Tensor& a, const Tensor& b, const Tensor* region = nullptr) {
  require_same_shape(a, b, "ssim");
  const Shape s = a.shape();
  if (s.n != 1) throw ShapeError("ssim expects a single image, got " + s.str());
  if (s.h < detail::kSsimWindow || s.w < detail::kSsimWindow) {
    throw ShapeError("ssim needs at least 11x11 pixels, got " + s.str());
  }
  if (region && region->shape() != Shape{1, 1, s.h, s.w}) throw ShapeError("ssim region shape " + region->shape().str());
  const int64_t ow = s.w - detail::kSsimWindow + 1;
  const int64_t half = detail::kSsimWindow / 2;
  double total = 0.0;
  int64_t count = 0;
  for (int64_t c = 0; c < s.c; ++c) {
    const auto map = ssim_map(a, b, 0, c);
    for (size_t i = 0; i < map.size(); ++i) {
      if (region) {
        const int64_t r = static_cast<int64_t>(i) / ow, col = static_cast<int64_t>(i) % ow;
        if (region->at(0, 0, r + half, col + half) == 0.0f) continue;
      }
      total += map[i];
      ++count;
    }
  }
  return count ? total / static_cast<double>(count) : 1.0;
}

struct ImageMetrics {
  double l1 = 0, mse = 0, psnr = 0, ssim = 0;
};

enum class MetricRegion { kFull, kHole };

/// All four metrics for one image pair given in [0,1] (quantised to 8 bits
/// first). `mask` (1,1,h,w) with 1 = valid is only needed for kHole.
inline ImageMetrics compute_metrics(const Tensor& out01, const Tensor& gt01, const Tensor* mask = nullptr,
                                    MetricRegion region = MetricRegion::kFull) {
  const Tensor a = to_255(out01), b = to_255(gt01);
  ImageMetrics m;
  if (region == MetricRegion::kFull) {
    m.l1 = l1_sum(a, b);
    m.mse = mse(a, b);
    m.psnr = psnr(m.mse);
    m.ssim = ssim(a, b);
    return m;
  }
  if (!mask) throw std::invalid_argument("hole-only metrics need a mask");
  const Tensor keep = expand_channels(*mask, a.shape().c);
  require_same_shape(a, keep, "hole metrics");
  double se = 0.0;
  int64_t n = 0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    if (keep[i] != 0.0f) continue;
    const double d = static_cast<double>(a[i]) - b[i];
    m.l1 += std::abs(d);
    se += d * d;
    ++n;
  }
  m.mse = n ? se / static_cast<double>(n) : 0.0;
  m.psnr = psnr(m.mse);
  Tensor hole(mask->shape());
  for (int64_t i = 0; i < hole.numel(); ++i) hole[i] = (*mask)[i] == 0.0f ? 1.0f : 0.0f;
  m.ssim = ssim(a, b, &hole);
  return m;
}

/// PSNR of the hole pixels only, on [0,1] images (no quantisation).
inline double hole_psnr(const Tensor& out01, const Tensor& gt01, const Tensor& mask) {
  const Tensor keep = expand_channels(mask, out01.shape().c);
  require_same_shape(out01, gt01, "hole_psnr");
  require_same_shape(out01, keep, "hole_psnr");
  double se = 0.0;
  int64_t n = 0;
  for (int64_t i = 0; i < out01.numel(); ++i) {
    if (keep[i] != 0.0f) continue;
    const double d = kPeak * (static_cast<double>(out01[i]) - gt01[i]);
    se += d * d;
    ++n;
  }
  return n ? psnr(se / static_cast<double>(n)) : kPsnrCap;
}

inline std::string method_label(const std::string& method) {
  static const std::map<std::string, std::string> labels{{"pconv", "PConv"},
                                                         {"pconv_no_style", "PConv, no Style Loss"},
                                                         {"pconv_no_perceptual", "PConv, no Perceptual Loss"},
                                                         {"ns", "Classical Method"}};
  auto it = labels.find(method);
  return it == labels.end() ? method : it->second;
}

inline std::string ratio_key(double r) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", r);
  return buf;
}

struct ImageRecord {
  std::string method;
  std::string image;
  double ratio_bucket = 0;  // requested hole ratio
  double mask_ratio = 0;    // achieved hole ratio
  ImageMetrics metrics;
};

/// Per-image records plus per-method, per-ratio means. Rows keep the order
/// in which methods first appear.
class MetricsReport {
 public:
  struct Cell {
    ImageMetrics mean;
    double mask_ratio = 0;
    int64_t count = 0;
  };

  void add(ImageRecord r) {
    if (std::find(methods_.begin(), methods_.end(), r.method) == methods_.end()) methods_.push_back(r.method);
    if (std::find(ratios_.begin(), ratios_.end(), r.ratio_bucket) == ratios_.end()) {
      ratios_.push_back(r.ratio_bucket);
      std::sort(ratios_.begin(), ratios_.end());
    }
    records_.push_back(std::move(r));
  }

  const std::vector<ImageRecord>& records() const { return records_; }
  const std::vector<std::string>& methods() const { return methods_; }
  const std::vector<double>& ratios() const { return ratios_; }

  Cell cell(const std::string& method, double ratio) const {
    Cell c;
    for (const auto& r : records_) {
      if (r.method != method || r.ratio_bucket != ratio) continue;
      c.mean.l1 += r.metrics.l1;
      c.mean.mse += r.metrics.mse;
      c.mean.psnr += r.metrics.psnr;
      c.mean.ssim += r.metrics.ssim;
      c.mask_ratio += r.mask_ratio;
      ++c.count;
    }
    if (c.count) {
      const double k = 1.0 / static_cast<double>(c.count);
      c.mean.l1 *= k;
      c.mean.mse *= k;
      c.mean.psnr *= k;
      c.mean.ssim *= k;
      c.mask_ratio *= k;
    }
    return c;
  }

  nlohmann::json to_json(bool include_images = true) const {
    nlohmann::json j;
    j["metrics"] = {"l1", "mse", "psnr", "ssim"};
    j["ratios"] = ratios_;
    j["rows"] = nlohmann::json::array();
    for (const auto& m : methods_) {
      nlohmann::json row{{"method", m}, {"label", method_label(m)}};
      nlohmann::json cols = nlohmann::json::object();
      for (double r : ratios_) {
        const Cell c = cell(m, r);
        if (!c.count) continue;
        cols[ratio_key(r)] = {{"l1", c.mean.l1},     {"mse", c.mean.mse},          {"psnr", c.mean.psnr},
                              {"ssim", c.mean.ssim}, {"mask_ratio", c.mask_ratio}, {"count", c.count}};
      }
      row["values"] = std::move(cols);
      j["rows"].push_back(std::move(row));
    }
    if (include_images) {
      j["images"] = nlohmann::json::array();
      for (const auto& r : records_) {
        j["images"].push_back({{"method", r.method},
                               {"image", r.image},
                               {"ratio", r.ratio_bucket},
                               {"mask_ratio", r.mask_ratio},
                               {"l1", r.metrics.l1},
                               {"mse", r.metrics.mse},
                               {"psnr", r.metrics.psnr},
                               {"ssim", r.metrics.ssim}});
      }
    }
    return j;
  }

  /// Plain-text table: one row per method, l1/mse/psnr/ssim per ratio.
  std::string to_table() const {
    std::string out = "method";
    for (double r : ratios_) {
      for (const char* m : {"l1", "mse", "psnr", "ssim"}) out += "\t" + std::string(m) + "@" + ratio_key(r);
    }
    out += "\n";
    char buf[64];
    for (const auto& m : methods_) {
      out += method_label(m);
      for (double r : ratios_) {
        const Cell c = cell(m, r);
        for (double v : {c.mean.l1, c.mean.mse, c.mean.psnr, c.mean.ssim}) {
          std::snprintf(buf, sizeof(buf), "\t%.3g", v);
          out += c.count ? buf : "\t-";
        }
      }
      out += "\n";
    }
    return out;
  }

 private:
  std::vector<std::string> methods_;
  std::vector<double> ratios_;
  std::vector<ImageRecord> records_;
};

}  // namespace pcinpaint
