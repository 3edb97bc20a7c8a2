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

// Irregular brush-stroke masks at a requested hole ratio.
//
// Strokes are random-walk polylines painted as a trail of discs, one pixel
// step at a time. Painting stops at the pixel where the hole count reaches
// ceil(ratio * h * w); the last disc is filled from its centre outwards.
// 1 = valid, 0 = hole.

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "pcinpaint/tensor.hpp"

namespace pcinpaint {

struct MaskSpec {
  double ratio = 0.1;
  int64_t height = 256;
  int64_t width = 256;
  uint64_t seed = 0;
  // Brush widths and segment lengths in pixels at 256x256; scaled linearly
  // with the shorter image side.
  double min_width = 5, max_width = 30;
  int min_vertices = 4, max_vertices = 12;
  double max_segment = 60;
  double tolerance = 0.01;
  int max_strokes = 10000;
};

class MaskGenError : public std::runtime_error {
 public:
  MaskGenError(const std::string& msg, double achieved) : std::runtime_error(msg), achieved_(achieved) {}
  double achieved() const { return achieved_; }

 private:
  double achieved_;
};

inline Tensor generate_mask(const MaskSpec& spec) {
  if (!(spec.ratio > 0.0 && spec.ratio < 0.9)) {
    throw std::invalid_argument("mask ratio must lie in (0, 0.9), got " + std::to_string(spec.ratio));
  }
  if (spec.height < 1 || spec.width < 1) throw std::invalid_argument("mask size must be positive");
  if (!(spec.min_width > 0 && spec.max_width >= spec.min_width && spec.min_vertices >= 2 &&
        spec.max_vertices >= spec.min_vertices && spec.max_segment > 0)) {
    throw std::invalid_argument("invalid brush parameters");
  }
  const int64_t h = spec.height, w = spec.width;
  const double scale = static_cast<double>(std::min(h, w)) / 256.0;
  const int64_t target = static_cast<int64_t>(std::ceil(spec.ratio * static_cast<double>(h * w)));
  Tensor m({1, 1, h, w}, 1.0f);
  int64_t holes = 0;

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_int_distribution<int> verts(spec.min_vertices, spec.max_vertices);

  // New hole pixels of one disc, nearest the centre first, so a stamp that
  // would overshoot the target stops exactly at it.
  std::vector<std::tuple<double, int64_t, int64_t>> fresh;
  auto stamp = [&](double cy, double cx, double radius) {
    const int64_t y0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(cy - radius)));
    const int64_t y1 = std::min<int64_t>(h - 1, static_cast<int64_t>(std::ceil(cy + radius)));
    const int64_t x0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(cx - radius)));
    const int64_t x1 = std::min<int64_t>(w - 1, static_cast<int64_t>(std::ceil(cx + radius)));
    fresh.clear();
    for (int64_t y = y0; y <= y1; ++y)
      for (int64_t x = x0; x <= x1; ++x) {
        const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
        const double d2 = dy * dy + dx * dx;
        if (d2 <= radius * radius && m.at(0, 0, y, x) == 1.0f) fresh.emplace_back(d2, y, x);
      }
    if (holes + static_cast<int64_t>(fresh.size()) > target) std::sort(fresh.begin(), fresh.end());
    for (const auto& [d2, y, x] : fresh) {
      if (holes >= target) break;
      m.at(0, 0, y, x) = 0.0f;
      ++holes;
    }
  };

  for (int stroke = 0; stroke < spec.max_strokes && holes < target; ++stroke) {
    const double width = std::max(1.0, scale * (spec.min_width + u01(rng) * (spec.max_width - spec.min_width)));
    const double radius = width / 2.0;
    double y = u01(rng) * static_cast<double>(h - 1), x = u01(rng) * static_cast<double>(w - 1);
    double angle = u01(rng) * 2.0 * std::numbers::pi;
    const int n = verts(rng);
    stamp(y, x, radius);
    for (int v = 1; v < n && holes < target; ++v) {
      angle += (u01(rng) - 0.5) * std::numbers::pi;  // turn by up to +-90 degrees
      const double len = std::max(1.0, scale * spec.max_segment * (0.25 + 0.75 * u01(rng)));
      const double ny = std::clamp(y + len * std::sin(angle), 0.0, static_cast<double>(h - 1));
      const double nx = std::clamp(x + len * std::cos(angle), 0.0, static_cast<double>(w - 1));
      const double dist = std::hypot(ny - y, nx - x);
      const int steps = std::max(1, static_cast<int>(std::ceil(dist)));
      for (int s = 1; s <= steps && holes < target; ++s) {
        const double t = static_cast<double>(s) / steps;
        stamp(y + t * (ny - y), x + t * (nx - x), radius);
      }
      y = ny;
      x = nx;
    }
  }
  const double achieved = hole_ratio(m);
  if (std::abs(achieved - spec.ratio) > spec.tolerance) {
    std::ostringstream msg;
    msg << "could not reach hole ratio " << spec.ratio << " on " << h << "x" << w << " (achieved " << achieved
        << ")";
    throw MaskGenError(msg.str(), achieved);
  }
  return m;
}

}  // namespace pcinpaint
