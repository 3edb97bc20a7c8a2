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

// Seeded procedural RGB scenes for smoke runs without a photo dataset: a
// two-colour linear gradient, a few soft Gaussian blobs and a faint
// low-frequency ripple.

#pragma once

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "pcinpaint/image_io.hpp"

namespace pcinpaint {

inline Tensor synth_image(int64_t h, int64_t w, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double size = static_cast<double>(std::min(h, w));
  double c0[3], c1[3];
  for (int c = 0; c < 3; ++c) {
    c0[c] = 0.15 + 0.7 * u(rng);
    c1[c] = 0.15 + 0.7 * u(rng);
  }
  const double angle = 2.0 * std::numbers::pi * u(rng);
  const double gx = std::cos(angle), gy = std::sin(angle);

  struct Blob {
    double y, x, r, amp[3];
  };
  std::vector<Blob> blobs(3 + static_cast<size_t>(u(rng) * 3));
  for (auto& b : blobs) {
    b.y = u(rng) * static_cast<double>(h);
    b.x = u(rng) * static_cast<double>(w);
    b.r = size * (0.08 + 0.17 * u(rng));
    for (double& a : b.amp) a = 0.6 * (u(rng) - 0.5);
  }
  const double fy = 2.0 * std::numbers::pi * (1 + 2 * u(rng)) / static_cast<double>(h);
  const double fx = 2.0 * std::numbers::pi * (1 + 2 * u(rng)) / static_cast<double>(w);
  const double phase = 2.0 * std::numbers::pi * u(rng);

  Tensor t({1, 3, h, w});
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      const double py = static_cast<double>(y) / static_cast<double>(h - 1 > 0 ? h - 1 : 1) - 0.5;
      const double px = static_cast<double>(x) / static_cast<double>(w - 1 > 0 ? w - 1 : 1) - 0.5;
      const double s = std::clamp(0.5 + gx * px + gy * py, 0.0, 1.0);
      const double ripple = 0.04 * std::sin(fy * static_cast<double>(y) + fx * static_cast<double>(x) + phase);
      for (int c = 0; c < 3; ++c) {
        double v = (1 - s) * c0[c] + s * c1[c] + ripple;
        for (const auto& b : blobs) {
          const double dy = static_cast<double>(y) - b.y, dx = static_cast<double>(x) - b.x;
          v += b.amp[c] * std::exp(-(dy * dy + dx * dx) / (2 * b.r * b.r));
        }
        t.at(0, c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  return t;
}

/// Writes `count` scenes as <prefix>NNN.png; returns the paths.
inline std::vector<std::filesystem::path> write_synth_set(const std::filesystem::path& dir, int count, int64_t size,
                                                          uint64_t seed, const std::string& prefix = "synth_") {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> out;
  for (int i = 0; i < count; ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "%s%03d.png", prefix.c_str(), i);
    out.push_back(dir / name);
    save_image(out.back(), synth_image(size, size, seed * 1000003ULL + static_cast<uint64_t>(i)));
  }
  return out;
}

}  // namespace pcinpaint
