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

// Navier-Stokes style inpainting (Bertalmio, Bertozzi, Sapiro).
//
// Image smoothness L = Laplacian(I) plays the vorticity and is transported
// along the isophotes, the level lines of I:
//
//   I_t = dL . N/|N| * |grad I|,   N = (-I_y, I_x)
//
// with |grad I| slope-limited in the upwind direction. Every
// `diffusion_every` transport steps, `diffusion_steps` of curvature
// (anisotropic) diffusion I_t = kappa |grad I| run inside the hole. Only
// hole pixels are ever written; stencils replicate the image border.

#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "pcinpaint/tensor.hpp"

namespace pcinpaint {

struct NSConfig {
  int64_t max_iters = 3000;
  float dt = 0.1f;
  int64_t diffusion_every = 15;
  int64_t diffusion_steps = 2;
  float convergence_tol = 1e-5f;

  void validate() const {
    if (!(dt > 0.0f)) throw std::invalid_argument("NS dt must be positive");
    if (max_iters < 1) throw std::invalid_argument("NS max_iters must be at least 1");
    if (!(convergence_tol >= 0.0f)) throw std::invalid_argument("NS convergence_tol must be non-negative");
    if (diffusion_every < 1 || diffusion_steps < 0) throw std::invalid_argument("NS diffusion schedule is invalid");
  }
};

struct NSStats {
  int64_t iterations = 0;
  bool converged = false;
  // Max per-pixel transport update of every iteration, per plane in order.
  std::vector<std::vector<double>> updates;
};

namespace detail {

class Plane {
 public:
  Plane(int64_t h, int64_t w) : h_(h), w_(w), v_(static_cast<size_t>(h * w)) {}
  double& ref(int64_t y, int64_t x) { return v_[static_cast<size_t>(y * w_ + x)]; }
  // Replicate-edge read.
  double operator()(int64_t y, int64_t x) const {
    y = std::clamp<int64_t>(y, 0, h_ - 1);
    x = std::clamp<int64_t>(x, 0, w_ - 1);
    return v_[static_cast<size_t>(y * w_ + x)];
  }
  int64_t h() const { return h_; }
  int64_t w() const { return w_; }

 private:
  int64_t h_, w_;
  std::vector<double> v_;
};

struct Pixel {
  int64_t y, x;
};

// 4-connected hole components; returns a component id per pixel (-1 valid).
inline std::vector<int64_t> hole_components(const Tensor& mask, int64_t n, int64_t& count) {
  const int64_t h = mask.shape().h, w = mask.shape().w;
  std::vector<int64_t> id(static_cast<size_t>(h * w), -1);
  count = 0;
  std::vector<Pixel> stack;
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      if (mask.at(n, 0, y, x) != 0.0f || id[static_cast<size_t>(y * w + x)] >= 0) continue;
      stack.push_back({y, x});
      id[static_cast<size_t>(y * w + x)] = count;
      while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        const Pixel nb[4] = {{p.y - 1, p.x}, {p.y + 1, p.x}, {p.y, p.x - 1}, {p.y, p.x + 1}};
        for (const Pixel& q : nb) {
          if (q.y < 0 || q.y >= h || q.x < 0 || q.x >= w) continue;
          auto& slot = id[static_cast<size_t>(q.y * w + q.x)];
          if (slot >= 0 || mask.at(n, 0, q.y, q.x) != 0.0f) continue;
          slot = count;
          stack.push_back(q);
        }
      }
      ++count;
    }
  return id;
}

inline double laplacian(const Plane& I, int64_t y, int64_t x) {
  return I(y - 1, x) + I(y + 1, x) + I(y, x - 1) + I(y, x + 1) - 4.0 * I(y, x);
}

// Hole pixels plus their (edge-clamped) 4-neighbours: where L is needed.
inline std::vector<Pixel> laplacian_support(const std::vector<Pixel>& hole, int64_t h, int64_t w) {
  std::vector<char> seen(static_cast<size_t>(h * w), 0);
  std::vector<Pixel> out;
  for (const Pixel& p : hole) {
    const Pixel nb[5] = {{p.y, p.x}, {p.y - 1, p.x}, {p.y + 1, p.x}, {p.y, p.x - 1}, {p.y, p.x + 1}};
    for (const Pixel& q : nb) {
      const int64_t qy = std::clamp<int64_t>(q.y, 0, h - 1), qx = std::clamp<int64_t>(q.x, 0, w - 1);
      char& s = seen[static_cast<size_t>(qy * w + qx)];
      if (!s) out.push_back({qy, qx});
      s = 1;
    }
  }
  return out;
}

// One transport step over the hole pixels; returns the max |update|.
inline double transport_step(Plane& I, Plane& L, const std::vector<Pixel>& hole,
                             const std::vector<Pixel>& support, double dt) {
  for (const Pixel& p : support) L.ref(p.y, p.x) = laplacian(I, p.y, p.x);
  std::vector<double> delta(hole.size());
  constexpr double kEps = 1e-12;
  for (size_t k = 0; k < hole.size(); ++k) {
    const int64_t y = hole[k].y, x = hole[k].x;
    const double dLx = 0.5 * (L(y, x + 1) - L(y, x - 1));
    const double dLy = 0.5 * (L(y + 1, x) - L(y - 1, x));
    const double Ix = 0.5 * (I(y, x + 1) - I(y, x - 1));
    const double Iy = 0.5 * (I(y + 1, x) - I(y - 1, x));
    const double norm = std::sqrt(Ix * Ix + Iy * Iy + kEps);
    const double beta = (dLx * -Iy + dLy * Ix) / norm;
    const double c = I(y, x);
    const double xb = c - I(y, x - 1), xf = I(y, x + 1) - c;
    const double yb = c - I(y - 1, x), yf = I(y + 1, x) - c;
    double grad = 0.0;
    if (beta > 0.0) {
      grad = std::sqrt(std::pow(std::min(xb, 0.0), 2) + std::pow(std::max(xf, 0.0), 2) +
                       std::pow(std::min(yb, 0.0), 2) + std::pow(std::max(yf, 0.0), 2));
    } else if (beta < 0.0) {
      grad = std::sqrt(std::pow(std::max(xb, 0.0), 2) + std::pow(std::min(xf, 0.0), 2) +
                       std::pow(std::max(yb, 0.0), 2) + std::pow(std::min(yf, 0.0), 2));
    }
    delta[k] = dt * beta * grad;
  }
  double worst = 0.0;
  for (size_t k = 0; k < hole.size(); ++k) {
    I.ref(hole[k].y, hole[k].x) += delta[k];
    worst = std::max(worst, std::abs(delta[k]));
  }
  return worst;
}

// One curvature-diffusion step, I_t = (Ixx Iy^2 - 2 Ix Iy Ixy + Iyy Ix^2) / |grad I|^2.
inline double diffusion_step(Plane& I, const std::vector<Pixel>& hole, double dt) {
  std::vector<double> delta(hole.size());
  constexpr double kEps = 1e-12;
  for (size_t k = 0; k < hole.size(); ++k) {
    const int64_t y = hole[k].y, x = hole[k].x;
    const double c = I(y, x);
    const double Ix = 0.5 * (I(y, x + 1) - I(y, x - 1));
    const double Iy = 0.5 * (I(y + 1, x) - I(y - 1, x));
    const double Ixx = I(y, x + 1) - 2.0 * c + I(y, x - 1);
    const double Iyy = I(y + 1, x) - 2.0 * c + I(y - 1, x);
    const double Ixy = 0.25 * (I(y + 1, x + 1) - I(y + 1, x - 1) - I(y - 1, x + 1) + I(y - 1, x - 1));
    const double g2 = Ix * Ix + Iy * Iy;
    delta[k] = g2 < kEps ? 0.0 : dt * (Ixx * Iy * Iy - 2.0 * Ix * Iy * Ixy + Iyy * Ix * Ix) / g2;
  }
  double worst = 0.0;
  for (size_t k = 0; k < hole.size(); ++k) {
    I.ref(hole[k].y, hole[k].x) += delta[k];
    worst = std::max(worst, std::abs(delta[k]));
  }
  return worst;
}

}  // namespace detail

/// Inpaints every plane of `image` (n,c,h,w) inside the holes of `mask`
/// (n,1,h,w), 1 = valid. Each hole component starts at the mean of the valid
/// pixels 4-adjacent to it (0.5 if it has none).
inline Tensor ns_inpaint(const Tensor& image, const Tensor& mask, const NSConfig& cfg = {},
                         NSStats* stats = nullptr) {
  cfg.validate();
  const Shape s = image.shape();
  if (mask.shape() != Shape{s.n, 1, s.h, s.w}) {
    throw ShapeError("NS mask must be " + Shape{s.n, 1, s.h, s.w}.str() + ", got " + mask.shape().str());
  }
  if (!is_binary(mask)) throw std::invalid_argument("NS mask values must be 0 or 1");
  Tensor out = image;
  if (stats) *stats = {};
  for (int64_t n = 0; n < s.n; ++n) {
    int64_t ncomp = 0;
    const auto comp = detail::hole_components(mask, n, ncomp);
    if (ncomp == 0) continue;
    std::vector<detail::Pixel> hole;
    for (int64_t y = 0; y < s.h; ++y)
      for (int64_t x = 0; x < s.w; ++x)
        if (comp[static_cast<size_t>(y * s.w + x)] >= 0) hole.push_back({y, x});

    for (int64_t c = 0; c < s.c; ++c) {
      detail::Plane I(s.h, s.w);
      for (int64_t y = 0; y < s.h; ++y)
        for (int64_t x = 0; x < s.w; ++x) I.ref(y, x) = image.at(n, c, y, x);

      std::vector<double> sum(static_cast<size_t>(ncomp), 0.0);
      std::vector<int64_t> cnt(static_cast<size_t>(ncomp), 0);
      for (int64_t y = 0; y < s.h; ++y)
        for (int64_t x = 0; x < s.w; ++x) {
          if (mask.at(n, 0, y, x) == 0.0f) continue;
          // Each valid pixel counts once per adjacent component.
          int64_t seen[4];
          int ns = 0;
          const detail::Pixel nb[4] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
          for (const auto& q : nb) {
            if (q.y < 0 || q.y >= s.h || q.x < 0 || q.x >= s.w) continue;
            const int64_t id = comp[static_cast<size_t>(q.y * s.w + q.x)];
            if (id < 0 || std::find(seen, seen + ns, id) != seen + ns) continue;
            seen[ns++] = id;
            sum[static_cast<size_t>(id)] += I(y, x);
            ++cnt[static_cast<size_t>(id)];
          }
        }
      for (const auto& p : hole) {
        const auto id = static_cast<size_t>(comp[static_cast<size_t>(p.y * s.w + p.x)]);
        I.ref(p.y, p.x) = cnt[id] ? sum[id] / static_cast<double>(cnt[id]) : 0.5;
      }

      detail::Plane L(s.h, s.w);
      const auto support = detail::laplacian_support(hole, s.h, s.w);
      std::vector<double> history;
      int64_t it = 0;
      bool converged = false;
      while (it < cfg.max_iters) {
        const double upd = detail::transport_step(I, L, hole, support, cfg.dt);
        ++it;
        history.push_back(upd);
        if (it % cfg.diffusion_every == 0) {
          for (int64_t d = 0; d < cfg.diffusion_steps; ++d) detail::diffusion_step(I, hole, cfg.dt);
        }
        if (upd <= cfg.convergence_tol) {
          converged = true;
          break;
        }
      }
      for (const auto& p : hole) out.at(n, c, p.y, p.x) = static_cast<float>(I(p.y, p.x));
      if (stats) {
        stats->iterations = std::max(stats->iterations, it);
        stats->converged = (n == 0 && c == 0) ? converged : stats->converged && converged;
        stats->updates.push_back(std::move(history));
      }
    }
  }
  return out;
}

}  // namespace pcinpaint
