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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pcinpaint {

// Raised for any contract violation on tensor shapes or values.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Shape {
  int64_t n = 0;
  int64_t c = 0;
  int64_t h = 0;
  int64_t w = 0;

  constexpr int64_t numel() const { return n * c * h * w; }
  constexpr int64_t plane() const { return h * w; }
  constexpr bool operator==(const Shape&) const = default;

  std::string str() const {
    std::ostringstream os;
    os << "(" << n << "," << c << "," << h << "," << w << ")";
    return os.str();
  }
};

/// Dense NCHW float tensor with value semantics.
///
/// Storage is row-major: index = ((n * C + c) * H + h) * W + w.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, float fill = 0.0f) : shape_(shape) {
    if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
      throw ShapeError("negative tensor dimension " + shape.str());
    }
    data_.assign(static_cast<size_t>(shape.numel()), fill);
  }

  Tensor(Shape shape, std::vector<float> data) : shape_(shape), data_(std::move(data)) {
    if (static_cast<int64_t>(data_.size()) != shape.numel()) {
      throw ShapeError("data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape.str());
    }
  }

  static Tensor scalar(float v) { return Tensor({1, 1, 1, 1}, v); }

  const Shape& shape() const { return shape_; }
  int64_t numel() const { return shape_.numel(); }
  bool empty() const { return data_.empty(); }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  float* ptr() { return data_.data(); }
  const float* ptr() const { return data_.data(); }

  float& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  float operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  int64_t offset(int64_t n, int64_t c, int64_t h, int64_t w) const {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  float& at(int64_t n, int64_t c, int64_t h, int64_t w) { return data_[offset(n, c, h, w)]; }
  float at(int64_t n, int64_t c, int64_t h, int64_t w) const { return data_[offset(n, c, h, w)]; }

  // Pointer to the (n, c) image plane.
  float* plane(int64_t n, int64_t c) { return data_.data() + offset(n, c, 0, 0); }
  const float* plane(int64_t n, int64_t c) const { return data_.data() + offset(n, c, 0, 0); }

  float item() const {
    if (numel() != 1) throw ShapeError("item() on non-scalar tensor " + shape_.str());
    return data_[0];
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
  }

  bool operator==(const Tensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

 private:
  Shape shape_{};
  std::vector<float> data_;
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + a.shape().str() + " vs " +
                     b.shape().str());
  }
}

inline Tensor uniform_tensor(Shape shape, float lo, float hi, std::mt19937_64& rng) {
  Tensor t(shape);
  std::uniform_real_distribution<float> dist(lo, hi);
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

// Sum in double precision.
inline double sum_f64(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += x;
  return s;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return m;
}

// Replicates a single-channel tensor across `channels` channels.
inline Tensor expand_channels(const Tensor& t, int64_t channels) {
  const Shape& s = t.shape();
  if (s.c == channels) return t;
  if (s.c != 1) {
    throw ShapeError("expand_channels: expected 1 or " + std::to_string(channels) +
                     " channels, got " + std::to_string(s.c));
  }
  Tensor out({s.n, channels, s.h, s.w});
  for (int64_t n = 0; n < s.n; ++n) {
    for (int64_t c = 0; c < channels; ++c) {
      std::copy_n(t.plane(n, 0), s.plane(), out.plane(n, c));
    }
  }
  return out;
}

inline bool is_binary(const Tensor& t) {
  return std::all_of(t.data().begin(), t.data().end(),
                     [](float v) { return v == 0.0f || v == 1.0f; });
}

// Fraction of zero (hole) entries.
inline double hole_ratio(const Tensor& mask) {
  if (mask.numel() == 0) return 0.0;
  int64_t holes = 0;
  for (float v : mask.data()) holes += (v == 0.0f);
  return static_cast<double>(holes) / static_cast<double>(mask.numel());
}

// Extracts sample `i` as a batch of one.
inline Tensor slice_batch(const Tensor& t, int64_t i) {
  const Shape& s = t.shape();
  if (i < 0 || i >= s.n) throw ShapeError("slice_batch: index out of range");
  const int64_t per = s.c * s.h * s.w;
  std::vector<float> v(t.data().begin() + i * per, t.data().begin() + (i + 1) * per);
  return Tensor({1, s.c, s.h, s.w}, std::move(v));
}

// Stacks equally shaped batches along n.
inline Tensor stack_batch(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("stack_batch: nothing to stack");
  const Shape& s0 = parts.front().shape();
  int64_t total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.c != s0.c || s.h != s0.h || s.w != s0.w) {
      throw ShapeError("stack_batch: incompatible " + s.str() + " vs " + s0.str());
    }
    total += s.n;
  }
  std::vector<float> v;
  v.reserve(static_cast<size_t>(total * s0.c * s0.h * s0.w));
  for (const auto& p : parts) v.insert(v.end(), p.data().begin(), p.data().end());
  return Tensor({total, s0.c, s0.h, s0.w}, std::move(v));
}

}  // namespace pcinpaint
