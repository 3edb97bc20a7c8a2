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

// 8-bit PNG images and masks through the libpng simplified API.
//
// Images load as RGB (1,3,h,w) in [0,1]; grayscale files are replicated.
// Masks load as (1,1,h,w): gray >= 128 is valid (1), below is a hole (0).
// Saving clamps to [0,1] and rounds half up to 8 bits.

#pragma once

#include <png.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

#include <unistd.h>

#include "pcinpaint/tensor.hpp"

namespace pcinpaint {

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Bytes = std::vector<uint8_t>;

inline Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

/// Writes `data` to a temporary sibling and renames it over `path`, so
/// readers never see a partial file.
inline void atomic_write(const std::filesystem::path& path, const Bytes& data) {
  static std::atomic<uint64_t> counter{0};
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw std::runtime_error("short write to " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw std::runtime_error("cannot rename onto " + path.string() + ": " + ec.message());
  }
}

inline uint8_t quantize(float v) {
  return static_cast<uint8_t>(std::floor(std::clamp(v, 0.0f, 1.0f) * 255.0f + 0.5f));
}

namespace detail {

struct PngImage {
  png_image img{};
  PngImage() { img.version = PNG_IMAGE_VERSION; }
  ~PngImage() { png_image_free(&img); }
  PngImage(const PngImage&) = delete;
  PngImage& operator=(const PngImage&) = delete;
};

inline std::vector<uint8_t> decode(const Bytes& bytes, uint32_t format, uint32_t& h, uint32_t& w,
                                   const std::string& what) {
  PngImage p;
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw ImageError(what + ": not a PNG file");
  }
  if (!png_image_begin_read_from_memory(&p.img, bytes.data(), bytes.size())) {
    throw ImageError(what + ": " + p.img.message);
  }
  p.img.format = format;
  std::vector<uint8_t> buf(PNG_IMAGE_SIZE(p.img));
  if (!png_image_finish_read(&p.img, nullptr, buf.data(), 0, nullptr)) {
    throw ImageError(what + ": " + p.img.message);
  }
  h = p.img.height;
  w = p.img.width;
  return buf;
}

}  // namespace detail

/// PNG bytes to RGB (1,3,h,w) in [0,1].
inline Tensor decode_image(const Bytes& bytes, const std::string& what = "image") {
  uint32_t h = 0, w = 0;
  const auto buf = detail::decode(bytes, PNG_FORMAT_RGB, h, w, what);
  Tensor t({1, 3, h, w});
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x)
      for (int64_t c = 0; c < 3; ++c) t.at(0, c, y, x) = buf[static_cast<size_t>((y * w + x) * 3 + c)] / 255.0f;
  return t;
}

/// PNG bytes to a binary (1,1,h,w) mask; colour files are converted to gray.
inline Tensor decode_mask(const Bytes& bytes, const std::string& what = "mask") {
  uint32_t h = 0, w = 0;
  const auto buf = detail::decode(bytes, PNG_FORMAT_GRAY, h, w, what);
  Tensor t({1, 1, h, w});
  for (size_t i = 0; i < buf.size(); ++i) t[static_cast<int64_t>(i)] = buf[i] >= 128 ? 1.0f : 0.0f;
  return t;
}

/// (1,c,h,w) with c = 1 (gray) or 3 (RGB) to PNG bytes.
inline Bytes encode_png(const Tensor& t) {
  const Shape s = t.shape();
  if (s.n != 1 || (s.c != 1 && s.c != 3) || s.h < 1 || s.w < 1) {
    throw ShapeError("PNG export needs (1,1|3,h,w), got " + s.str());
  }
  std::vector<uint8_t> buf(static_cast<size_t>(s.numel()));
  for (int64_t y = 0; y < s.h; ++y)
    for (int64_t x = 0; x < s.w; ++x)
      for (int64_t c = 0; c < s.c; ++c) buf[static_cast<size_t>((y * s.w + x) * s.c + c)] = quantize(t.at(0, c, y, x));
  detail::PngImage p;
  p.img.width = static_cast<png_uint_32>(s.w);
  p.img.height = static_cast<png_uint_32>(s.h);
  p.img.format = s.c == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&p.img, nullptr, &size, 0, buf.data(), 0, nullptr)) {
    throw ImageError(std::string("PNG encode: ") + p.img.message);
  }
  Bytes out(size);
  if (!png_image_write_to_memory(&p.img, out.data(), &size, 0, buf.data(), 0, nullptr)) {
    throw ImageError(std::string("PNG encode: ") + p.img.message);
  }
  out.resize(size);
  return out;
}

inline Tensor load_image(const std::filesystem::path& path) {
  return decode_image(read_file(path), path.string());
}

inline Tensor load_mask(const std::filesystem::path& path) {
  return decode_mask(read_file(path), path.string());
}

inline void save_image(const std::filesystem::path& path, const Tensor& t) { atomic_write(path, encode_png(t)); }

}  // namespace pcinpaint
