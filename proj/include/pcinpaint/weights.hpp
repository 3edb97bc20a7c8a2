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

// Named-tensor container, little-endian throughout:
//
//   "PCNW" | u32 version | u32 count
//   count x { u16 name_len | name | u8 ndim | u32 dims[ndim] | u8 dtype | payload }
//   u32 crc32 of everything before it
//
// dtype 0 is f32, the only one written.

#pragma once

#include <zlib.h>

#include <cstring>
#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pcinpaint/image_io.hpp"
#include "pcinpaint/unet.hpp"

namespace pcinpaint {

inline constexpr uint32_t kWeightsVersion = 1;

enum class WeightsErrc {
  kIo = 1,
  kBadMagic,
  kBadVersion,
  kCrcMismatch,
  kMalformed,
  kUnsupportedDtype,
  kUnknownTensor,
  kMissingTensor,
  kShapeMismatch,
};

inline const char* to_string(WeightsErrc e) {
  switch (e) {
    case WeightsErrc::kIo: return "io";
    case WeightsErrc::kBadMagic: return "bad-magic";
    case WeightsErrc::kBadVersion: return "bad-version";
    case WeightsErrc::kCrcMismatch: return "crc-mismatch";
    case WeightsErrc::kMalformed: return "malformed";
    case WeightsErrc::kUnsupportedDtype: return "unsupported-dtype";
    case WeightsErrc::kUnknownTensor: return "unknown-tensor";
    case WeightsErrc::kMissingTensor: return "missing-tensor";
    case WeightsErrc::kShapeMismatch: return "shape-mismatch";
  }
  return "unknown";
}

class WeightsError : public std::runtime_error {
 public:
  WeightsError(WeightsErrc code, const std::string& msg)
      : std::runtime_error(std::string("weights ") + to_string(code) + ": " + msg), code_(code) {}
  WeightsErrc code() const { return code_; }

 private:
  WeightsErrc code_;
};

using NamedTensorList = std::vector<std::pair<std::string, Tensor>>;

namespace detail {

template <typename T>
void put_le(Bytes& out, T v) {
  for (size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<uint8_t>(static_cast<uint64_t>(v) >> (8 * i)));
}

class Reader {
 public:
  Reader(const Bytes& b, size_t end) : b_(b), end_(end) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    uint64_t v = 0;
    for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<uint64_t>(b_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }
  std::string str(size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == end_; }

 private:
  void need(size_t n) const {
    if (pos_ + n > end_) throw WeightsError(WeightsErrc::kMalformed, "record runs past the end of the file");
  }
  const Bytes& b_;
  size_t end_;
  size_t pos_ = 0;
};

inline uint32_t crc_of(const uint8_t* p, size_t n) {
  return static_cast<uint32_t>(::crc32(::crc32(0L, Z_NULL, 0), p, static_cast<uInt>(n)));
}

}  // namespace detail

inline Bytes encode_weights(const NamedTensorList& tensors) {
  Bytes out{'P', 'C', 'N', 'W'};
  detail::put_le<uint32_t>(out, kWeightsVersion);
  detail::put_le<uint32_t>(out, static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (name.empty() || name.size() > 0xFFFF) throw std::invalid_argument("bad tensor name length");
    detail::put_le<uint16_t>(out, static_cast<uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    const Shape s = t.shape();
    out.push_back(4);
    for (int64_t d : {s.n, s.c, s.h, s.w}) detail::put_le<uint32_t>(out, static_cast<uint32_t>(d));
    out.push_back(0);
    for (float v : t.data()) {
      uint32_t bits;
      std::memcpy(&bits, &v, 4);
      detail::put_le<uint32_t>(out, bits);
    }
  }
  detail::put_le<uint32_t>(out, detail::crc_of(out.data(), out.size()));
  return out;
}

inline NamedTensorList decode_weights(const Bytes& b) {
  constexpr size_t kHeader = 12;
  if (b.size() >= 4 && std::memcmp(b.data(), "PCNW", 4) != 0) {
    throw WeightsError(WeightsErrc::kBadMagic, "missing PCNW magic");
  }
  if (b.size() < kHeader + 4) throw WeightsError(WeightsErrc::kCrcMismatch, "file truncated");
  const size_t body = b.size() - 4;
  uint32_t stored = 0;
  for (size_t i = 0; i < 4; ++i) stored |= static_cast<uint32_t>(b[body + i]) << (8 * i);
  if (detail::crc_of(b.data(), body) != stored) throw WeightsError(WeightsErrc::kCrcMismatch, "checksum mismatch");

  detail::Reader r(b, body);
  r.str(4);
  const auto version = r.get<uint32_t>();
  if (version != kWeightsVersion) {
    throw WeightsError(WeightsErrc::kBadVersion, "version " + std::to_string(version) + " (expected " +
                                                     std::to_string(kWeightsVersion) + ")");
  }
  const auto count = r.get<uint32_t>();
  NamedTensorList out;
  std::set<std::string> seen;
  for (uint32_t i = 0; i < count; ++i) {
    std::string name = r.str(r.get<uint16_t>());
    if (!seen.insert(name).second) throw WeightsError(WeightsErrc::kMalformed, "duplicate tensor " + name);
    const auto ndim = r.get<uint8_t>();
    if (ndim > 4) throw WeightsError(WeightsErrc::kMalformed, name + " has " + std::to_string(ndim) + " dims");
    int64_t dims[4] = {1, 1, 1, 1};
    for (int d = 0; d < ndim; ++d) dims[4 - ndim + d] = r.get<uint32_t>();
    const auto dtype = r.get<uint8_t>();
    if (dtype != 0) throw WeightsError(WeightsErrc::kUnsupportedDtype, name + " has dtype " + std::to_string(dtype));
    Tensor t({dims[0], dims[1], dims[2], dims[3]});
    for (int64_t k = 0; k < t.numel(); ++k) {
      const auto bits = r.get<uint32_t>();
      std::memcpy(&t[k], &bits, 4);
    }
    out.emplace_back(std::move(name), std::move(t));
  }
  if (!r.done()) throw WeightsError(WeightsErrc::kMalformed, "trailing bytes after the last tensor");
  return out;
}

inline void save_tensors(const std::filesystem::path& path, const NamedTensorList& tensors) {
  try {
    atomic_write(path, encode_weights(tensors));
  } catch (const WeightsError&) {
    throw;
  } catch (const std::exception& e) {
    throw WeightsError(WeightsErrc::kIo, e.what());
  }
}

inline NamedTensorList load_tensors(const std::filesystem::path& path) {
  Bytes b;
  try {
    b = read_file(path);
  } catch (const std::exception& e) {
    throw WeightsError(WeightsErrc::kIo, e.what());
  }
  return decode_weights(b);
}

inline void save_weights(const UNetModel& model, const std::filesystem::path& path) {
  save_tensors(path, model.parameters());
}

/// Architecture read back from parameter shapes: depth from the encoder
/// count, channels and kernels from each encoder's first conv. The decoder
/// flags are not stored and keep their defaults.
inline UNetConfig infer_config(const NamedTensorList& tensors) {
  UNetConfig cfg;
  cfg.channels.clear();
  cfg.kernels.clear();
  auto find = [&](const std::string& n) -> const Tensor* {
    for (const auto& [name, t] : tensors)
      if (name == n) return &t;
    return nullptr;
  };
  for (int64_t i = 1;; ++i) {
    const Tensor* w = find("enc" + std::to_string(i) + ".conva.weight");
    if (!w) break;
    cfg.channels.push_back(w->shape().n);
    cfg.kernels.push_back(w->shape().h);
    if (i == 1) cfg.in_channels = w->shape().c;
  }
  cfg.depth = static_cast<int64_t>(cfg.channels.size());
  if (cfg.depth == 0) throw WeightsError(WeightsErrc::kMissingTensor, "no enc1.conva.weight tensor");
  if (const Tensor* w = find("dec1.convb.weight")) cfg.out_channels = w->shape().n;
  return cfg;
}

/// Copies every tensor into `model`. Unknown names, missing names and shape
/// mismatches are errors that name the offending tensors.
inline void assign_weights(UNetModel& model, const NamedTensorList& tensors) {
  std::set<std::string> expected;
  for (const auto& [n, t] : model.parameters()) expected.insert(n);
  std::string unknown;
  for (const auto& [n, t] : tensors)
    if (!expected.count(n)) unknown += (unknown.empty() ? "" : ", ") + n;
  if (!unknown.empty()) throw WeightsError(WeightsErrc::kUnknownTensor, "unexpected tensor(s): " + unknown);
  std::set<std::string> present;
  for (const auto& [n, t] : tensors) present.insert(n);
  std::string missing;
  for (const auto& n : expected)
    if (!present.count(n)) missing += (missing.empty() ? "" : ", ") + n;
  if (!missing.empty()) throw WeightsError(WeightsErrc::kMissingTensor, "missing tensor(s): " + missing);
  for (const auto& [n, t] : tensors) {
    Tensor& dst = model.parameter(n);
    if (dst.shape() != t.shape()) {
      throw WeightsError(WeightsErrc::kShapeMismatch, n + " is " + t.shape().str() + ", model expects " + dst.shape().str());
    }
    dst = t;
  }
}

inline void load_weights(UNetModel& model, const std::filesystem::path& path) {
  assign_weights(model, load_tensors(path));
}

/// Builds a model whose architecture matches the file.
inline UNetModel load_model(const std::filesystem::path& path) {
  const auto tensors = load_tensors(path);
  UNetModel model(infer_config(tensors), 0);
  assign_weights(model, tensors);
  return model;
}

}  // namespace pcinpaint
