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

// Training loop, evaluation harness and the dataset conventions they share.

#pragma once

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pcinpaint/image_io.hpp"
#include "pcinpaint/losses.hpp"
#include "pcinpaint/maskgen.hpp"
#include "pcinpaint/metrics.hpp"
#include "pcinpaint/ns_inpaint.hpp"
#include "pcinpaint/optim.hpp"
#include "pcinpaint/unet.hpp"
#include "pcinpaint/weights.hpp"

namespace pcinpaint {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Dataset

enum class Split { kAll, kTrain, kVal, kTest };

inline Split parse_split(const std::string& s) {
  if (s == "all") return Split::kAll;
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw ConfigError("unknown split '" + s + "' (all, train, val, test)");
}

inline uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// 70/15/15 by filename hash, so membership never depends on what else is in
/// the directory.
inline Split split_of(const std::string& filename) {
  const uint64_t b = fnv1a64(filename) % 100;
  return b < 70 ? Split::kTrain : b < 85 ? Split::kVal : Split::kTest;
}

/// Sorted *.png files directly inside `dir` that belong to `split`.
inline std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir, Split split = Split::kAll) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("data directory not found: " + dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext != ".png") continue;
    if (split != Split::kAll && split_of(e.path().filename().string()) != split) continue;
    out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Configuration

inline LossWeights loss_preset(const std::string& name) {
  LossWeights w;
  if (name == "full") return w;
  if (name == "no_style") {
    w.use_style = false;
    return w;
  }
  if (name == "no_perceptual") {
    w.use_perceptual = false;
    return w;
  }
  throw ConfigError("unknown loss preset '" + name + "' (full, no_style, no_perceptual)");
}

/// Frozen feature network, optionally with weights from a tensor file.
inline FeatureNetwork make_feature_network(const FeatureNetConfig& cfg) {
  FeatureNetwork net(cfg);
  if (cfg.weights_path.empty()) return net;
  const auto loaded = load_tensors(cfg.weights_path);
  auto& params = net.mutable_parameters();
  if (loaded.size() != params.size()) {
    throw WeightsError(WeightsErrc::kMissingTensor, "feature network expects " + std::to_string(params.size()) +
                                                        " tensors, file has " + std::to_string(loaded.size()));
  }
  for (auto& [name, t] : params) {
    auto it = std::find_if(loaded.begin(), loaded.end(), [&](const auto& p) { return p.first == name; });
    if (it == loaded.end()) throw WeightsError(WeightsErrc::kMissingTensor, "feature network needs " + name);
    if (it->second.shape() != t.shape()) {
      throw WeightsError(WeightsErrc::kShapeMismatch, name + " is " + it->second.shape().str() + ", expected " +
                                                          t.shape().str());
    }
    t = it->second;
  }
  return net;
}

struct TrainConfig {
  std::string data_dir;
  std::string split = "all";
  std::string output = "weights.pcnw";
  std::string log_path = "train_log.csv";
  std::string checkpoint_path;  // empty: no checkpoints
  std::string resume;           // checkpoint to continue from
  int64_t iterations = 34500;
  int64_t batch_size = 3;
  int64_t checkpoint_every = 0;
  float lr = 2e-4f;
  std::string lr_schedule = "constant";  // or "cosine"
  uint64_t seed = 0;
  int64_t image_size = 256;
  double mask_ratio_min = 0.05;
  double mask_ratio_max = 0.25;
  LossWeights loss;
  UNetConfig unet;
  FeatureNetConfig features;

  /// Small models for CPU runs on 64x64 images.
  static TrainConfig desk() {
    TrainConfig c;
    c.iterations = 2000;
    c.batch_size = 1;
    c.image_size = 64;
    c.lr = 1e-3f;
    c.unet = UNetConfig::desk();
    c.features = FeatureNetConfig::desk();
    return c;
  }

  void validate() const {
    if (iterations < 1) throw ConfigError("iterations must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
    if (checkpoint_every > 0 && checkpoint_path.empty()) throw ConfigError("checkpoint_every needs checkpoint_path");
    if (!(lr > 0.0f)) throw ConfigError("lr must be positive");
    if (lr_schedule != "constant" && lr_schedule != "cosine") {
      throw ConfigError("lr_schedule must be constant or cosine");
    }
    if (!(mask_ratio_min > 0.0 && mask_ratio_max >= mask_ratio_min && mask_ratio_max < 0.9)) {
      throw ConfigError("mask ratio range must satisfy 0 < min <= max < 0.9");
    }
    unet.validate();
    features.validate();
    loss.validate();
    if (image_size < 1 || image_size % unet.divisor() != 0) {
      throw ConfigError("image_size " + std::to_string(image_size) + " is not divisible by " +
                        std::to_string(unet.divisor()));
    }
    const bool feats = loss.effective_perceptual() > 0.0f || loss.effective_style() > 0.0f;
    const int64_t fdiv = int64_t{1} << features.stage_channels.size();
    if (feats && image_size % fdiv != 0) {
      throw ConfigError("image_size must be divisible by " + std::to_string(fdiv) + " for the feature network");
    }
    parse_split(split);
  }
};

namespace detail {

template <typename T>
void take(const nlohmann::json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

inline void read_unet(const nlohmann::json& j, UNetConfig& u) {
  take(j, "depth", u.depth);
  take(j, "channels", u.channels);
  take(j, "kernels", u.kernels);
  take(j, "in_channels", u.in_channels);
  take(j, "out_channels", u.out_channels);
  take(j, "leaky_slope", u.leaky_slope);
  take(j, "partial_decoders", u.partial_decoders);
  take(j, "linear_top_decoder", u.linear_top_decoder);
}

inline void read_loss(const nlohmann::json& j, LossWeights& w) {
  if (j.contains("preset")) w = loss_preset(j.at("preset").get<std::string>());
  take(j, "tv", w.tv);
  take(j, "valid", w.valid);
  take(j, "hole", w.hole);
  take(j, "perceptual", w.perceptual);
  take(j, "style", w.style);
  take(j, "use_perceptual", w.use_perceptual);
  take(j, "use_style", w.use_style);
  take(j, "tv_hole_only", w.tv_hole_only);
}

inline void read_features(const nlohmann::json& j, FeatureNetConfig& f) {
  take(j, "stage_channels", f.stage_channels);
  take(j, "convs_per_stage", f.convs_per_stage);
  take(j, "mean", f.mean);
  take(j, "stddev", f.stddev);
  take(j, "seed", f.seed);
  take(j, "weights", f.weights_path);
}

}  // namespace detail

/// Reads a JSON config over `base`. A "profile": "desk" key starts from the
/// desk defaults instead. Unknown keys are errors.
inline TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {}) {
  static const std::vector<std::string> known{
      "profile", "data_dir", "split", "output", "log", "checkpoint", "resume", "iterations",
      "batch_size", "checkpoint_every", "lr", "lr_schedule", "seed", "image_size", "mask_ratio_min", "mask_ratio_max",
      "loss", "unet", "features"};
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  for (const auto& [k, _] : j.items()) {
    if (std::find(known.begin(), known.end(), k) == known.end()) throw ConfigError("unknown train config key: " + k);
  }
  try {
    if (j.value("profile", "") == "desk") base = TrainConfig::desk();
    detail::take(j, "data_dir", base.data_dir);
    detail::take(j, "split", base.split);
    detail::take(j, "output", base.output);
    detail::take(j, "log", base.log_path);
    detail::take(j, "checkpoint", base.checkpoint_path);
    detail::take(j, "resume", base.resume);
    detail::take(j, "iterations", base.iterations);
    detail::take(j, "batch_size", base.batch_size);
    detail::take(j, "checkpoint_every", base.checkpoint_every);
    detail::take(j, "lr", base.lr);
    detail::take(j, "lr_schedule", base.lr_schedule);
    detail::take(j, "seed", base.seed);
    detail::take(j, "image_size", base.image_size);
    detail::take(j, "mask_ratio_min", base.mask_ratio_min);
    detail::take(j, "mask_ratio_max", base.mask_ratio_max);
    if (j.contains("loss")) detail::read_loss(j.at("loss"), base.loss);
    if (j.contains("unet")) detail::read_unet(j.at("unet"), base.unet);
    if (j.contains("features")) detail::read_features(j.at("features"), base.features);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad train config: ") + e.what());
  }
  return base;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  const Bytes b = read_file(path);
  try {
    return nlohmann::json::parse(b.begin(), b.end());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Training

struct LossRow {
  int64_t iter = 0;
  double tv = 0, valid = 0, hole = 0, perceptual = 0, style = 0, total = 0;
};

inline constexpr const char* kLossLogHeader = "iter,tv,valid,hole,perceptual,style,total";

inline std::string format_row(const LossRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g", static_cast<long long>(r.iter), r.tv, r.valid,
                r.hole, r.perceptual, r.style, r.total);
  return buf;
}

/// Loads images, checking size and count against the config.
inline std::vector<Tensor> load_training_images(const TrainConfig& cfg) {
  const auto files = list_images(cfg.data_dir, parse_split(cfg.split));
  if (files.empty()) throw ConfigError("no PNG images in " + cfg.data_dir + " (split " + cfg.split + ")");
  if (static_cast<int64_t>(files.size()) < cfg.batch_size) {
    throw ConfigError("need at least batch_size=" + std::to_string(cfg.batch_size) + " images, found " +
                      std::to_string(files.size()));
  }
  std::vector<Tensor> images;
  for (const auto& f : files) {
    Tensor t = load_image(f);
    if (t.shape().h != cfg.image_size || t.shape().w != cfg.image_size) {
      throw ConfigError(f.filename().string() + " is " + std::to_string(t.shape().w) + "x" +
                        std::to_string(t.shape().h) + ", expected " + std::to_string(cfg.image_size) + " square");
    }
    images.push_back(std::move(t));
  }
  return images;
}

struct Batch {
  Tensor image;  // (B,3,S,S) ground truth
  Tensor mask;   // (B,1,S,S)
  std::vector<size_t> indices;
};

/// The batch for iteration `iter` depends only on (seed, iter), which is what
/// makes resumed runs replay the same stream.
inline Batch sample_batch(const TrainConfig& cfg, const std::vector<Tensor>& images, int64_t iter) {
  std::seed_seq seq{static_cast<uint32_t>(cfg.seed), static_cast<uint32_t>(cfg.seed >> 32),
                    static_cast<uint32_t>(iter), static_cast<uint32_t>(static_cast<uint64_t>(iter) >> 32)};
  std::mt19937_64 rng(seq);
  std::vector<size_t> order(images.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto b = static_cast<size_t>(cfg.batch_size);
  for (size_t i = 0; i < b; ++i) {
    std::uniform_int_distribution<size_t> pick(i, order.size() - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  const int64_t s = cfg.image_size;
  Batch out{Tensor({cfg.batch_size, 3, s, s}), Tensor({cfg.batch_size, 1, s, s}), {}};
  std::uniform_real_distribution<double> ratio(cfg.mask_ratio_min, cfg.mask_ratio_max);
  for (size_t k = 0; k < b; ++k) {
    const Tensor& img = images[order[k]];
    out.indices.push_back(order[k]);
    std::copy(img.data().begin(), img.data().end(), out.image.data().begin() + static_cast<int64_t>(k) * 3 * s * s);
    MaskSpec spec;
    spec.ratio = ratio(rng);
    spec.height = spec.width = s;
    spec.seed = rng();
    const Tensor m = generate_mask(spec);
    std::copy(m.data().begin(), m.data().end(), out.mask.data().begin() + static_cast<int64_t>(k) * s * s);
  }
  return out;
}

/// One optimisation step. Returns the loss breakdown before the update.
inline LossRow train_step(UNetModel& model, Adam& adam, const FeatureNetwork& features, const LossWeights& weights,
                          const Batch& batch) {
  GradTape tape;
  auto params = bind_parameters(model, tape, true);
  Var input = tape.constant(zero_holes(batch.image, batch.mask));
  auto fwd = unet_forward(model, params, input, batch.mask);
  auto loss = total_loss(fwd.image, tape.constant(batch.image), batch.mask, features, weights);
  auto grads = tape.backward(loss.total);
  adam.step(model.mutable_parameters(), grads);
  LossRow r;
  r.tv = loss.tv;
  r.valid = loss.valid;
  r.hole = loss.hole;
  r.perceptual = loss.perceptual;
  r.style = loss.style;
  r.total = loss.total_value;
  return r;
}

struct TrainResult {
  UNetModel model;
  std::vector<LossRow> log;  // rows produced by this call (resumed runs: from k+1)
  int64_t start_iter = 1;
  double seconds = 0;
};

using TrainProgress = std::function<void(const LossRow&)>;

namespace detail {

inline NamedTensorList checkpoint_tensors(const UNetModel& model, const Adam& adam, int64_t iter) {
  NamedTensorList t = model.parameters();
  for (auto& s : adam.state()) t.push_back(std::move(s));
  t.emplace_back("train.iter", Tensor({1, 1, 1, 1}, static_cast<float>(iter)));
  return t;
}

inline void write_log(const std::string& path, const std::vector<std::string>& lines) {
  if (path.empty()) return;
  std::string text = std::string(kLossLogHeader) + "\n";
  for (const auto& l : lines) text += l + "\n";
  atomic_write(path, Bytes(text.begin(), text.end()));
}

/// Rows of an existing log with iter <= `upto`, verbatim.
inline std::vector<std::string> read_log_prefix(const std::string& path, int64_t upto) {
  std::vector<std::string> lines;
  std::ifstream in(path);
  std::string line;
  if (!std::getline(in, line)) return lines;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (std::stoll(line.substr(0, line.find(','))) > upto) break;
    lines.push_back(line);
  }
  return lines;
}

}  // namespace detail

inline TrainResult train(const TrainConfig& cfg, const TrainProgress& progress = nullptr) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const auto images = load_training_images(cfg);
  const FeatureNetwork features = make_feature_network(cfg.features);

  TrainResult res{UNetModel(cfg.unet, cfg.seed), {}, 1, 0};
  Adam adam(AdamConfig{.lr = cfg.lr});
  std::vector<std::string> lines;
  if (!cfg.resume.empty()) {
    auto tensors = load_tensors(cfg.resume);
    NamedTensorList params, state;
    int64_t done = -1;
    for (auto& [n, t] : tensors) {
      if (n == "train.iter") {
        done = static_cast<int64_t>(t.item());
      } else if (n.rfind("adam.", 0) == 0) {
        state.emplace_back(n, t);
      } else {
        params.emplace_back(n, t);
      }
    }
    if (done < 0) throw WeightsError(WeightsErrc::kMissingTensor, cfg.resume + " is not a checkpoint (no train.iter)");
    assign_weights(res.model, params);
    adam.load_state(state);
    res.start_iter = done + 1;
    lines = detail::read_log_prefix(cfg.log_path, done);
  }

  for (int64_t it = res.start_iter; it <= cfg.iterations; ++it) {
    adam.set_lr(scheduled_lr(cfg.lr, it, cfg.iterations, cfg.lr_schedule == "cosine"));
    LossRow row = train_step(res.model, adam, features, cfg.loss, sample_batch(cfg, images, it));
    row.iter = it;
    res.log.push_back(row);
    lines.push_back(format_row(row));
    if (progress) progress(row);
    if (cfg.checkpoint_every > 0 && it % cfg.checkpoint_every == 0) {
      save_tensors(cfg.checkpoint_path, detail::checkpoint_tensors(res.model, adam, it));
      detail::write_log(cfg.log_path, lines);
    }
  }
  save_weights(res.model, cfg.output);
  detail::write_log(cfg.log_path, lines);
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

/// Mean of the first `window` totals vs the last `window` totals.
inline double loss_drop(const std::vector<LossRow>& log, size_t window = 10) {
  if (log.size() < 2 * window) throw std::invalid_argument("loss log too short for the moving average");
  double a = 0, b = 0;
  for (size_t i = 0; i < window; ++i) {
    a += log[i].total;
    b += log[log.size() - 1 - i].total;
  }
  return 1.0 - b / a;
}

// ---------------------------------------------------------------------------
// Inpainting front ends shared by the CLI, evaluation and the service

/// Learned inpainting: zero holes, run the UNet, composite onto the input.
inline Tensor inpaint_pconv(const UNetModel& model, const Tensor& image, const Tensor& mask) {
  model.config().check_input(image.shape(), mask.shape());
  auto [out, final_mask] = unet_infer(model, zero_holes(image, mask), mask);
  return composite(out, image, mask);
}

inline Tensor inpaint_ns(const Tensor& image, const Tensor& mask, const NSConfig& cfg = {}) {
  return ns_inpaint(image, mask, cfg);
}

// ---------------------------------------------------------------------------
// Evaluation

/// (image, mask) -> inpainted image; valid pixels are re-composited after.
using Inpainter = std::function<Tensor(const Tensor& image, const Tensor& mask)>;

inline bool is_learned_method(const std::string& m) {
  return m == "pconv" || m == "pconv_no_style" || m == "pconv_no_perceptual";
}

struct EvalConfig {
  std::string data_dir;
  std::string split = "all";
  std::map<std::string, std::string> weights;  // learned method -> weights file
  std::vector<double> ratios{0.05, 0.1, 0.2};
  std::vector<std::string> methods{"pconv", "ns"};
  uint64_t seed = 0;
  std::string report_path;  // empty: not written
  bool hole_only = false;
  bool include_images = true;
  NSConfig ns;

  void validate(const std::map<std::string, Inpainter>& extra = {}) const {
    if (ratios.empty()) throw ConfigError("at least one ratio is required");
    for (double r : ratios) {
      if (!(r > 0.0 && r < 1.0)) throw ConfigError("ratios must lie in (0,1), got " + std::to_string(r));
    }
    if (methods.empty()) throw ConfigError("at least one method is required");
    for (const auto& m : methods) {
      if (extra.count(m)) continue;
      if (m == "ns") continue;
      if (!is_learned_method(m)) throw ConfigError("unknown method '" + m + "'");
      if (!weights.count(m) || weights.at(m).empty()) throw ConfigError("method " + m + " needs a weights file");
    }
    parse_split(split);
  }
};

inline EvalConfig eval_config_from_json(const nlohmann::json& j, EvalConfig base = {}) {
  static const std::vector<std::string> known{"data_dir", "split", "weights", "ratios", "methods",
                                              "seed", "report", "hole_only", "include_images"};
  if (!j.is_object()) throw ConfigError("eval config must be a JSON object");
  for (const auto& [k, _] : j.items()) {
    if (std::find(known.begin(), known.end(), k) == known.end()) throw ConfigError("unknown eval config key: " + k);
  }
  try {
    detail::take(j, "data_dir", base.data_dir);
    detail::take(j, "split", base.split);
    if (j.contains("weights")) {
      if (j.at("weights").is_string()) {
        base.weights["pconv"] = j.at("weights").get<std::string>();
      } else {
        base.weights = j.at("weights").get<std::map<std::string, std::string>>();
      }
    }
    detail::take(j, "ratios", base.ratios);
    detail::take(j, "methods", base.methods);
    detail::take(j, "seed", base.seed);
    detail::take(j, "report", base.report_path);
    detail::take(j, "hole_only", base.hole_only);
    detail::take(j, "include_images", base.include_images);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad eval config: ") + e.what());
  }
  return base;
}

/// Mask for one (image, ratio bucket): shared by every method.
inline Tensor eval_mask(uint64_t seed, const std::string& image_name, size_t ratio_index, double ratio, int64_t h,
                        int64_t w) {
  const uint64_t name = fnv1a64(image_name);
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32), static_cast<uint32_t>(name),
                    static_cast<uint32_t>(name >> 32), static_cast<uint32_t>(ratio_index)};
  std::mt19937_64 rng(seq);
  MaskSpec spec;
  spec.ratio = ratio;
  spec.height = h;
  spec.width = w;
  spec.seed = rng();
  return generate_mask(spec);
}

/// Runs every method on every image at every ratio. `extra` registers
/// additional named inpainters usable in cfg.methods.
inline MetricsReport evaluate(const EvalConfig& cfg, const std::map<std::string, Inpainter>& extra = {}) {
  cfg.validate(extra);
  const auto files = list_images(cfg.data_dir, parse_split(cfg.split));
  if (files.empty()) throw ConfigError("no PNG images in " + cfg.data_dir + " (split " + cfg.split + ")");

  std::map<std::string, Inpainter> run;
  std::vector<std::shared_ptr<const UNetModel>> keep;
  for (const auto& m : cfg.methods) {
    if (extra.count(m)) {
      run[m] = extra.at(m);
    } else if (m == "ns") {
      const NSConfig ns = cfg.ns;
      run[m] = [ns](const Tensor& img, const Tensor& mask) { return inpaint_ns(img, mask, ns); };
    } else {
      auto model = std::make_shared<const UNetModel>(load_model(cfg.weights.at(m)));
      keep.push_back(model);
      run[m] = [model](const Tensor& img, const Tensor& mask) { return inpaint_pconv(*model, img, mask); };
    }
  }

  MetricsReport report;
  for (size_t ri = 0; ri < cfg.ratios.size(); ++ri) {
    for (const auto& f : files) {
      const std::string name = f.filename().string();
      const Tensor gt = load_image(f);
      const Tensor mask = eval_mask(cfg.seed, name, ri, cfg.ratios[ri], gt.shape().h, gt.shape().w);
      const double achieved = hole_ratio(mask);
      for (const auto& m : cfg.methods) {
        const Tensor out = composite(run.at(m)(gt, mask), gt, mask);
        ImageRecord rec{m, name, cfg.ratios[ri], achieved,
                        compute_metrics(out, gt, &mask, cfg.hole_only ? MetricRegion::kHole : MetricRegion::kFull)};
        report.add(std::move(rec));
      }
    }
  }
  if (!cfg.report_path.empty()) {
    const std::string text = report.to_json(cfg.include_images).dump(2) + "\n";
    atomic_write(cfg.report_path, Bytes(text.begin(), text.end()));
  }
  return report;
}

}  // namespace pcinpaint
