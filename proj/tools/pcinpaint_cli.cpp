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

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "pcinpaint/grad_suite.hpp"
#include "pcinpaint/image_io.hpp"
#include "pcinpaint/maskgen.hpp"
#include "pcinpaint/pipeline.hpp"
#include "pcinpaint/service.hpp"
#include "pcinpaint/synth.hpp"
#include "pcinpaint/weights.hpp"

namespace fs = std::filesystem;
using namespace pcinpaint;

namespace {

InpaintService* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

int cmd_inpaint(const std::string& image_path, const std::string& mask_path, const std::string& out_path,
                const std::string& weights, const std::string& baseline) {
  const Tensor image = load_image(image_path);
  const Tensor mask = load_mask(mask_path);
  if (mask.shape().h != image.shape().h || mask.shape().w != image.shape().w) {
    throw std::invalid_argument("mask and image sizes differ");
  }
  Tensor out;
  if (baseline == "ns") {
    out = composite(inpaint_ns(image, mask), image, mask);
  } else if (baseline.empty()) {
    if (weights.empty()) throw std::invalid_argument("--weights is required unless --baseline ns is given");
    out = inpaint_pconv(load_model(weights), image, mask);
  } else {
    throw std::invalid_argument("unknown baseline '" + baseline + "' (ns)");
  }
  save_image(out_path, out);
  std::printf("wrote %s (hole ratio %.4f)\n", out_path.c_str(), hole_ratio(mask));
  return 0;
}

int cmd_maskgen(double ratio, int64_t size, int count, uint64_t seed, const std::string& out_dir) {
  fs::create_directories(out_dir);
  for (int i = 0; i < count; ++i) {
    MaskSpec spec;
    spec.ratio = ratio;
    spec.height = spec.width = size;
    spec.seed = seed + static_cast<uint64_t>(i);
    const Tensor m = generate_mask(spec);
    char name[64];
    std::snprintf(name, sizeof(name), "mask_%04d.png", i);
    save_image(fs::path(out_dir) / name, m);
    std::printf("%s %.4f\n", name, hole_ratio(m));
  }
  return 0;
}

int cmd_gradcheck(uint64_t seed) {
  int failed = 0;
  for (const auto& r : gradient_suite(seed)) {
    std::printf("%-22s %s  probes %3lld  max abs %.2e  max rel %.2e\n", r.name.c_str(), r.passed() ? "ok  " : "FAIL",
                static_cast<long long>(r.probes), r.max_abs_error, r.max_rel_error);
    failed += r.passed() ? 0 : 1;
  }
  std::printf("%s\n", failed ? "gradient check FAILED" : "all gradients ok");
  return failed ? 1 : 0;
}

int cmd_serve(const std::string& weights, const std::string& host, int port) {
  auto model = std::make_shared<const UNetModel>(load_model(weights));
  InpaintService service(model, fs::path(weights).filename().string());
  if (!service.bind(host, port)) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  g_service = &service;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::printf("serving %s on http://%s:%d (divisor %lld)\n", weights.c_str(), host.c_str(), port,
              static_cast<long long>(service.divisor()));
  std::fflush(stdout);
  service.run();
  g_service = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Partial-convolution image inpainting"};
  app.require_subcommand(1);

  // inpaint
  auto* inp = app.add_subcommand("inpaint", "Fill the holes of one image");
  std::string inp_image, inp_mask, inp_out, inp_weights, inp_baseline;
  inp->add_option("--image", inp_image, "RGB PNG")->required();
  inp->add_option("--mask", inp_mask, "Mask PNG (white = valid, black = hole)")->required();
  inp->add_option("--out", inp_out, "Output PNG")->required();
  inp->add_option("--weights", inp_weights, "Model weights file");
  inp->add_option("--baseline", inp_baseline, "Use a classical method instead (ns)");

  // train
  auto* tr = app.add_subcommand("train", "Train a model");
  std::string tr_config, tr_profile, tr_preset;
  std::map<std::string, std::string> tr_over;
  TrainConfig tr_flags;
  tr->add_option("--config", tr_config, "JSON config file");
  tr->add_option("--profile", tr_profile, "Start from a built-in profile (desk)");
  tr->add_option("--preset", tr_preset, "Loss preset: full, no_style, no_perceptual");
  for (const char* key : {"data-dir", "split", "output", "log", "checkpoint", "resume", "iterations", "batch-size",
                          "checkpoint-every", "lr", "lr-schedule", "seed", "image-size"}) {
    tr->add_option(std::string("--") + key, tr_over[key]);
  }

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate methods on a directory of images");
  std::string ev_config, ev_data, ev_split, ev_report;
  std::vector<std::string> ev_weights, ev_methods;
  std::vector<double> ev_ratios;
  uint64_t ev_seed = 0;
  bool ev_hole_only = false, ev_no_images = false;
  ev->add_option("--config", ev_config, "JSON config file");
  ev->add_option("--data-dir", ev_data);
  ev->add_option("--split", ev_split, "all, train, val or test");
  ev->add_option("--weights", ev_weights, "METHOD=PATH (or PATH for pconv)");
  ev->add_option("--methods", ev_methods, "pconv, pconv_no_style, pconv_no_perceptual, ns")->delimiter(',');
  ev->add_option("--ratios", ev_ratios)->delimiter(',');
  auto* ev_seed_opt = ev->add_option("--seed", ev_seed);
  ev->add_option("--report", ev_report, "Report JSON path");
  ev->add_flag("--hole-only", ev_hole_only, "Score hole pixels only");
  ev->add_flag("--no-images", ev_no_images, "Omit per-image records from the report");

  // maskgen
  auto* mg = app.add_subcommand("maskgen", "Generate irregular masks");
  double mg_ratio = 0.1;
  int64_t mg_size = 256;
  int mg_count = 1;
  uint64_t mg_seed = 0;
  std::string mg_out;
  mg->add_option("--ratio", mg_ratio)->required();
  mg->add_option("--size", mg_size);
  mg->add_option("--count", mg_count);
  mg->add_option("--seed", mg_seed);
  mg->add_option("--out-dir", mg_out)->required();

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every gradient");
  uint64_t gc_seed = 2024;
  gc->add_option("--seed", gc_seed);

  // serve
  auto* sv = app.add_subcommand("serve", "HTTP service for the mask board");
  std::string sv_weights, sv_host = "127.0.0.1";
  int sv_port = 8080;
  sv->add_option("--weights", sv_weights)->required();
  sv->add_option("--host", sv_host);
  sv->add_option("--port", sv_port);

  // synth
  auto* sy = app.add_subcommand("synth", "Write procedural RGB images for smoke runs");
  std::string sy_out;
  int sy_count = 8;
  int64_t sy_size = 64;
  uint64_t sy_seed = 1;
  sy->add_option("--out-dir", sy_out)->required();
  sy->add_option("--count", sy_count);
  sy->add_option("--size", sy_size);
  sy->add_option("--seed", sy_seed);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*inp) return cmd_inpaint(inp_image, inp_mask, inp_out, inp_weights, inp_baseline);
    if (*mg) return cmd_maskgen(mg_ratio, mg_size, mg_count, mg_seed, mg_out);
    if (*gc) return cmd_gradcheck(gc_seed);
    if (*sv) return cmd_serve(sv_weights, sv_host, sv_port);
    if (*sy) {
      for (const auto& p : write_synth_set(sy_out, sy_count, sy_size, sy_seed)) std::printf("%s\n", p.c_str());
      return 0;
    }
    if (*tr) {
      TrainConfig cfg = tr_profile == "desk" ? TrainConfig::desk() : TrainConfig{};
      if (!tr_profile.empty() && tr_profile != "desk") throw ConfigError("unknown profile " + tr_profile);
      if (!tr_config.empty()) cfg = train_config_from_json(read_json_file(tr_config), cfg);
      if (!tr_preset.empty()) cfg.loss = loss_preset(tr_preset);
      nlohmann::json over = nlohmann::json::object();
      for (const auto& [k, v] : tr_over) {
        if (v.empty()) continue;
        std::string key = k;
        std::replace(key.begin(), key.end(), '-', '_');
        if (key == "data_dir" || key == "split" || key == "output" || key == "log" || key == "checkpoint" ||
            key == "resume" || key == "lr_schedule") {
          over[key] = v;
        } else {
          over[key] = nlohmann::json::parse(v);
        }
      }
      cfg = train_config_from_json(over, cfg);
      const int64_t every = std::max<int64_t>(1, cfg.iterations / 20);
      auto res = train(cfg, [&](const LossRow& r) {
        if (r.iter % every == 0 || r.iter == 1) std::printf("iter %6lld  total %.5g\n", static_cast<long long>(r.iter), r.total);
      });
      std::printf("wrote %s and %s in %.1f s\n", cfg.output.c_str(), cfg.log_path.c_str(), res.seconds);
      return 0;
    }
    if (*ev) {
      EvalConfig cfg;
      if (!ev_config.empty()) cfg = eval_config_from_json(read_json_file(ev_config), cfg);
      if (!ev_data.empty()) cfg.data_dir = ev_data;
      if (!ev_split.empty()) cfg.split = ev_split;
      for (const auto& w : ev_weights) {
        const auto eq = w.find('=');
        if (eq == std::string::npos) {
          cfg.weights["pconv"] = w;
        } else {
          cfg.weights[w.substr(0, eq)] = w.substr(eq + 1);
        }
      }
      if (!ev_methods.empty()) cfg.methods = ev_methods;
      if (!ev_ratios.empty()) cfg.ratios = ev_ratios;
      if (ev_seed_opt->count()) cfg.seed = ev_seed;
      if (!ev_report.empty()) cfg.report_path = ev_report;
      if (ev_hole_only) cfg.hole_only = true;
      if (ev_no_images) cfg.include_images = false;
      const auto report = evaluate(cfg);
      std::printf("%s", report.to_table().c_str());
      if (!cfg.report_path.empty()) std::printf("wrote %s\n", cfg.report_path.c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
