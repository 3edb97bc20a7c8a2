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

// HTTP front end for the mask board.
//
//   GET  /api/health   -> {"status":"ok","model":"<weights file name>"}
//   POST /api/inpaint  multipart image, mask; method=pconv|ns|both
//                      -> {"results":{method: base64 PNG}, "timing_ms":{method: ms}}
//   POST /api/metrics  multipart image, mask, ground_truth; method=none|pconv|ns|both
//                      -> metrics report JSON
//
// The model is shared read-only between worker threads; every request works
// on its own tensors and tape.

#pragma once

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "pcinpaint/image_io.hpp"
#include "pcinpaint/metrics.hpp"
#include "pcinpaint/pipeline.hpp"

// After Eigen: <resolv.h>, pulled in by httplib, defines a _res macro.
#include <httplib.h>

namespace pcinpaint {

struct ServiceOptions {
  size_t max_payload = 16u << 20;
  NSConfig ns;
};

class InpaintService {
 public:
  InpaintService(std::shared_ptr<const UNetModel> model, std::string model_name, ServiceOptions opt = {})
      : model_(std::move(model)), model_name_(std::move(model_name)), opt_(opt) {
    if (!model_) throw std::invalid_argument("service needs a model");
    routes();
  }

  InpaintService(const InpaintService&) = delete;
  InpaintService& operator=(const InpaintService&) = delete;
  ~InpaintService() { stop(); }

  httplib::Server& server() { return server_; }
  int64_t divisor() const { return model_->config().divisor(); }

  /// Binds to an ephemeral port and returns it; call run() afterwards.
  int bind_any_port(const std::string& host = "127.0.0.1") { return server_.bind_to_any_port(host); }
  bool bind(const std::string& host, int port) { return server_.bind_to_port(host, port); }
  bool run() { return server_.listen_after_bind(); }
  bool listen(const std::string& host, int port) { return server_.listen(host, port); }
  void wait_until_ready() const { server_.wait_until_ready(); }
  void stop() {
    if (server_.is_running()) server_.stop();
  }

 private:
  struct BadRequest {
    int status;
    nlohmann::json body;
  };

  static void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static std::string field(const httplib::Request& req, const char* name) {
    if (!req.has_file(name)) throw BadRequest{400, {{"error", std::string("missing multipart field '") + name + "'"}}};
    return req.get_file_value(name).content;
  }

  static std::string method_param(const httplib::Request& req, const std::string& fallback) {
    if (req.has_param("method")) return req.get_param_value("method");
    if (req.has_file("method")) return req.get_file_value("method").content;
    return fallback;
  }

  static std::vector<std::string> expand_method(const std::string& m, bool allow_none) {
    if (m == "pconv" || m == "ns") return {m};
    if (m == "both") return {"pconv", "ns"};
    if (allow_none && m == "none") return {};
    throw BadRequest{400, {{"error", "method must be pconv, ns or both" + std::string(allow_none ? " or none" : "")},
                           {"method", m}}};
  }

  template <typename F>
  static Tensor decode_or_400(F&& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      throw BadRequest{400, {{"error", e.what()}}};
    }
  }

  /// Reads and checks an (image, mask) pair, applying the size contract.
  std::pair<Tensor, Tensor> read_pair(const httplib::Request& req) const {
    if (!req.is_multipart_form_data()) throw BadRequest{400, {{"error", "expected multipart/form-data"}}};
    Tensor image = decode_or_400([&] { return decode_image(to_bytes(field(req, "image")), "image"); });
    Tensor mask = decode_or_400([&] { return decode_mask(to_bytes(field(req, "mask")), "mask"); });
    const Shape& s = image.shape();
    if (mask.shape().h != s.h || mask.shape().w != s.w) {
      throw BadRequest{400, {{"error", "mask is " + std::to_string(mask.shape().w) + "x" +
                                           std::to_string(mask.shape().h) + ", image is " + std::to_string(s.w) +
                                           "x" + std::to_string(s.h)}}};
    }
    const int64_t d = divisor();
    if (s.h % d != 0 || s.w % d != 0) {
      throw BadRequest{422,
                       {{"error", "image " + std::to_string(s.w) + "x" + std::to_string(s.h) +
                                      " must have both sides divisible by " + std::to_string(d)},
                        {"divisor", d},
                        {"width", s.w},
                        {"height", s.h}}};
    }
    return {std::move(image), std::move(mask)};
  }

  static Bytes to_bytes(const std::string& s) { return Bytes(s.begin(), s.end()); }

  Tensor run_method(const std::string& m, const Tensor& image, const Tensor& mask) const {
    if (m == "pconv") return inpaint_pconv(*model_, image, mask);
    return composite(inpaint_ns(image, mask, opt_.ns), image, mask);
  }

  template <typename F>
  void guarded(httplib::Response& res, F&& f) const {
    try {
      f();
    } catch (const BadRequest& e) {
      send_json(res, e.status, e.body);
    } catch (const std::exception& e) {
      send_json(res, 500, {{"error", e.what()}});
    }
  }

  void routes() {
    server_.set_payload_max_length(opt_.max_payload);
    server_.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                 {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                 {"Access-Control-Allow-Headers", "Content-Type"}});
    server_.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    server_.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      const char* msg = res.status == 413 ? "payload too large (limit 16 MiB)" : "request failed";
      res.set_content(nlohmann::json{{"error", msg}, {"status", res.status}}.dump(), "application/json");
    });

    server_.Get("/api/health", [this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, {{"status", "ok"}, {"model", model_name_}});
    });

    server_.Post("/api/inpaint", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto methods = expand_method(method_param(req, "pconv"), false);
        auto [image, mask] = read_pair(req);
        nlohmann::json results = nlohmann::json::object(), timing = nlohmann::json::object();
        for (const auto& m : methods) {
          const auto t0 = std::chrono::steady_clock::now();
          const Tensor out = run_method(m, image, mask);
          timing[m] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
          const Bytes png = encode_png(out);
          results[m] = httplib::detail::base64_encode(std::string(png.begin(), png.end()));
        }
        send_json(res, 200, {{"results", results}, {"timing_ms", timing}});
      });
    });

    server_.Post("/api/metrics", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto methods = expand_method(method_param(req, "none"), true);
        auto [image, mask] = read_pair(req);
        Tensor gt = decode_or_400([&] { return decode_image(to_bytes(field(req, "ground_truth")), "ground_truth"); });
        if (gt.shape() != image.shape()) {
          throw BadRequest{400, {{"error", "ground_truth must match the image size"}}};
        }
        const double ratio = hole_ratio(mask);
        const double bucket = std::round(ratio * 100.0) / 100.0;
        MetricsReport report;
        report.add({"submitted", "image", bucket, ratio, compute_metrics(composite(image, gt, mask), gt)});
        for (const auto& m : methods) {
          report.add({m, "ground_truth", bucket, ratio, compute_metrics(run_method(m, gt, mask), gt)});
        }
        send_json(res, 200, report.to_json());
      });
    });
  }

  std::shared_ptr<const UNetModel> model_;
  std::string model_name_;
  ServiceOptions opt_;
  httplib::Server server_;
};

}  // namespace pcinpaint
