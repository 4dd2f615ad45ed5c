// Copyright 2026 The GPCIS Authors.
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

#include "gpcis/http_service.hpp"

#include <fmt/format.h>
#include <httplib.h>

#include <charconv>
#include <nlohmann/json.hpp>

#include "gpcis/errors.hpp"

namespace gpcis {
namespace {

constexpr const char* kIdPattern = "([0-9a-f]{32})";

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  res.status = status;
  res.set_content(nlohmann::json{{"code", code}, {"message", message}}.dump(), "application/json");
}

void send_json(httplib::Response& res, const nlohmann::json& body) {
  res.status = 200;
  res.set_content(body.dump(), "application/json");
}

nlohmann::json summary_json(const ClickSummary& s) {
  nlohmann::json j{{"n_clicks", s.n_clicks}};
  if (s.iou) j["iou"] = *s.iou;
  if (s.prob_at_click) j["prob_at_click"] = *s.prob_at_click;
  return j;
}

int parse_label(const nlohmann::json& v) {
  if (v.is_number_integer()) return v.get<int>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "+" || s == "+1" || s == "1" || s == "pos") return 1;
    if (s == "-" || s == "-1" || s == "neg") return -1;
  }
  throw ServiceError(400, "bad_label", "label must be +1 or -1");
}

std::uint64_t parse_seed(const std::string& text) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ServiceError(400, "bad_seed", "seed must be an unsigned integer");
  return v;
}

std::span<const std::uint8_t> bytes_of(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

}  // namespace

struct HttpService::Impl {
  SessionManager& sessions;
  HttpConfig config;
  httplib::Server server;

  Impl(SessionManager& s, HttpConfig c) : sessions(s), config(std::move(c)) {}

  template <typename F>
  httplib::Server::Handler guarded(F&& f) {
    return [f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const ServiceError& e) {
        send_error(res, e.status(), e.code(), e.what());
      } catch (const InvalidInput& e) {
        send_error(res, 400, "invalid_input", e.what());
      } catch (const nlohmann::json::exception& e) {
        send_error(res, 400, "bad_json", e.what());
      } catch (const NumericalError& e) {
        send_error(res, 500, "numerical_error", e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
      }
    };
  }

  void install() {
    server.set_payload_max_length(config.max_body_bytes);
    server.set_default_headers({{"Access-Control-Allow-Origin", config.cors_origin},
                                {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"},
                                {"Access-Control-Expose-Headers", "X-No-Clicks"}});
    server.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Post("/v1/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
      if (!req.has_file("image")) throw ServiceError(400, "missing_image", "multipart field 'image' is required");
      const std::string image = req.get_file_value("image").content;
      std::optional<std::string> gt;
      if (req.has_file("gt")) gt = req.get_file_value("gt").content;
      std::optional<std::uint64_t> seed;
      if (req.has_file("seed")) seed = parse_seed(req.get_file_value("seed").content);
      if (req.has_param("seed")) seed = parse_seed(req.get_param_value("seed"));
      std::optional<std::span<const std::uint8_t>> gt_bytes;
      if (gt) gt_bytes = bytes_of(*gt);
      const std::string id = sessions.create(bytes_of(image), gt_bytes, seed);
      res.status = 201;
      res.set_content(nlohmann::json{{"id", id}, {"seed", std::to_string(sessions.seed(id))}}.dump(),
                      "application/json");
    }));

    const std::string base = std::string("/v1/sessions/") + kIdPattern;
    server.Post(base + "/clicks", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const nlohmann::json body = nlohmann::json::parse(req.body);
      const int row = body.at("row").get<int>();
      const int col = body.at("col").get<int>();
      send_json(res, summary_json(sessions.add_click(req.matches[1], row, col, parse_label(body.at("label")))));
    }));
    server.Post(base + "/undo", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, summary_json(sessions.undo(req.matches[1])));
    }));
    server.Get(base, guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      send_json(res, {{"id", id}, {"n_clicks", sessions.click_count(id)}, {"seed", std::to_string(sessions.seed(id))}});
    }));
    server.Get(base + "/mask", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const MaskResult m = sessions.mask(req.matches[1]);
      const std::vector<std::uint8_t> png = encode_mask_png(m.mask);
      res.set_header("X-No-Clicks", m.no_clicks ? "true" : "false");
      res.set_content(std::string(png.begin(), png.end()), "image/png");
    }));
    server.Get(base + "/probabilities", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      const auto [width, height] = sessions.image_size(id);
      send_json(res, {{"width", width}, {"height", height}, {"prob", sessions.probabilities(id)}});
    }));
    server.Get(base + "/maps", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const MapPanel panel = parse_panel(req.has_param("panel") ? req.get_param_value("panel") : "prob");
      const std::vector<std::uint8_t> png = sessions.map_png(req.matches[1], panel);
      res.set_content(std::string(png.begin(), png.end()), "image/png");
    }));
    server.Delete(base, guarded([this](const httplib::Request& req, httplib::Response& res) {
      sessions.remove(req.matches[1]);
      res.status = 204;
    }));

    if (!config.static_dir.empty()) server.set_mount_point("/", config.static_dir.string());

    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      if (res.status == 404) {
        send_error(res, 404, "not_found", "no such endpoint or session");
      } else if (res.status == 413) {
        send_error(res, 413, "payload_too_large", "request body exceeds the size limit");
      }
    });
  }
};

HttpService::HttpService(SessionManager& sessions, HttpConfig config)
    : impl_(std::make_unique<Impl>(sessions, std::move(config))) {
  impl_->install();
}

HttpService::~HttpService() { stop(); }

bool HttpService::listen() { return impl_->server.listen(impl_->config.host, impl_->config.port); }

int HttpService::bind_any_port() { return impl_->server.bind_to_any_port(impl_->config.host); }

bool HttpService::serve_bound() { return impl_->server.listen_after_bind(); }

void HttpService::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

bool HttpService::running() const { return impl_->server.is_running(); }

}  // namespace gpcis
