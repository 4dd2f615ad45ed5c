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

#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "gpcis/session.hpp"

namespace gpcis {

struct HttpConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string cors_origin = "*";
  std::filesystem::path static_dir;  // served at / when set
  std::size_t max_body_bytes = 32u << 20;
};

// JSON/PNG front end over a SessionManager:
//   POST   /v1/sessions                 multipart image, optional gt, optional seed
//   POST   /v1/sessions/{id}/clicks     {"row", "col", "label"}
//   POST   /v1/sessions/{id}/undo
//   GET    /v1/sessions/{id}            session summary
//   GET    /v1/sessions/{id}/mask       image/png
//   GET    /v1/sessions/{id}/maps?panel=prob|prior|update
//   GET    /v1/sessions/{id}/probabilities  {"width", "height", "prob": [...]}
//   DELETE /v1/sessions/{id}
// Errors are {"code", "message"} with a matching status.
class HttpService {
 public:
  HttpService(SessionManager& sessions, HttpConfig config);
  ~HttpService();
  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  // Blocks until stop(). Returns false if the socket could not be bound.
  bool listen();
  // Binds an ephemeral port on config.host and returns it (or -1).
  int bind_any_port();
  // Serves on a socket bound by bind_any_port(); blocks until stop().
  bool serve_bound();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace gpcis
