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

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gpcis/features.hpp"
#include "gpcis/image.hpp"
#include "gpcis/model.hpp"
#include "gpcis/posterior.hpp"

namespace gpcis {

// Error with an HTTP-style status and a short machine-readable code.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, std::string code, const std::string& message)
      : std::runtime_error(message), status_(status), code_(std::move(code)) {}

  int status() const { return status_; }
  const std::string& code() const { return code_; }

 private:
  int status_;
  std::string code_;
};

// FNV-1a over the encoded image; the default seed when none is given.
std::uint64_t content_seed(std::span<const std::uint8_t> bytes);

struct SessionConfig {
  int max_image_dim = 512;
  std::chrono::seconds ttl{30 * 60};
  std::size_t max_sessions = 64;
  double eps2 = 1e-7;
};

struct ClickSummary {
  std::size_t n_clicks = 0;
  std::optional<double> iou;
  std::optional<double> prob_at_click;
};

struct MaskResult {
  Mask mask;
  bool no_clicks = false;
};

enum class MapPanel { kProb, kPrior, kUpdate };

MapPanel parse_panel(const std::string& name);

class SessionManager {
 public:
  using Clock = std::function<std::chrono::steady_clock::time_point()>;

  SessionManager(std::shared_ptr<const ModelCheckpoint> model, SessionConfig config, Clock clock = {});

  std::string create(std::span<const std::uint8_t> image_bytes,
                     std::optional<std::span<const std::uint8_t>> gt_bytes = std::nullopt,
                     std::optional<std::uint64_t> seed = std::nullopt);

  ClickSummary add_click(const std::string& id, int row, int col, int label);
  ClickSummary undo(const std::string& id);
  MaskResult mask(const std::string& id);
  // Probability map of the current prediction; requires at least one click.
  std::vector<double> probabilities(const std::string& id);
  std::vector<std::uint8_t> map_png(const std::string& id, MapPanel panel);
  std::uint64_t seed(const std::string& id);
  std::pair<int, int> image_size(const std::string& id);
  std::size_t click_count(const std::string& id);
  void remove(const std::string& id);

  std::size_t size();
  void evict_expired();
  const SessionConfig& config() const { return config_; }

 private:
  struct Session {
    std::mutex mu;
    Image image;
    FeatureMap features;
    ClickSet clicks;
    std::optional<PosteriorSample> last_sample;
    std::optional<Mask> gt;
    std::uint64_t seed = 0;
    std::chrono::steady_clock::time_point last_used;
  };

  std::shared_ptr<Session> find(const std::string& id);
  void predict(Session& s);
  std::string new_id();

  std::shared_ptr<const ModelCheckpoint> model_;
  SessionConfig config_;
  Clock clock_;
  std::mutex store_mu_;
  std::unordered_map<std::string, std::shared_ptr<Session>> sessions_;
};

}  // namespace gpcis
