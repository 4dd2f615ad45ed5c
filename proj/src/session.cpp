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

#include "gpcis/session.hpp"

#include <fmt/format.h>

#include <random>

#include "gpcis/clicksim.hpp"
#include "gpcis/errors.hpp"

namespace gpcis {

std::uint64_t content_seed(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

MapPanel parse_panel(const std::string& name) {
  if (name == "prob") return MapPanel::kProb;
  if (name == "prior") return MapPanel::kPrior;
  if (name == "update") return MapPanel::kUpdate;
  throw ServiceError(400, "bad_panel", fmt::format("unknown panel '{}' (expected prob, prior or update)", name));
}

SessionManager::SessionManager(std::shared_ptr<const ModelCheckpoint> model, SessionConfig config, Clock clock)
    : model_(std::move(model)), config_(config), clock_(std::move(clock)) {
  if (!model_) throw InvalidInput("session manager needs a model");
  if (!clock_) clock_ = [] { return std::chrono::steady_clock::now(); };
}

std::string SessionManager::new_id() {
  static thread_local std::random_device rd;
  std::string id;
  for (int i = 0; i < 4; ++i) id += fmt::format("{:08x}", rd());
  return id;
}

std::string SessionManager::create(std::span<const std::uint8_t> image_bytes,
                                   std::optional<std::span<const std::uint8_t>> gt_bytes,
                                   std::optional<std::uint64_t> seed) {
  auto s = std::make_shared<Session>();
  try {
    s->image = decode_image(image_bytes);
  } catch (const std::exception& e) {
    throw ServiceError(400, "bad_image", fmt::format("could not decode image: {}", e.what()));
  }
  if (s->image.width > config_.max_image_dim || s->image.height > config_.max_image_dim) {
    throw ServiceError(413, "image_too_large",
                       fmt::format("image is {}x{}, the limit is {} per side", s->image.width, s->image.height,
                                   config_.max_image_dim));
  }
  if (gt_bytes) {
    Mask gt;
    try {
      gt = decode_mask(*gt_bytes);
    } catch (const std::exception& e) {
      throw ServiceError(400, "bad_gt", fmt::format("could not decode gt mask: {}", e.what()));
    }
    if (gt.width != s->image.width || gt.height != s->image.height) {
      throw ServiceError(400, "gt_size_mismatch", "gt mask dimensions differ from the image");
    }
    s->gt = std::move(gt);
  }
  s->features = extract_features(s->image);
  s->seed = seed.value_or(content_seed(image_bytes));
  s->last_used = clock_();

  evict_expired();
  std::lock_guard<std::mutex> lock(store_mu_);
  if (sessions_.size() >= config_.max_sessions) {
    throw ServiceError(503, "too_many_sessions", "session limit reached, try again later");
  }
  std::string id = new_id();
  while (sessions_.count(id)) id = new_id();
  sessions_.emplace(id, std::move(s));
  return id;
}

std::shared_ptr<SessionManager::Session> SessionManager::find(const std::string& id) {
  evict_expired();
  std::lock_guard<std::mutex> lock(store_mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ServiceError(404, "not_found", fmt::format("no session '{}'", id));
  return it->second;
}

void SessionManager::predict(Session& s) {
  if (s.clicks.empty()) {
    s.last_sample.reset();
    return;
  }
  std::vector<double> previous;
  if (model_->config.previous_mask_channel && s.last_sample) {
    previous.assign(s.last_sample->prob.data(), s.last_sample->prob.data() + s.last_sample->prob.size());
  }
  const FeatureMap input = model_features(*model_, s.features, previous);
  s.last_sample = sample_model(*model_, input, s.clicks, config_.eps2, model_->head.sigma2, s.seed);
}

ClickSummary SessionManager::add_click(const std::string& id, int row, int col, int label) {
  auto s = find(id);
  std::lock_guard<std::mutex> lock(s->mu);
  s->last_used = clock_();
  if (row < 0 || row >= s->image.height || col < 0 || col >= s->image.width) {
    throw ServiceError(400, "out_of_range",
                       fmt::format("pixel ({}, {}) is outside the {}x{} image", row, col, s->image.height,
                                   s->image.width));
  }
  if (label != 1 && label != -1) throw ServiceError(400, "bad_label", "label must be +1 or -1");
  const auto pixel = static_cast<std::size_t>(row) * s->image.width + col;
  if (s->clicks.contains(pixel)) {
    throw ServiceError(409, "duplicate_click", fmt::format("pixel ({}, {}) is already clicked", row, col));
  }
  s->clicks.add({pixel, label});
  try {
    predict(*s);
  } catch (const NumericalError& e) {
    s->clicks.pop_back();
    throw ServiceError(500, "numerical_error", e.what());
  }
  ClickSummary out;
  out.n_clicks = s->clicks.size();
  out.prob_at_click = s->last_sample->prob[static_cast<Eigen::Index>(pixel)];
  if (s->gt) out.iou = iou(threshold_mask(s->last_sample->prob, s->image.width, s->image.height), *s->gt);
  return out;
}

ClickSummary SessionManager::undo(const std::string& id) {
  auto s = find(id);
  std::lock_guard<std::mutex> lock(s->mu);
  s->last_used = clock_();
  if (s->clicks.empty()) throw ServiceError(409, "no_clicks", "nothing to undo");
  s->clicks.pop_back();
  // The previous-probability channel is path dependent; replay from scratch.
  if (model_->config.previous_mask_channel) {
    ClickSet all = s->clicks;
    s->clicks = ClickSet();
    s->last_sample.reset();
    for (const Click& c : all.clicks()) {
      s->clicks.add(c);
      predict(*s);
    }
  } else {
    predict(*s);
  }
  ClickSummary out;
  out.n_clicks = s->clicks.size();
  if (s->gt && s->last_sample) {
    out.iou = iou(threshold_mask(s->last_sample->prob, s->image.width, s->image.height), *s->gt);
  }
  return out;
}

MaskResult SessionManager::mask(const std::string& id) {
  auto s = find(id);
  std::lock_guard<std::mutex> lock(s->mu);
  s->last_used = clock_();
  if (!s->last_sample) return {Mask(s->image.width, s->image.height), true};
  return {threshold_mask(s->last_sample->prob, s->image.width, s->image.height), false};
}

std::vector<double> SessionManager::probabilities(const std::string& id) {
  auto s = find(id);
  std::lock_guard<std::mutex> lock(s->mu);
  s->last_used = clock_();
  if (!s->last_sample) throw ServiceError(409, "no_clicks", "no clicks yet");
  const Eigen::VectorXd& p = s->last_sample->prob;
  return {p.data(), p.data() + p.size()};
}

std::vector<std::uint8_t> SessionManager::map_png(const std::string& id, MapPanel panel) {
  auto s = find(id);
  std::lock_guard<std::mutex> lock(s->mu);
  s->last_used = clock_();
  if (!s->last_sample) throw ServiceError(409, "no_clicks", "no clicks yet");
  const DecomposedProbabilities d = decompose(*s->last_sample);
  const Eigen::VectorXd& v =
      panel == MapPanel::kProb ? s->last_sample->prob : (panel == MapPanel::kPrior ? d.prior_prob : d.update_prob);
  return encode_probability_png(s->image.width, s->image.height, {v.data(), static_cast<std::size_t>(v.size())});
}

std::uint64_t SessionManager::seed(const std::string& id) {
  auto s = find(id);
  std::lock_guard<std::mutex> lock(s->mu);
  return s->seed;
}

std::pair<int, int> SessionManager::image_size(const std::string& id) {
  auto s = find(id);
  std::lock_guard<std::mutex> lock(s->mu);
  return {s->image.width, s->image.height};
}

std::size_t SessionManager::click_count(const std::string& id) {
  auto s = find(id);
  std::lock_guard<std::mutex> lock(s->mu);
  return s->clicks.size();
}

void SessionManager::remove(const std::string& id) {
  std::lock_guard<std::mutex> lock(store_mu_);
  if (sessions_.erase(id) == 0) throw ServiceError(404, "not_found", fmt::format("no session '{}'", id));
}

std::size_t SessionManager::size() {
  std::lock_guard<std::mutex> lock(store_mu_);
  return sessions_.size();
}

void SessionManager::evict_expired() {
  const auto now = clock_();
  std::lock_guard<std::mutex> lock(store_mu_);
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    std::unique_lock<std::mutex> session_lock(it->second->mu, std::try_to_lock);
    // A session busy serving a request is in use by definition.
    if (session_lock.owns_lock() && now - it->second->last_used > config_.ttl) {
      session_lock.unlock();
      it = sessions_.erase(it);
    } else {
      ++it;
    }
  }
}

}  // namespace gpcis
