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

#include <doctest.h>

#include <chrono>
#include <thread>

#include "gpcis/clicksim.hpp"
#include "gpcis/image.hpp"
#include "gpcis/session.hpp"
#include "gpcis/synthetic.hpp"

using namespace gpcis;

namespace {

struct Fixture {
  LabeledImage li = make_synthetic(77, 0);
  std::vector<std::uint8_t> png = encode_png_rgb(li.image);
  std::vector<std::uint8_t> gt_png = encode_mask_png(li.gt);
  std::shared_ptr<const ModelCheckpoint> model = std::make_shared<const ModelCheckpoint>(init_model(ModelConfig{}, 1));

  Click first_click() const { return *next_click(Mask(li.gt.width, li.gt.height), li.gt, ClickSet{}); }
  int row(const Click& c) const { return static_cast<int>(c.pixel) / li.gt.width; }
  int col(const Click& c) const { return static_cast<int>(c.pixel) % li.gt.width; }
};

int status_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ServiceError& e) {
    return e.status();
  }
  return 0;
}

}  // namespace

TEST_CASE("create and first click") {
  Fixture fx;
  SessionManager sm(fx.model, {});
  const std::string id = sm.create(fx.png, fx.gt_png);
  CHECK(id.size() == 32);
  CHECK(sm.click_count(id) == 0);
  CHECK(sm.seed(id) == content_seed(fx.png));

  const MaskResult empty = sm.mask(id);
  CHECK(empty.no_clicks);
  CHECK(empty.mask.foreground_count() == 0);
  CHECK(status_of([&] { sm.map_png(id, MapPanel::kProb); }) == 409);
  CHECK(status_of([&] { sm.undo(id); }) == 409);

  const Click c = fx.first_click();
  const ClickSummary s = sm.add_click(id, fx.row(c), fx.col(c), 1);
  CHECK(s.n_clicks == 1);
  REQUIRE(s.prob_at_click.has_value());
  CHECK(*s.prob_at_click > 0.5);
  REQUIRE(s.iou.has_value());
  CHECK(*s.iou >= 0.0);
  CHECK(*s.iou <= 1.0);
  CHECK_FALSE(sm.mask(id).no_clicks);
}

TEST_CASE("request validation") {
  Fixture fx;
  SessionConfig cfg;
  cfg.max_image_dim = 32;
  SessionManager small(fx.model, cfg);
  CHECK(status_of([&] { small.create(fx.png); }) == 413);

  SessionManager sm(fx.model, {});
  const std::vector<std::uint8_t> junk{1, 2, 3};
  CHECK(status_of([&] { sm.create(junk); }) == 400);
  const std::vector<std::uint8_t> wrong_gt = encode_mask_png(Mask(10, 10));
  CHECK(status_of([&] { sm.create(fx.png, wrong_gt); }) == 400);

  const std::string id = sm.create(fx.png);
  CHECK(status_of([&] { sm.add_click(id, -1, 0, 1); }) == 400);
  CHECK(status_of([&] { sm.add_click(id, 0, fx.li.image.width, 1); }) == 400);
  CHECK(status_of([&] { sm.add_click(id, 0, 0, 0); }) == 400);
  sm.add_click(id, 3, 4, -1);
  CHECK(status_of([&] { sm.add_click(id, 3, 4, 1); }) == 409);
  CHECK(sm.click_count(id) == 1);
  CHECK(status_of([&] { sm.add_click("0123456789abcdef0123456789abcdef", 1, 1, 1); }) == 404);
  CHECK(status_of([&] { parse_panel("grad"); }) == 400);

  sm.remove(id);
  CHECK(status_of([&] { sm.mask(id); }) == 404);
  CHECK(status_of([&] { sm.remove(id); }) == 404);
}

TEST_CASE("same image and seed give the same mask stream") {
  Fixture fx;
  SessionManager sm(fx.model, {});
  const std::string a = sm.create(fx.png, std::nullopt, 5);
  const std::string b = sm.create(fx.png, std::nullopt, 5);
  const std::string c = sm.create(fx.png, std::nullopt, 6);
  const std::vector<std::array<int, 3>> clicks{{30, 30, 1}, {2, 2, -1}, {40, 12, 1}, {60, 60, -1}};
  bool differs = false;
  for (const auto& k : clicks) {
    sm.add_click(a, k[0], k[1], k[2]);
    sm.add_click(c, k[0], k[1], k[2]);
    sm.add_click(b, k[0], k[1], k[2]);
    CHECK(sm.mask(a).mask == sm.mask(b).mask);
    CHECK(sm.probabilities(a) == sm.probabilities(b));
    differs |= sm.probabilities(a) != sm.probabilities(c);
  }
  CHECK(differs);
}

TEST_CASE("undo then redo is identical") {
  Fixture fx;
  SessionManager sm(fx.model, {});
  const std::string id = sm.create(fx.png);
  sm.add_click(id, 30, 30, 1);
  const auto one = sm.probabilities(id);
  const auto prior_one = sm.map_png(id, MapPanel::kPrior);
  sm.add_click(id, 5, 5, -1);
  const auto two = sm.probabilities(id);
  const auto png_two = sm.map_png(id, MapPanel::kUpdate);
  const ClickSummary u = sm.undo(id);
  CHECK(u.n_clicks == 1);
  CHECK(sm.probabilities(id) == one);
  CHECK(sm.map_png(id, MapPanel::kPrior) == prior_one);
  sm.add_click(id, 5, 5, -1);
  CHECK(sm.probabilities(id) == two);
  CHECK(sm.map_png(id, MapPanel::kUpdate) == png_two);
  sm.undo(id);
  sm.undo(id);
  CHECK(sm.mask(id).no_clicks);
}

TEST_CASE("maps and mask agree with the probabilities") {
  Fixture fx;
  SessionManager sm(fx.model, {});
  const std::string id = sm.create(fx.png);
  sm.add_click(id, 30, 30, 1);
  sm.add_click(id, 3, 60, -1);
  const auto prob = sm.probabilities(id);
  const int w = fx.li.image.width, h = fx.li.image.height;
  CHECK(sm.map_png(id, MapPanel::kProb) == encode_probability_png(w, h, prob));
  const Mask decoded = decode_mask(encode_mask_png(sm.mask(id).mask));
  const Eigen::VectorXd p = Eigen::Map<const Eigen::VectorXd>(prob.data(), static_cast<Eigen::Index>(prob.size()));
  CHECK(decoded == threshold_mask(p, w, h));
  // Reads never mutate.
  CHECK(sm.probabilities(id) == prob);
  CHECK(sm.click_count(id) == 2);
}

TEST_CASE("previous-probability channel replays on undo") {
  Fixture fx;
  ModelConfig mc;
  mc.previous_mask_channel = true;
  auto model = std::make_shared<const ModelCheckpoint>(init_model(mc, 2));
  SessionManager sm(model, {});
  const std::string id = sm.create(fx.png);
  sm.add_click(id, 30, 30, 1);
  const auto one = sm.probabilities(id);
  sm.add_click(id, 3, 3, -1);
  const auto two = sm.probabilities(id);
  sm.undo(id);
  CHECK(sm.probabilities(id) == one);
  sm.add_click(id, 3, 3, -1);
  CHECK(sm.probabilities(id) == two);
}

TEST_CASE("ttl eviction and the session cap") {
  Fixture fx;
  auto now = std::chrono::steady_clock::time_point{};
  SessionConfig cfg;
  cfg.ttl = std::chrono::seconds(60);
  cfg.max_sessions = 2;
  SessionManager sm(fx.model, cfg, [&] { return now; });
  const std::string a = sm.create(fx.png);
  now += std::chrono::seconds(30);
  const std::string b = sm.create(fx.png);
  CHECK(status_of([&] { sm.create(fx.png); }) == 503);
  now += std::chrono::seconds(45);  // a idle 75 s, b idle 45 s
  CHECK(status_of([&] { sm.mask(a); }) == 404);
  CHECK(status_of([&] { sm.mask(b); }) == 0);
  CHECK(sm.size() == 1);
  const std::string c = sm.create(fx.png);
  CHECK(sm.size() == 2);
  CHECK(c != b);
}

TEST_CASE("sessions are isolated under concurrency") {
  Fixture fx;
  SessionManager serial(fx.model, {});
  SessionManager shared(fx.model, {});
  std::vector<std::array<int, 3>> clicks;
  for (int k = 0; k < 6; ++k) clicks.push_back({5 + 9 * k, 60 - 8 * k, k % 2 == 0 ? 1 : -1});

  std::vector<std::vector<double>> expected;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const std::string id = serial.create(fx.png, std::nullopt, seed);
    for (const auto& k : clicks) serial.add_click(id, k[0], k[1], k[2]);
    expected.push_back(serial.probabilities(id));
  }

  std::vector<std::string> ids;
  for (std::uint64_t seed = 0; seed < 4; ++seed) ids.push_back(shared.create(fx.png, std::nullopt, seed));
  std::vector<std::thread> workers;
  for (std::size_t t = 0; t < ids.size(); ++t) {
    workers.emplace_back([&, t] {
      for (const auto& k : clicks) {
        shared.add_click(ids[t], k[0], k[1], k[2]);
        (void)shared.mask(ids[(t + 1) % ids.size()]);
      }
    });
  }
  for (auto& w : workers) w.join();
  for (std::size_t t = 0; t < ids.size(); ++t) CHECK(shared.probabilities(ids[t]) == expected[t]);
}

TEST_CASE("click latency on a 128x128 image") {
  SyntheticConfig sc;
  sc.width = sc.height = 128;
  const LabeledImage li = make_synthetic(3, 0, sc);
  auto model = std::make_shared<const ModelCheckpoint>(init_model(ModelConfig{}, 1));
  SessionManager sm(model, {});
  const std::string id = sm.create(encode_png_rgb(li.image));
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const auto start = std::chrono::steady_clock::now();
    sm.add_click(id, 6 * k + 3, 120 - 5 * k, k % 3 == 0 ? -1 : 1);
    worst = std::max(worst, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  INFO("slowest click " << worst * 1000.0 << " ms");
  CHECK(worst <= 0.2);
}
