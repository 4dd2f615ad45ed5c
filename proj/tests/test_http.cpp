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

#include <nlohmann/json.hpp>
#include <thread>

#include "gpcis/clicksim.hpp"
#include "gpcis/http_service.hpp"
#include "gpcis/image.hpp"
#include "gpcis/session.hpp"
#include "gpcis/synthetic.hpp"

// After Eigen: <resolv.h> defines _res as a macro.
#include <httplib.h>

using namespace gpcis;
using nlohmann::json;

namespace {

struct Server {
  std::shared_ptr<const ModelCheckpoint> model = std::make_shared<const ModelCheckpoint>(init_model(ModelConfig{}, 1));
  SessionManager sessions;
  HttpService service;
  int port = -1;
  std::thread thread;

  explicit Server(SessionConfig sc = {}, HttpConfig hc = {})
      : sessions(model, sc), service(sessions, [&] {
          hc.host = "127.0.0.1";
          hc.cors_origin = "http://ui.example";
          return hc;
        }()) {
    port = service.bind_any_port();
    REQUIRE(port > 0);
    thread = std::thread([this] { service.serve_bound(); });
    for (int i = 0; i < 200 && !service.running(); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  ~Server() {
    service.stop();
    thread.join();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(30, 0);
    return c;
  }
};

std::string str(const std::vector<std::uint8_t>& b) { return {b.begin(), b.end()}; }

}  // namespace

TEST_CASE("session lifecycle over loopback") {
  Server srv;
  auto cli = srv.client();
  const LabeledImage li = make_synthetic(77, 0);
  const std::string png = str(encode_png_rgb(li.image));
  const std::string gt = str(encode_mask_png(li.gt));

  httplib::MultipartFormDataItems form{{"image", png, "img.png", "image/png"},
                                       {"gt", gt, "gt.png", "image/png"},
                                       {"seed", "42", "", ""}};
  auto res = cli.Post("/v1/sessions", form);
  REQUIRE(res);
  CHECK(res->status == 201);
  CHECK(res->get_header_value("Access-Control-Allow-Origin") == "http://ui.example");
  const json created = json::parse(res->body);
  const std::string id = created["id"];
  CHECK(created["seed"] == "42");
  const std::string base = "/v1/sessions/" + id;

  res = cli.Get(base + "/mask");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->get_header_value("X-No-Clicks") == "true");
  CHECK(decode_mask(std::span(reinterpret_cast<const std::uint8_t*>(res->body.data()), res->body.size()))
            .foreground_count() == 0);

  res = cli.Get(base + "/maps?panel=prob");
  REQUIRE(res);
  CHECK(res->status == 409);
  CHECK(json::parse(res->body)["code"] == "no_clicks");

  res = cli.Post(base + "/clicks", R"({"row": 30, "col": 31, "label": "+"})", "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  json click = json::parse(res->body);
  CHECK(click["n_clicks"] == 1);
  CHECK(click["prob_at_click"].get<double>() > 0.5);
  CHECK(click.contains("iou"));

  res = cli.Post(base + "/clicks", R"({"row": 2, "col": 3, "label": -1})", "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(json::parse(res->body)["prob_at_click"].get<double>() < 0.5);

  res = cli.Get(base);
  REQUIRE(res);
  CHECK(json::parse(res->body)["n_clicks"] == 2);

  // Mask, probability map and JSON probabilities describe the same prediction.
  auto mask_res = cli.Get(base + "/mask");
  auto prob_res = cli.Get(base + "/probabilities");
  auto map_res = cli.Get(base + "/maps?panel=prob");
  REQUIRE(mask_res);
  REQUIRE(prob_res);
  REQUIRE(map_res);
  CHECK(mask_res->get_header_value("Content-Type") == "image/png");
  CHECK(mask_res->get_header_value("X-No-Clicks") == "false");
  const json pj = json::parse(prob_res->body);
  const std::vector<double> prob = pj["prob"].get<std::vector<double>>();
  const Eigen::VectorXd p = Eigen::Map<const Eigen::VectorXd>(prob.data(), static_cast<Eigen::Index>(prob.size()));
  const Mask mask = decode_mask(std::span(reinterpret_cast<const std::uint8_t*>(mask_res->body.data()),
                                          mask_res->body.size()));
  CHECK(mask == threshold_mask(p, pj["width"], pj["height"]));
  CHECK(map_res->body == str(encode_probability_png(li.image.width, li.image.height, prob)));
  for (const char* panel : {"prior", "update"}) {
    auto r = cli.Get(base + "/maps?panel=" + panel);
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(r->body.size() > 8);
  }
  res = cli.Get(base + "/maps?panel=nope");
  REQUIRE(res);
  CHECK(res->status == 400);

  res = cli.Post(base + "/undo", "", "application/json");
  REQUIRE(res);
  CHECK(json::parse(res->body)["n_clicks"] == 1);
  res = cli.Post(base + "/clicks", R"({"row": 2, "col": 3, "label": -1})", "application/json");
  REQUIRE(res);
  auto again = cli.Get(base + "/mask");
  REQUIRE(again);
  CHECK(again->body == mask_res->body);

  res = cli.Delete(base);
  REQUIRE(res);
  CHECK(res->status == 204);
  res = cli.Get(base);
  REQUIRE(res);
  CHECK(res->status == 404);
  CHECK(json::parse(res->body)["code"] == "not_found");
}

TEST_CASE("http errors") {
  SessionConfig sc;
  sc.max_image_dim = 48;
  Server srv(sc);
  auto cli = srv.client();
  const LabeledImage li = make_synthetic(3, 1);

  auto res = cli.Post("/v1/sessions", httplib::MultipartFormDataItems{{"image", "not a png", "x.png", "image/png"}});
  REQUIRE(res);
  CHECK(res->status == 400);
  CHECK(json::parse(res->body)["code"] == "bad_image");

  res = cli.Post("/v1/sessions", httplib::MultipartFormDataItems{{"gt", "x", "x.png", "image/png"}});
  REQUIRE(res);
  CHECK(res->status == 400);

  const std::string big = str(encode_png_rgb(li.image));  // 64x64 > 48
  res = cli.Post("/v1/sessions", httplib::MultipartFormDataItems{{"image", big, "b.png", "image/png"}});
  REQUIRE(res);
  CHECK(res->status == 413);
  CHECK(json::parse(res->body)["code"] == "image_too_large");

  SyntheticConfig small;
  small.width = small.height = 16;
  const std::string ok = str(encode_png_rgb(make_synthetic(3, 2, small).image));
  res = cli.Post("/v1/sessions", httplib::MultipartFormDataItems{{"image", ok, "s.png", "image/png"}});
  REQUIRE(res);
  REQUIRE(res->status == 201);
  const std::string base = "/v1/sessions/" + json::parse(res->body)["id"].get<std::string>();

  res = cli.Post(base + "/clicks", R"({"row": 99, "col": 0, "label": 1})", "application/json");
  REQUIRE(res);
  CHECK(res->status == 400);
  CHECK(json::parse(res->body)["code"] == "out_of_range");
  res = cli.Post(base + "/clicks", R"({"row": 1, "col": 0, "label": "maybe"})", "application/json");
  REQUIRE(res);
  CHECK(res->status == 400);
  res = cli.Post(base + "/clicks", "{not json", "application/json");
  REQUIRE(res);
  CHECK(res->status == 400);
  CHECK(json::parse(res->body)["code"] == "bad_json");
  res = cli.Post(base + "/clicks", R"({"row": 1, "col": 1, "label": 1})", "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  res = cli.Post(base + "/clicks", R"({"row": 1, "col": 1, "label": -1})", "application/json");
  REQUIRE(res);
  CHECK(res->status == 409);
  res = cli.Post(base + "/undo", "", "application/json");
  res = cli.Post(base + "/undo", "", "application/json");
  REQUIRE(res);
  CHECK(res->status == 409);

  res = cli.Get("/v1/sessions/ffffffffffffffffffffffffffffffff/mask");
  REQUIRE(res);
  CHECK(res->status == 404);
  res = cli.Get("/v1/nowhere");
  REQUIRE(res);
  CHECK(res->status == 404);

  res = cli.Options("/v1/sessions");
  REQUIRE(res);
  CHECK(res->status == 204);
  CHECK(res->get_header_value("Access-Control-Allow-Methods").find("DELETE") != std::string::npos);
}

TEST_CASE("oversized bodies are refused") {
  HttpConfig hc;
  hc.max_body_bytes = 1024;
  Server srv({}, hc);
  auto cli = srv.client();
  const std::string blob(4096, 'x');
  auto res = cli.Post("/v1/sessions", httplib::MultipartFormDataItems{{"image", blob, "x.png", "image/png"}});
  REQUIRE(res);
  CHECK(res->status == 413);
}
