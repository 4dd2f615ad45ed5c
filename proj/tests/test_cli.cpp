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
#include <sys/wait.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "gpcis/checkpoint.hpp"
#include "gpcis/image.hpp"
#include "gpcis/session.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const fs::path& workdir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("gpcis_cli_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  static const struct Cleanup {
    ~Cleanup() {
      std::error_code ec;
      fs::remove_all(dir, ec);
    }
  } cleanup;
  return dir;
}

Run run(const std::string& args) {
  const fs::path log = workdir() / "last.log";
  const std::string cmd = std::string(GPCIS_BIN) + " " + args + " > " + log.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(log)};
}

// A small dataset and a short-trained model, built once.
const fs::path& dataset() {
  static const fs::path dir = [] {
    const fs::path d = workdir() / "data";
    const std::string cmd = std::string(GPCIS_SYNTH_BIN) + " --out " + d.string() + " --count 3 --seed 11 > /dev/null";
    REQUIRE(std::system(cmd.c_str()) == 0);
    return d;
  }();
  return dir;
}

const fs::path& model() {
  static const fs::path m = [] {
    const fs::path p = workdir() / "model.gpcis";
    const Run r = run("train --data " + dataset().string() + " --out " + p.string() + " --epochs 3 --batch 2 --seed 1");
    INFO(r.out);
    REQUIRE(r.code == 0);
    return p;
  }();
  return m;
}

}  // namespace

TEST_CASE("train reports the dataset layout on an empty directory") {
  const fs::path empty = workdir() / "empty";
  fs::create_directories(empty);
  const Run r = run("train --data " + empty.string() + " --out " + (workdir() / "x.gpcis").string());
  CHECK(r.code == 1);
  CHECK(r.out.find("DIR/images/NAME.png") != std::string::npos);
  CHECK_FALSE(fs::exists(workdir() / "x.gpcis"));
}

TEST_CASE("train writes a finite loss trace") {
  const std::string csv = slurp(model().string() + ".loss.csv");
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "epoch,nfl,vi,total");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) CHECK(std::isfinite(std::stod(cell)));
  }
  CHECK(rows == 3);
  const gpcis::ModelCheckpoint m = gpcis::load_checkpoint(model());
  CHECK(m.metadata.loss_trace.size() == 3);
}

TEST_CASE("alpha 0 matches --no-vi") {
  const std::string common = "train --data " + dataset().string() + " --epochs 2 --batch 2 --seed 4 --out ";
  const fs::path a = workdir() / "a0.gpcis", b = workdir() / "novi.gpcis";
  REQUIRE(run(common + a.string() + " --alpha 0").code == 0);
  REQUIRE(run(common + b.string() + " --no-vi").code == 0);
  CHECK(slurp(a.string() + ".loss.csv") == slurp(b.string() + ".loss.csv"));
  CHECK(slurp(a) == slurp(b));
}

TEST_CASE("segment validates the click list") {
  const fs::path img = dataset() / "images" / "0000.png";
  const fs::path out = workdir() / "bad.png";
  Run r = run("segment --model " + model().string() + " --image " + img.string() + " --out " + out.string() +
              " --clicks '10,10,+;oops'");
  CHECK(r.code == 1);
  CHECK(r.out.find("at position 8") != std::string::npos);
  r = run("segment --model " + model().string() + " --image " + img.string() + " --out " + out.string() +
          " --clicks ''");
  CHECK(r.code == 1);
  r = run("segment --model " + model().string() + " --image " + img.string() + " --out " + out.string() +
          " --clicks '10,10,+;900,1,-'");
  CHECK(r.code == 1);
  CHECK_FALSE(fs::exists(out));
}

TEST_CASE("segment matches the session service") {
  const fs::path img = dataset() / "images" / "0001.png";
  const fs::path out = workdir() / "seg.png";
  const fs::path maps = workdir() / "maps";
  const Run r = run("segment --model " + model().string() + " --image " + img.string() + " --out " + out.string() +
                    " --clicks '30,30,+;2,2,-;40,50,+' --seed 9 --maps-out " + maps.string());
  INFO(r.out);
  REQUIRE(r.code == 0);
  CHECK(fs::exists(maps / "prob.png"));
  CHECK(fs::exists(maps / "prior.png"));
  CHECK(fs::exists(maps / "update.png"));

  auto ckpt = std::make_shared<const gpcis::ModelCheckpoint>(gpcis::load_checkpoint(model()));
  gpcis::SessionManager sm(ckpt, {});
  const std::string png = slurp(img);
  const std::vector<std::uint8_t> bytes(png.begin(), png.end());
  const std::string id = sm.create(bytes, std::nullopt, 9);
  sm.add_click(id, 30, 30, 1);
  sm.add_click(id, 2, 2, -1);
  sm.add_click(id, 40, 50, 1);
  const std::string cli_mask = slurp(out);
  CHECK(gpcis::decode_mask(std::span(reinterpret_cast<const std::uint8_t*>(cli_mask.data()), cli_mask.size())) ==
        sm.mask(id).mask);
  const std::string cli_prob = slurp(maps / "prob.png");
  const auto svc_prob = sm.map_png(id, gpcis::MapPanel::kProb);
  CHECK(std::string(svc_prob.begin(), svc_prob.end()) == cli_prob);
}

TEST_CASE("eval is deterministic") {
  const fs::path r1 = workdir() / "eval1.json", r2 = workdir() / "eval2.json";
  const std::string common = "eval --model " + model().string() + " --data " + dataset().string() +
                             " --max-clicks 5 --seed 3 --report ";
  Run a = run(common + r1.string());
  INFO(a.out);
  REQUIRE(a.code == 0);
  CHECK(a.out.find("NoC@90") != std::string::npos);
  REQUIRE(run(common + r2.string() + " --jobs 2").code == 0);
  CHECK(slurp(r1) == slurp(r2));
  const json doc = json::parse(slurp(r1));
  CHECK(doc["traces"].size() == 3);
}

TEST_CASE("bench writes machine metadata") {
  const fs::path rep = workdir() / "bench.json";
  const Run r = run("bench --sizes 24x24,48x48 --repeat 1 --clicks 4 --report " + rep.string());
  INFO(r.out);
  REQUIRE(r.code == 0);
  const json doc = json::parse(slurp(rep));
  for (const char* key : {"cpu", "hardware_threads", "simd", "os", "compiler"}) CHECK(doc["machine"].contains(key));
  CHECK(doc["points"].size() == 2);
  CHECK(doc.contains("exponent"));
  CHECK(run("bench --sizes 24x24").code == 1);
}

TEST_CASE("sweep-eps writes one row per level") {
  const fs::path csv = workdir() / "sweep.csv";
  const Run r = run("sweep-eps --model " + model().string() + " --data " + dataset().string() +
                    " --max-clicks 4 --eps2 1e-1..1e-7 --csv " + csv.string());
  INFO(r.out);
  REQUIRE(r.code == 0);
  std::istringstream in(slurp(csv));
  std::string line;
  std::getline(in, line);
  CHECK(line == "eps2,noic");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 7);
}

TEST_CASE("selftest and its negative control") {
  Run r = run("selftest");
  INFO(r.out);
  CHECK(r.code == 0);
  CHECK(r.out.find("FAIL") == std::string::npos);
  r = run("selftest --inject-fault");
  CHECK(r.code == 1);
  CHECK(r.out.find("FAIL gradient-fd") != std::string::npos);
}

TEST_CASE("argument errors") {
  CHECK(run("segment --no-such-flag").code != 0);
  CHECK(run("frobnicate").code != 0);
  CHECK(run("--simd sse9 selftest").code != 0);
  CHECK(run("--help").code == 0);
}
