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

// gpcis: train, segment, eval, bench, sweep-eps, selftest and serve.
// Exit codes: 0 success, 1 validation failure, 2 numerical failure.

#include <fmt/format.h>
#include <sys/utsname.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <regex>
#include <string>
#include <thread>

#include "gpcis/checkpoint.hpp"
#include "gpcis/clicksim.hpp"
#include "gpcis/errors.hpp"
#include "gpcis/features.hpp"
#include "gpcis/http_service.hpp"
#include "gpcis/image.hpp"
#include "gpcis/model.hpp"
#include "gpcis/session.hpp"
#include "gpcis/simd/kernels.hpp"
#include "gpcis/training.hpp"
#include "verify.hpp"

namespace {

using gpcis::InvalidInput;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;

// --seed wins, then GPCIS_SEED, then the command's own default.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, std::uint64_t fallback) {
  if (flag) return *flag;
  if (const char* env = std::getenv("GPCIS_SEED"); env != nullptr && *env != '\0') {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw InvalidInput(fmt::format("GPCIS_SEED='{}' is not an unsigned integer", env));
  }
  return fallback;
}

void print_config(const std::string& command, const nlohmann::ordered_json& cfg) {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["simd"] = gpcis::simd::active_table().name;
  j["config"] = cfg;
  std::cerr << "resolved " << j.dump() << "\n";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  gpcis::write_file_bytes(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

// "r,c,+;r,c,-" with optional spaces. Errors name the character position.
gpcis::ClickSet parse_clicks(const std::string& text, int width, int height) {
  gpcis::ClickSet clicks;
  std::size_t pos = 0;
  const auto fail = [&](const std::string& what) {
    throw InvalidInput(fmt::format("click string: {} at position {}", what, pos));
  };
  const auto skip_ws = [&] {
    while (pos < text.size() && text[pos] == ' ') ++pos;
  };
  const auto number = [&]() -> long {
    skip_ws();
    const std::size_t start = pos;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos == start) fail("expected a non-negative integer");
    if (pos - start > 9) fail("number too large");
    return std::stol(text.substr(start, pos - start));
  };
  const auto expect = [&](char c) {
    skip_ws();
    if (pos >= text.size() || text[pos] != c) fail(fmt::format("expected '{}'", c));
    ++pos;
  };
  skip_ws();
  while (pos < text.size()) {
    const std::size_t item_start = pos;
    const long row = number();
    expect(',');
    const long col = number();
    expect(',');
    skip_ws();
    if (pos >= text.size() || (text[pos] != '+' && text[pos] != '-')) fail("expected '+' or '-'");
    const int label = text[pos] == '+' ? 1 : -1;
    ++pos;
    if (row >= height || col >= width) {
      pos = item_start;
      fail(fmt::format("click ({}, {}) outside the {}x{} image", row, col, height, width));
    }
    const auto pixel = static_cast<std::size_t>(row) * width + static_cast<std::size_t>(col);
    if (clicks.contains(pixel)) {
      pos = item_start;
      fail(fmt::format("duplicate click ({}, {})", row, col));
    }
    clicks.add({pixel, label});
    skip_ws();
    if (pos < text.size()) {
      expect(';');
      skip_ws();
    }
  }
  if (clicks.empty()) throw InvalidInput("at least one click is required");
  return clicks;
}

std::vector<double> parse_targets(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || !(v > 0.0 && v <= 100.0)) throw InvalidInput(fmt::format("bad IoU target '{}'", item));
    out.push_back(v > 1.0 ? v / 100.0 : v);
  }
  if (out.empty()) throw InvalidInput("no IoU targets given");
  return out;
}

// "1e-1..1e-7" expands to every decade in between; otherwise a comma list.
std::vector<double> parse_eps2(const std::string& text) {
  const std::regex range(R"(^\s*1e(-?\d+)\s*\.\.\s*1e(-?\d+)\s*$)");
  std::smatch m;
  std::vector<double> out;
  if (std::regex_match(text, m, range)) {
    const int a = std::stoi(m[1]);
    const int b = std::stoi(m[2]);
    const int step = a <= b ? 1 : -1;
    for (int e = a;; e += step) {
      out.push_back(std::stod(fmt::format("1e{}", e)));
      if (e == b) break;
    }
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || !(v > 0.0)) throw InvalidInput(fmt::format("bad jitter level '{}'", item));
    out.push_back(v);
  }
  if (out.empty()) throw InvalidInput("no jitter levels given");
  return out;
}

std::vector<std::pair<int, int>> parse_sizes(const std::string& text) {
  std::vector<std::pair<int, int>> out;
  const std::regex one(R"(^\s*(\d+)x(\d+)\s*$)");
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::smatch m;
    if (!std::regex_match(item, m, one)) throw InvalidInput(fmt::format("bad size '{}' (expected WxH)", item));
    const int w = std::stoi(m[1]);
    const int h = std::stoi(m[2]);
    if (w < 8 || h < 8 || w > 4096 || h > 4096) throw InvalidInput(fmt::format("size '{}' out of range", item));
    out.emplace_back(w, h);
  }
  if (out.size() < 2) throw InvalidInput("bench needs at least two sizes to fit an exponent");
  return out;
}

std::string cpu_model() {
  std::ifstream in("/proc/cpuinfo");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) return line.substr(colon + 2);
    }
  }
  return "unknown";
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  std::string data, out, loss_csv, sampler = "random";
  int epochs = 60, batch = 4, bases = gpcis::kDefaultBases;
  double lr = 1e-3, alpha = 1e-3, gamma = 2.0;
  std::optional<std::uint64_t> seed;
  bool no_vi = false, fixed_kernel = false, fixed_ws = false, no_concat = false, flip = false, prev_channel = false;
};

int run_train(const TrainArgs& a) {
  gpcis::TrainConfig tc;
  tc.alpha = a.no_vi ? 0.0 : a.alpha;
  tc.lr = a.lr;
  tc.epochs = a.epochs;
  tc.batch = a.batch;
  tc.gamma = a.gamma;
  tc.seed = resolve_seed(a.seed, 0);
  tc.flip = a.flip;
  if (a.sampler == "random") {
    tc.sampler = gpcis::ClickSampler::kRandom;
  } else if (a.sampler == "iterative") {
    tc.sampler = gpcis::ClickSampler::kIterative;
  } else {
    throw InvalidInput(fmt::format("unknown sampler '{}'", a.sampler));
  }
  gpcis::ModelConfig mc;
  mc.bases = a.bases;
  mc.fixed_kernel = a.fixed_kernel;
  mc.fixed_weight_space = a.fixed_ws;
  mc.concat_image = !a.no_concat;
  mc.previous_mask_channel = a.prev_channel;
  const std::string csv = a.loss_csv.empty() ? a.out + ".loss.csv" : a.loss_csv;
  print_config("train", {{"data", a.data},
                         {"out", a.out},
                         {"loss_csv", csv},
                         {"epochs", tc.epochs},
                         {"batch", tc.batch},
                         {"lr", tc.lr},
                         {"alpha", tc.alpha},
                         {"gamma", tc.gamma},
                         {"eps2", tc.eps2},
                         {"sampler", a.sampler},
                         {"flip", tc.flip},
                         {"bases", mc.bases},
                         {"fixed_kernel", mc.fixed_kernel},
                         {"fixed_weightspace", mc.fixed_weight_space},
                         {"concat_image", mc.concat_image},
                         {"previous_mask_channel", mc.previous_mask_channel},
                         {"seed", tc.seed}});
  const std::vector<gpcis::LabeledImage> data = gpcis::load_dataset(a.data);
  gpcis::TrainCallbacks cb;
  cb.on_epoch = [&](const gpcis::LossRecord& r) {
    std::cerr << fmt::format("epoch {:>4}/{}  nfl {:.5f}  vi {:.5f}  total {:.5f}\n", r.epoch + 1, tc.epochs, r.nfl,
                             r.vi, r.total);
  };
  cb.on_warning = [](const std::string& w) { std::cerr << "warning: " << w << "\n"; };
  const gpcis::ModelCheckpoint model = gpcis::train(data, mc, tc, cb);
  gpcis::save_checkpoint(model, a.out);
  write_text(csv, gpcis::loss_trace_csv(model.metadata.loss_trace));
  std::cout << fmt::format("wrote {} ({} images, {} skipped) and {}\n", a.out, data.size(),
                           model.metadata.skipped_images, csv);
  return kExitOk;
}

// ---- segment --------------------------------------------------------------

struct SegmentArgs {
  std::string model, image, clicks, out, maps_out;
  std::optional<std::uint64_t> seed;
  double eps2 = 1e-7;
  int samples = 1;
  bool dump = false;
};

int run_segment(const SegmentArgs& a) {
  const gpcis::ModelCheckpoint model = gpcis::load_checkpoint(a.model);
  const std::vector<std::uint8_t> bytes = gpcis::read_file_bytes(a.image);
  const gpcis::Image image = gpcis::decode_image(bytes);
  const gpcis::ClickSet clicks = parse_clicks(a.clicks, image.width, image.height);
  const std::uint64_t seed = resolve_seed(a.seed, gpcis::content_seed(bytes));
  if (a.samples < 1) throw InvalidInput("--samples must be at least 1");
  print_config("segment", {{"model", a.model},
                           {"image", a.image},
                           {"clicks", clicks.size()},
                           {"out", a.out},
                           {"maps_out", a.maps_out},
                           {"eps2", a.eps2},
                           {"sigma2", model.head.sigma2},
                           {"samples", a.samples},
                           {"seed", seed}});
  const gpcis::FeatureMap base = gpcis::extract_features(image);
  // Same click-by-click path as a service session, so outputs agree.
  gpcis::PosteriorSample sample;
  gpcis::ClickSet prefix;
  for (const gpcis::Click& c : clicks.clicks()) {
    prefix.add(c);
    if (!model.config.previous_mask_channel && prefix.size() < clicks.size()) continue;
    std::vector<double> previous;
    if (model.config.previous_mask_channel && sample.prob.size() > 0) {
      previous.assign(sample.prob.data(), sample.prob.data() + sample.prob.size());
    }
    const gpcis::FeatureMap input = gpcis::model_features(model, base, previous);
    sample = gpcis::sample_model(model, input, prefix, a.eps2, model.head.sigma2, seed);
  }
  Eigen::VectorXd prob = sample.prob;
  if (a.samples > 1) {
    const gpcis::FeatureMap input = gpcis::model_features(model, base);
    prob = gpcis::predict(input, clicks, model.head, model.kernel, model.weight_space, a.eps2, model.head.sigma2, seed,
                          a.samples);
  }
  const gpcis::Mask mask = gpcis::threshold_mask(prob, image.width, image.height);
  gpcis::write_file_bytes(a.out, gpcis::encode_mask_png(mask));
  if (!a.maps_out.empty()) {
    const std::filesystem::path dir = a.maps_out;
    std::filesystem::create_directories(dir);
    const gpcis::DecomposedProbabilities d = gpcis::decompose(sample);
    const auto save = [&](const std::string& name, const Eigen::VectorXd& v) {
      gpcis::write_file_bytes(dir / (name + ".png"),
                              gpcis::encode_probability_png(image.width, image.height,
                                                            {v.data(), static_cast<std::size_t>(v.size())}));
      if (a.dump) {
        gpcis::write_float_dump(dir / (name + ".f32"), {v.data(), static_cast<std::size_t>(v.size())},
                                static_cast<std::size_t>(v.size()), 1);
      }
    };
    save("prob", prob);
    save("prior", d.prior_prob);
    save("update", d.update_prob);
  }
  std::size_t fg = mask.foreground_count();
  std::cout << fmt::format("wrote {} ({} of {} pixels foreground)\n", a.out, fg, mask.pixel_count());
  return kExitOk;
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
  std::string model, data, targets = "85,90", report;
  int max_clicks = gpcis::kDefaultMaxClicks, jobs = 1;
  double eps2 = 1e-7;
  bool zero_sigma2 = false;
  std::optional<std::uint64_t> seed;
};

int run_eval(const EvalArgs& a) {
  const gpcis::ModelCheckpoint model = gpcis::load_checkpoint(a.model);
  gpcis::EvalOptions eo;
  eo.max_clicks = a.max_clicks;
  eo.targets = parse_targets(a.targets);
  eo.eps2 = a.eps2;
  if (a.zero_sigma2) eo.sigma2 = 0.0;
  eo.seed = resolve_seed(a.seed, 0);
  eo.jobs = a.jobs;
  if (eo.max_clicks < 1) throw InvalidInput("--max-clicks must be at least 1");
  print_config("eval", {{"model", a.model},
                        {"data", a.data},
                        {"max_clicks", eo.max_clicks},
                        {"targets", eo.targets},
                        {"eps2", eo.eps2},
                        {"sigma2", eo.sigma2.value_or(model.head.sigma2)},
                        {"jobs", eo.jobs},
                        {"report", a.report},
                        {"seed", eo.seed}});
  const std::vector<gpcis::LabeledImage> data = gpcis::load_dataset(a.data);
  const gpcis::BenchmarkReport report = gpcis::evaluate(model, data, eo);
  if (!a.report.empty()) write_text(a.report, gpcis::report_json(report));
  std::cout << gpcis::report_table(report);
  return kExitOk;
}

// ---- bench ----------------------------------------------------------------

struct BenchArgs {
  std::string model, sizes = "100x100,200x200,400x400", report;
  int repeat = 5, clicks = 10;
  std::optional<std::uint64_t> seed;
};

int run_bench(const BenchArgs& a) {
  gpcis::verify::ComplexityOptions o;
  o.sizes = parse_sizes(a.sizes);
  o.repeat = a.repeat;
  o.clicks = a.clicks;
  o.seed = resolve_seed(a.seed, 0);
  if (o.repeat < 1) throw InvalidInput("--repeat must be at least 1");
  std::optional<gpcis::ModelCheckpoint> model;
  if (!a.model.empty()) model = gpcis::load_checkpoint(a.model);
  print_config("bench", {{"model", a.model.empty() ? "(untrained default)" : a.model},
                         {"sizes", a.sizes},
                         {"repeat", o.repeat},
                         {"clicks", o.clicks},
                         {"seed", o.seed}});
  const gpcis::verify::ComplexityResult r = gpcis::verify::complexity(o, model ? &*model : nullptr);
  utsname un{};
  uname(&un);
  nlohmann::ordered_json j;
  j["machine"] = {{"cpu", cpu_model()},
                  {"hardware_threads", std::thread::hardware_concurrency()},
                  {"simd", gpcis::simd::active_table().name},
                  {"os", fmt::format("{} {}", un.sysname, un.release)},
                  {"compiler", __VERSION__}};
  nlohmann::ordered_json points = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < r.pixels.size(); ++i) {
    points.push_back({{"pixels", r.pixels[i]}, {"seconds", r.seconds[i]}});
  }
  j["points"] = points;
  j["exponent"] = r.exponent;
  j["within_linear_band"] = r.verdict.pass;
  if (!a.report.empty()) write_text(a.report, j.dump(2) + "\n");
  std::cout << fmt::format("{:>10} {:>12}\n", "pixels", "ms/sample");
  for (std::size_t i = 0; i < r.pixels.size(); ++i) {
    std::cout << fmt::format("{:>10.0f} {:>12.3f}\n", r.pixels[i], 1000.0 * r.seconds[i]);
  }
  std::cout << fmt::format("fitted exponent {:.3f} on {} ({} threads, simd {})\n", r.exponent, cpu_model(),
                           std::thread::hardware_concurrency(), gpcis::simd::active_table().name);
  return kExitOk;
}

// ---- sweep-eps ------------------------------------------------------------

struct SweepArgs {
  std::string model, data, eps2 = "1e-1..1e-7", csv;
  int max_clicks = gpcis::kDefaultMaxClicks;
  bool assert_trend = false;
  std::optional<std::uint64_t> seed;
};

int run_sweep(const SweepArgs& a) {
  const gpcis::ModelCheckpoint model = gpcis::load_checkpoint(a.model);
  const std::vector<double> levels = parse_eps2(a.eps2);
  const std::uint64_t seed = resolve_seed(a.seed, 0);
  print_config("sweep-eps", {{"model", a.model},
                             {"data", a.data},
                             {"eps2", levels},
                             {"sigma2", 0.0},
                             {"max_clicks", a.max_clicks},
                             {"trace_eps2", 1e-7},
                             {"seed", seed}});
  const std::vector<gpcis::LabeledImage> data = gpcis::load_dataset(a.data);
  std::vector<gpcis::FeatureMap> features;
  std::vector<gpcis::Mask> gts;
  for (const gpcis::LabeledImage& li : data) {
    features.push_back(gpcis::extract_features(li.image));
    gts.push_back(li.gt);
  }
  const auto traces = gpcis::reference_traces(model, features, gts, a.max_clicks, 1e-7, seed);
  const auto rows = gpcis::sweep_eps(model, features, traces, levels, 0.0, seed);
  std::string csv = "eps2,noic\n";
  bool trend = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    csv += fmt::format("{:g},{}\n", rows[i].eps2, rows[i].noic);
    if (i > 0 && rows[i].eps2 < rows[i - 1].eps2 && rows[i].noic > rows[i - 1].noic + 1) trend = false;
  }
  if (!a.csv.empty()) write_text(a.csv, csv);
  std::cout << csv;
  std::cerr << fmt::format("{} clicks replayed per level; non-increasing trend (1 unit jitter): {}\n",
                           rows.empty() ? 0 : rows.front().clicks, trend ? "yes" : "no");
  return a.assert_trend && !trend ? kExitValidation : kExitOk;
}

// ---- selftest -------------------------------------------------------------

int run_selftest(bool inject_fault) {
  print_config("selftest", {{"inject_fault", inject_fault}});
  namespace v = gpcis::verify;
  bool all = true;
  const auto report = [&](const std::string& name, const v::Result& r) {
    std::cout << fmt::format("{} {:<22} {}\n", r.pass ? "PASS" : "FAIL", name, r.detail) << std::flush;
    all = all && r.pass;
  };
  report("kernel-oracle", v::kernel_oracle({}));
  report("exact-posterior-oracle", v::exact_posterior_oracle({}));
  v::FidelityOptions fo;
  fo.samples = 4000;
  report("pathwise-moments", v::sampler_fidelity(fo));
  v::RffOptions ro;
  report("fourier-features", v::rff_approximation(ro));
  v::GradientOptions go;
  go.fixtures = 3;
  go.inject_fault = inject_fault;
  report("gradient-fd", v::gradient_check(go));
  report("distance-transform", v::distance_transform({}));
  std::cout << (all ? "all self-tests passed\n" : "self-test FAILED\n");
  return all ? kExitOk : kExitValidation;
}

// ---- serve ----------------------------------------------------------------

struct ServeArgs {
  std::string model, host = "127.0.0.1", static_dir, cors = "*";
  int port = 8080, max_dim = 512, ttl = 1800, max_sessions = 64;
};

int run_serve(const ServeArgs& a) {
  auto model = std::make_shared<const gpcis::ModelCheckpoint>(gpcis::load_checkpoint(a.model));
  gpcis::SessionConfig sc;
  sc.max_image_dim = a.max_dim;
  sc.ttl = std::chrono::seconds(a.ttl);
  sc.max_sessions = static_cast<std::size_t>(a.max_sessions);
  if (a.max_dim < 1 || a.ttl < 1 || a.max_sessions < 1) throw InvalidInput("serve limits must be positive");
  gpcis::HttpConfig hc;
  hc.host = a.host;
  hc.port = a.port;
  hc.static_dir = a.static_dir;
  hc.cors_origin = a.cors;
  print_config("serve", {{"model", a.model},
                         {"host", hc.host},
                         {"port", hc.port},
                         {"max_image_dim", sc.max_image_dim},
                         {"session_ttl", a.ttl},
                         {"max_sessions", a.max_sessions},
                         {"static", a.static_dir},
                         {"cors_origin", hc.cors_origin},
                         {"eps2", sc.eps2},
                         {"seed", "per session: seed field, else image hash"}});
  gpcis::SessionManager sessions(model, sc);
  gpcis::HttpService service(sessions, hc);
  std::cerr << fmt::format("listening on http://{}:{}\n", hc.host, hc.port);
  if (!service.listen()) {
    std::cerr << fmt::format("error: could not listen on {}:{}\n", hc.host, hc.port);
    return kExitValidation;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian-process click segmentation"};
  app.require_subcommand(1);
  std::string simd = "auto";
  app.add_option("--simd", simd, "Kernel implementation: auto, scalar or avx2 (env GPCIS_SIMD)")
      ->envname("GPCIS_SIMD");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a model on DIR/images/*.png + DIR/masks/*.png");
  train->add_option("--data", ta.data, "Dataset directory")->required();
  train->add_option("--out", ta.out, "Checkpoint to write")->required();
  train->add_option("--loss-csv", ta.loss_csv, "Loss trace CSV (default: <out>.loss.csv)");
  train->add_option("--epochs", ta.epochs, "Epochs")->capture_default_str();
  train->add_option("--batch", ta.batch, "Images per step")->capture_default_str();
  train->add_option("--lr", ta.lr, "Adam learning rate")->capture_default_str();
  train->add_option("--alpha", ta.alpha, "Weight of the variational term")->capture_default_str();
  train->add_option("--gamma", ta.gamma, "Focal exponent")->capture_default_str();
  train->add_option("--bases", ta.bases, "Fourier bases")->capture_default_str();
  train->add_option("--sampler", ta.sampler, "Click sampler: random or iterative")->capture_default_str();
  train->add_option("--seed", ta.seed, "Seed (fallback: GPCIS_SEED, then 0)");
  train->add_flag("--no-vi", ta.no_vi, "Drop the variational term (same as --alpha 0)");
  train->add_flag("--fixed-kernel", ta.fixed_kernel, "Freeze kernel scales at eta0 = 1, eta_t = 1/e");
  train->add_flag("--fixed-weightspace", ta.fixed_ws, "Freeze theta, tau, mu_w and sigma_w^2 at their draws");
  train->add_flag("--no-concat-image", ta.no_concat, "Kernel and bases on features only, without raw color");
  train->add_flag("--flip", ta.flip, "Random horizontal flips");
  train->add_flag("--previous-mask-channel", ta.prev_channel,
                  "Experimental: previous probability map as an extra feature channel");

  SegmentArgs sa;
  auto* segment = app.add_subcommand("segment", "Segment one image from a click list");
  segment->add_option("--model", sa.model, "Checkpoint")->required();
  segment->add_option("--image", sa.image, "PNG or binary PPM image")->required();
  segment->add_option("--clicks", sa.clicks,
                      "Clicks as \"row,col,+;row,col,-\" (+ foreground, - background), applied in order")
      ->required();
  segment->add_option("--out", sa.out, "Mask PNG to write")->required();
  segment->add_option("--maps-out", sa.maps_out, "Directory for prob/prior/update PNGs");
  segment->add_flag("--dump", sa.dump, "Also write float32 dumps of the maps");
  segment->add_option("--eps2", sa.eps2, "Jitter")->capture_default_str();
  segment->add_option("--samples", sa.samples, "Posterior samples averaged for the mask")->capture_default_str();
  segment->add_option("--seed", sa.seed, "Seed (fallback: GPCIS_SEED, then a hash of the image file)");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Run the click-simulation benchmark");
  eval->add_option("--model", ea.model, "Checkpoint")->required();
  eval->add_option("--data", ea.data, "Dataset directory")->required();
  eval->add_option("--max-clicks", ea.max_clicks, "Click budget per image")->capture_default_str();
  eval->add_option("--targets", ea.targets, "IoU targets in percent")->capture_default_str();
  eval->add_option("--report", ea.report, "JSON report with full traces");
  eval->add_option("--eps2", ea.eps2, "Jitter")->capture_default_str();
  eval->add_flag("--zero-sigma2", ea.zero_sigma2, "Sample f_n without variational noise");
  eval->add_option("--jobs", ea.jobs, "Images evaluated in parallel")->capture_default_str();
  eval->add_option("--seed", ea.seed, "Seed (fallback: GPCIS_SEED, then 0)");

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "Time posterior sampling against image size");
  bench->add_option("--model", ba.model, "Checkpoint (default: untrained model)");
  bench->add_option("--sizes", ba.sizes, "Comma-separated WxH sizes")->capture_default_str();
  bench->add_option("--repeat", ba.repeat, "Timings per size (minimum is kept)")->capture_default_str();
  bench->add_option("--clicks", ba.clicks, "Clicks per image")->capture_default_str();
  bench->add_option("--report", ba.report, "JSON report");
  bench->add_option("--seed", ba.seed, "Seed (fallback: GPCIS_SEED, then 0)");

  SweepArgs wa;
  auto* sweep = app.add_subcommand("sweep-eps", "NoIC against jitter with sigma2 = 0");
  sweep->add_option("--model", wa.model, "Checkpoint")->required();
  sweep->add_option("--data", wa.data, "Dataset directory")->required();
  sweep->add_option("--eps2", wa.eps2, "Levels: 1eA..1eB (every decade) or a comma list")->capture_default_str();
  sweep->add_option("--max-clicks", wa.max_clicks, "Click budget per image")->capture_default_str();
  sweep->add_option("--csv", wa.csv, "CSV output (eps2,noic)");
  sweep->add_flag("--assert-trend", wa.assert_trend, "Exit 1 if NoIC rises by more than one between levels");
  sweep->add_option("--seed", wa.seed, "Seed (fallback: GPCIS_SEED, then 0)");

  bool inject = false;
  auto* selftest = app.add_subcommand("selftest", "Run the oracle suites");
  selftest->add_flag("--inject-fault", inject, "Negative control: the gradient check must fail");

  ServeArgs va;
  auto* serve = app.add_subcommand("serve", "HTTP session service");
  serve->add_option("--model", va.model, "Checkpoint")->required()->envname("GPCIS_MODEL");
  serve->add_option("--host", va.host, "Bind address")->capture_default_str()->envname("GPCIS_HOST");
  serve->add_option("--port", va.port, "Port")->capture_default_str()->envname("GPCIS_PORT");
  serve->add_option("--max-image-dim", va.max_dim, "Largest accepted width/height")
      ->capture_default_str()
      ->envname("GPCIS_MAX_IMAGE_DIM");
  serve->add_option("--session-ttl", va.ttl, "Idle seconds before a session is dropped")
      ->capture_default_str()
      ->envname("GPCIS_SESSION_TTL");
  serve->add_option("--max-sessions", va.max_sessions, "Concurrent session cap")->capture_default_str();
  serve->add_option("--static", va.static_dir, "Directory served at / (web UI)");
  serve->add_option("--cors-origin", va.cors, "Access-Control-Allow-Origin value")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (!gpcis::simd::select_table(simd)) {
      throw InvalidInput(fmt::format("--simd '{}' is unknown or unsupported on this CPU", simd));
    }
    if (*train) return run_train(ta);
    if (*segment) return run_segment(sa);
    if (*eval) return run_eval(ea);
    if (*bench) return run_bench(ba);
    if (*sweep) return run_sweep(wa);
    if (*selftest) return run_selftest(inject);
    if (*serve) return run_serve(va);
  } catch (const gpcis::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}
