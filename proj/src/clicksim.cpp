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

#include "gpcis/clicksim.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>
#include <chrono>
#include <atomic>
#include <nlohmann/json.hpp>

#include "gpcis/errors.hpp"
#include "gpcis/rng.hpp"

namespace gpcis {
namespace {

void require_same_shape(const Mask& a, const Mask& b) {
  if (a.width != b.width || a.height != b.height) throw InvalidInput("mask dimensions differ");
}

// One-dimensional squared distance transform of a sampled function
// (lower envelope of parabolas).
void edt_1d(const double* f, std::size_t n, std::size_t stride, double* out, std::vector<double>& z,
            std::vector<std::size_t>& v, std::vector<double>& fcopy) {
  fcopy.resize(n);
  for (std::size_t q = 0; q < n; ++q) fcopy[q] = f[q * stride];
  v.assign(n, 0);
  z.assign(n + 1, 0.0);
  std::size_t k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (std::size_t q = 1; q < n; ++q) {
    const auto qd = static_cast<double>(q);
    double s;
    for (;;) {
      const auto vk = static_cast<double>(v[k]);
      s = ((fcopy[q] + qd * qd) - (fcopy[v[k]] + vk * vk)) / (2.0 * qd - 2.0 * vk);
      if (s <= z[k] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (std::size_t q = 0; q < n; ++q) {
    const auto qd = static_cast<double>(q);
    while (z[k + 1] < qd) ++k;
    const double diff = qd - static_cast<double>(v[k]);
    out[q * stride] = diff * diff + fcopy[v[k]];
  }
}

Eigen::VectorXd model_prob(const ModelCheckpoint& model, const FeatureMap& fm, const ClickSet& clicks, double eps2,
                           double sigma2, std::uint64_t seed) {
  return sample_model(model, fm, clicks, eps2, sigma2, seed).prob;
}

}  // namespace

double iou(const Mask& a, const Mask& b) {
  require_same_shape(a, b);
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const bool x = a.values[i] != 0;
    const bool y = b.values[i] != 0;
    inter += (x && y) ? 1 : 0;
    uni += (x || y) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

Mask threshold_mask(const Eigen::VectorXd& prob, int width, int height) {
  Mask m(width, height);
  if (static_cast<std::size_t>(prob.size()) != m.pixel_count()) throw InvalidInput("probability map size mismatch");
  for (std::size_t i = 0; i < m.values.size(); ++i) m.values[i] = prob[static_cast<Eigen::Index>(i)] > 0.5 ? 1 : 0;
  return m;
}

std::vector<double> squared_distance_transform(const std::vector<std::uint8_t>& inside, int width, int height) {
  if (width < 1 || height < 1 || inside.size() != static_cast<std::size_t>(width) * height) {
    throw InvalidInput("distance transform: bad dimensions");
  }
  // Pad by one pixel of "outside" on every side.
  const std::size_t pw = static_cast<std::size_t>(width) + 2;
  const std::size_t ph = static_cast<std::size_t>(height) + 2;
  const double big = static_cast<double>(pw * pw + ph * ph) + 1.0;
  std::vector<double> grid(pw * ph, 0.0);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      if (inside[static_cast<std::size_t>(r) * width + c]) grid[(r + 1) * pw + (c + 1)] = big;
    }
  }
  std::vector<double> tmp(grid.size());
  std::vector<double> z, fcopy;
  std::vector<std::size_t> v;
  for (std::size_t c = 0; c < pw; ++c) edt_1d(grid.data() + c, ph, pw, tmp.data() + c, z, v, fcopy);
  for (std::size_t r = 0; r < ph; ++r) edt_1d(tmp.data() + r * pw, pw, 1, grid.data() + r * pw, z, v, fcopy);

  std::vector<double> out(inside.size());
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) out[static_cast<std::size_t>(r) * width + c] = grid[(r + 1) * pw + (c + 1)];
  }
  return out;
}

int label_components(const std::vector<std::uint8_t>& on, int width, int height, std::vector<int>& labels) {
  const std::size_t m = static_cast<std::size_t>(width) * height;
  if (on.size() != m) throw InvalidInput("label_components: bad dimensions");
  labels.assign(m, -1);
  int count = 0;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < m; ++start) {
    if (!on[start] || labels[start] >= 0) continue;
    labels[start] = count;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      const int r = static_cast<int>(p / width);
      const int c = static_cast<int>(p % width);
      const auto visit = [&](int rr, int cc) {
        if (rr < 0 || rr >= height || cc < 0 || cc >= width) return;
        const std::size_t q = static_cast<std::size_t>(rr) * width + cc;
        if (on[q] && labels[q] < 0) {
          labels[q] = count;
          stack.push_back(q);
        }
      };
      visit(r - 1, c);
      visit(r + 1, c);
      visit(r, c - 1);
      visit(r, c + 1);
    }
    ++count;
  }
  return count;
}

std::optional<Click> next_click(const Mask& pred, const Mask& gt, const ClickSet& already_clicked) {
  require_same_shape(pred, gt);
  const std::size_t m = gt.pixel_count();
  std::vector<std::uint8_t> error(m);
  for (std::size_t i = 0; i < m; ++i) error[i] = (pred.values[i] != 0) != (gt.values[i] != 0) ? 1 : 0;

  std::vector<int> labels;
  const int count = label_components(error, gt.width, gt.height, labels);
  if (count == 0) return std::nullopt;
  std::vector<std::size_t> sizes(static_cast<std::size_t>(count), 0);
  for (int l : labels) {
    if (l >= 0) ++sizes[static_cast<std::size_t>(l)];
  }
  // Largest first; equal sizes keep the component with the lowest pixel index
  // (components are numbered in that order).
  std::vector<int> order(static_cast<std::size_t>(count));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return sizes[a] > sizes[b]; });

  std::vector<std::uint8_t> inside(m);
  for (int comp : order) {
    std::vector<std::size_t> pixels;
    for (std::size_t i = 0; i < m; ++i) {
      inside[i] = labels[i] == comp ? 1 : 0;
      if (inside[i]) pixels.push_back(i);
    }
    const std::vector<double> dist = squared_distance_transform(inside, gt.width, gt.height);
    std::stable_sort(pixels.begin(), pixels.end(), [&](std::size_t a, std::size_t b) { return dist[a] > dist[b]; });
    for (std::size_t p : pixels) {
      if (already_clicked.contains(p)) continue;
      return Click{p, gt.values[p] ? 1 : -1};
    }
  }
  return std::nullopt;
}

ClickTrace simulate(const Predictor& predictor, const Mask& gt, int max_clicks) {
  if (max_clicks < 1) throw InvalidInput("max_clicks must be at least 1");
  const std::size_t fg = gt.foreground_count();
  if (fg == 0 || fg == gt.pixel_count()) throw InvalidInput("ground-truth mask is empty or full");
  ClickTrace trace;
  ClickSet clicks;
  Mask pred(gt.width, gt.height);
  while (static_cast<int>(clicks.size()) < max_clicks) {
    const std::optional<Click> click = next_click(pred, gt, clicks);
    if (!click) break;
    clicks.add(*click);
    const Eigen::VectorXd prob = predictor(clicks);
    pred = threshold_mask(prob, gt.width, gt.height);
    trace.clicks.push_back(*click);
    trace.iou_after.push_back(iou(pred, gt));
    trace.pred_at_click.push_back(prob[static_cast<Eigen::Index>(click->pixel)]);
  }
  return trace;
}

ClickTrace simulate(const ModelCheckpoint& model, const FeatureMap& fm, const Mask& gt, const SimulationConfig& cfg) {
  if (gt.width != fm.width || gt.height != fm.height) throw InvalidInput("mask does not match the image");
  const FeatureMap input = model_features(model, fm);
  const double sigma2 = cfg.sigma2.value_or(model.head.sigma2);
  return simulate(
      [&](const ClickSet& clicks) { return model_prob(model, input, clicks, cfg.eps2, sigma2, cfg.seed); }, gt,
      cfg.max_clicks);
}

namespace {

int first_hit(const ClickTrace& t, double iou_threshold) {
  for (std::size_t k = 0; k < t.iou_after.size(); ++k) {
    if (t.iou_after[k] >= iou_threshold) return static_cast<int>(k) + 1;
  }
  return -1;
}

}  // namespace

double noc(const std::vector<ClickTrace>& traces, double iou_threshold, int max_clicks) {
  if (traces.empty()) return 0.0;
  double total = 0.0;
  for (const ClickTrace& t : traces) {
    const int k = first_hit(t, iou_threshold);
    total += (k < 0 || k > max_clicks) ? max_clicks : k;
  }
  return total / static_cast<double>(traces.size());
}

int nof(const std::vector<ClickTrace>& traces, double iou_threshold, int max_clicks) {
  int fails = 0;
  for (const ClickTrace& t : traces) {
    const int k = first_hit(t, iou_threshold);
    if (k < 0 || k > max_clicks) ++fails;
  }
  return fails;
}

double iou_at(const std::vector<ClickTrace>& traces, int n) {
  if (n < 1) throw InvalidInput("iou_at needs N >= 1");
  if (traces.empty()) return 0.0;
  double total = 0.0;
  for (const ClickTrace& t : traces) {
    if (t.iou_after.empty()) continue;
    total += t.iou_after[std::min<std::size_t>(static_cast<std::size_t>(n), t.iou_after.size()) - 1];
  }
  return total / static_cast<double>(traces.size());
}

int noic(const std::vector<ClickTrace>& traces) {
  int count = 0;
  for (const ClickTrace& t : traces) {
    for (std::size_t k = 0; k < t.clicks.size(); ++k) {
      const double p = t.pred_at_click[k];
      const bool correct = t.clicks[k].label > 0 ? p > 0.5 : p < 0.5;
      if (!correct) ++count;
    }
  }
  return count;
}

std::string report_json(const BenchmarkReport& report) {
  nlohmann::ordered_json j;
  j["max_clicks"] = report.max_clicks;
  j["seed"] = report.seed;
  nlohmann::ordered_json agg;
  for (double t : report.targets) {
    const auto pct = static_cast<int>(std::lround(100.0 * t));
    agg[fmt::format("noc{}", pct)] = noc(report.traces, t, report.max_clicks);
    agg[fmt::format("nof{}", pct)] = nof(report.traces, t, report.max_clicks);
  }
  agg["nof"] = report.targets.empty() ? 0 : nof(report.traces, report.targets.back(), report.max_clicks);
  nlohmann::ordered_json at = nlohmann::ordered_json::object();
  for (int n : {1, 5, 10, 20}) {
    if (n <= report.max_clicks) at[std::to_string(n)] = iou_at(report.traces, n);
  }
  agg["iou_at"] = at;
  agg["noic"] = noic(report.traces);
  agg["images"] = report.traces.size();
  j["aggregates"] = agg;
  nlohmann::ordered_json traces = nlohmann::ordered_json::array();
  for (const ClickTrace& t : report.traces) {
    nlohmann::ordered_json tj;
    tj["name"] = t.name;
    nlohmann::ordered_json clicks = nlohmann::ordered_json::array();
    for (const Click& c : t.clicks) clicks.push_back({{"pixel", c.pixel}, {"label", c.label}});
    tj["clicks"] = clicks;
    tj["iou_after"] = t.iou_after;
    tj["pred_at_click"] = t.pred_at_click;
    traces.push_back(tj);
  }
  j["traces"] = traces;
  return j.dump(2) + "\n";
}

std::string report_table(const BenchmarkReport& report) {
  std::string header = fmt::format("{:>8}", "images");
  std::string row = fmt::format("{:>8}", report.traces.size());
  for (double t : report.targets) {
    const auto pct = static_cast<int>(std::lround(100.0 * t));
    header += fmt::format(" {:>8}", fmt::format("NoC@{}", pct));
    row += fmt::format(" {:>8.2f}", noc(report.traces, t, report.max_clicks));
  }
  const double nof_target = report.targets.empty() ? 0.9 : report.targets.back();
  header += fmt::format(" {:>5} {:>7} {:>7} {:>5} {:>9}", "NoF", "IoU@1", "IoU@5", "NoIC", "SPC(ms)");
  row += fmt::format(" {:>5} {:>7.4f} {:>7.4f} {:>5} {:>9.2f}", nof(report.traces, nof_target, report.max_clicks),
                     iou_at(report.traces, 1), iou_at(report.traces, std::min(5, report.max_clicks)),
                     noic(report.traces), 1000.0 * report.seconds_per_click);
  return header + "\n" + row + "\n";
}

std::vector<double> default_eps2_levels() { return {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7}; }

std::vector<EpsSweepRow> sweep_eps(const ModelCheckpoint& model, const std::vector<FeatureMap>& features,
                                   const std::vector<ClickTrace>& traces, const std::vector<double>& eps2_levels,
                                   double sigma2, std::uint64_t seed) {
  if (features.size() != traces.size()) throw InvalidInput("sweep_eps: one trace per image");
  std::vector<EpsSweepRow> rows;
  for (double eps2 : eps2_levels) {
    if (!(eps2 > 0.0)) throw InvalidInput("jitter levels must be positive");
    EpsSweepRow row;
    row.eps2 = eps2;
    for (std::size_t i = 0; i < traces.size(); ++i) {
      const FeatureMap input = model_features(model, features[i]);
      ClickSet clicks;
      for (const Click& c : traces[i].clicks) {
        clicks.add(c);
        const Eigen::VectorXd prob = model_prob(model, input, clicks, eps2, sigma2, image_seed(seed, i));
        const double p = prob[static_cast<Eigen::Index>(c.pixel)];
        const bool correct = c.label > 0 ? p > 0.5 : p < 0.5;
        if (!correct) ++row.noic;
        ++row.clicks;
      }
    }
    rows.push_back(row);
  }
  return rows;
}

std::uint64_t image_seed(std::uint64_t seed, std::size_t index) { return derive_seed(seed, 5000 + index); }

BenchmarkReport evaluate(const ModelCheckpoint& model, const std::vector<LabeledImage>& dataset,
                         const EvalOptions& options) {
  if (dataset.empty()) throw InvalidInput("evaluation dataset is empty");
  if (options.jobs < 1) throw InvalidInput("jobs must be at least 1");
  for (const LabeledImage& li : dataset) {
    const std::size_t fg = li.gt.foreground_count();
    if (fg == 0 || fg == li.gt.pixel_count()) {
      throw InvalidInput(fmt::format("ground truth of {} is empty or full", li.name));
    }
  }
  BenchmarkReport report;
  report.max_clicks = options.max_clicks;
  report.targets = options.targets;
  report.seed = options.seed;
  report.traces.resize(dataset.size());

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(dataset.size());
  const auto start = std::chrono::steady_clock::now();
  const auto worker = [&] {
    for (std::size_t i = next++; i < dataset.size(); i = next++) {
      try {
        SimulationConfig cfg;
        cfg.max_clicks = options.max_clicks;
        cfg.eps2 = options.eps2;
        cfg.sigma2 = options.sigma2;
        cfg.seed = image_seed(options.seed, i);
        report.traces[i] = simulate(model, extract_features(dataset[i].image), dataset[i].gt, cfg);
        report.traces[i].name = dataset[i].name;
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto jobs = std::min<std::size_t>(static_cast<std::size_t>(options.jobs), dataset.size());
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::size_t clicks = 0;
  for (const ClickTrace& t : report.traces) clicks += t.clicks.size();
  report.seconds_per_click = clicks > 0 ? seconds / static_cast<double>(clicks) : 0.0;
  return report;
}

std::vector<ClickTrace> reference_traces(const ModelCheckpoint& model, const std::vector<FeatureMap>& features,
                                         const std::vector<Mask>& gts, int max_clicks, double eps2,
                                         std::uint64_t seed) {
  if (features.size() != gts.size()) throw InvalidInput("reference_traces: one mask per image");
  std::vector<ClickTrace> traces;
  for (std::size_t i = 0; i < features.size(); ++i) {
    SimulationConfig cfg;
    cfg.max_clicks = max_clicks;
    cfg.eps2 = eps2;
    cfg.sigma2 = 0.0;
    cfg.seed = image_seed(seed, i);
    traces.push_back(simulate(model, features[i], gts[i], cfg));
  }
  return traces;
}

}  // namespace gpcis
