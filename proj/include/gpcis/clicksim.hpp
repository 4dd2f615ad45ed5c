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

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gpcis/features.hpp"
#include "gpcis/image.hpp"
#include "gpcis/model.hpp"
#include "gpcis/posterior.hpp"

namespace gpcis {

inline constexpr int kDefaultMaxClicks = 20;

double iou(const Mask& a, const Mask& b);

// prob > 0.5 is foreground.
Mask threshold_mask(const Eigen::VectorXd& prob, int width, int height);

// Squared Euclidean distance from every pixel of `inside` to the nearest
// pixel outside it. The area beyond the image border counts as outside.
// Values are exact integers.
std::vector<double> squared_distance_transform(const std::vector<std::uint8_t>& inside, int width, int height);

// 4-connected component labels (-1 for background), components numbered in
// order of their lowest pixel index. Returns the component count.
int label_components(const std::vector<std::uint8_t>& on, int width, int height, std::vector<int>& labels);

// Next simulated click, or nullopt when every erroneous pixel is already
// clicked (protocol complete).
std::optional<Click> next_click(const Mask& pred, const Mask& gt, const ClickSet& already_clicked);

struct ClickTrace {
  std::string name;
  std::vector<Click> clicks;
  std::vector<double> iou_after;
  std::vector<double> pred_at_click;
};

// Maps the current click set to per-pixel foreground probabilities.
using Predictor = std::function<Eigen::VectorXd(const ClickSet&)>;

ClickTrace simulate(const Predictor& predictor, const Mask& gt, int max_clicks = kDefaultMaxClicks);

struct SimulationConfig {
  int max_clicks = kDefaultMaxClicks;
  double eps2 = 1e-7;
  std::optional<double> sigma2;  // model value when unset
  std::uint64_t seed = 0;
};

ClickTrace simulate(const ModelCheckpoint& model, const FeatureMap& fm, const Mask& gt, const SimulationConfig& cfg);

double noc(const std::vector<ClickTrace>& traces, double iou_threshold, int max_clicks);
int nof(const std::vector<ClickTrace>& traces, double iou_threshold, int max_clicks);
double iou_at(const std::vector<ClickTrace>& traces, int n);
int noic(const std::vector<ClickTrace>& traces);

struct BenchmarkReport {
  std::vector<ClickTrace> traces;
  int max_clicks = kDefaultMaxClicks;
  std::vector<double> targets{0.85, 0.90};
  std::uint64_t seed = 0;
  double seconds_per_click = 0.0;  // informational, kept out of the JSON
};

struct EvalOptions {
  int max_clicks = kDefaultMaxClicks;
  std::vector<double> targets{0.85, 0.90};
  double eps2 = 1e-7;
  std::optional<double> sigma2;
  std::uint64_t seed = 0;
  int jobs = 1;
};

// Runs the click protocol on every image; image i uses image_seed(seed, i).
BenchmarkReport evaluate(const ModelCheckpoint& model, const std::vector<LabeledImage>& dataset,
                         const EvalOptions& options);

// Full traces plus aggregates. Contains no timing, so reruns are
// byte-identical.
std::string report_json(const BenchmarkReport& report);
std::string report_table(const BenchmarkReport& report);

// Replays recorded click sequences under each jitter level and re-derives
// the probability at each click as it was placed. Returns one NoIC per level.
struct EpsSweepRow {
  double eps2 = 0.0;
  int noic = 0;
  int clicks = 0;
};

std::vector<EpsSweepRow> sweep_eps(const ModelCheckpoint& model, const std::vector<FeatureMap>& features,
                                   const std::vector<ClickTrace>& traces, const std::vector<double>& eps2_levels,
                                   double sigma2, std::uint64_t seed);

std::vector<double> default_eps2_levels();

// Protocol traces for sweep_eps: one simulate() per image at the given
// jitter with sigma2 = 0.
std::vector<ClickTrace> reference_traces(const ModelCheckpoint& model, const std::vector<FeatureMap>& features,
                                         const std::vector<Mask>& gts, int max_clicks, double eps2,
                                         std::uint64_t seed);

// Per-image seed used by eval and sweep-eps.
std::uint64_t image_seed(std::uint64_t seed, std::size_t index);

}  // namespace gpcis
