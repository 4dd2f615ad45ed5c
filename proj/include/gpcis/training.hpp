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
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "gpcis/features.hpp"
#include "gpcis/image.hpp"
#include "gpcis/model.hpp"
#include "gpcis/posterior.hpp"

namespace gpcis {

enum class ClickSampler { kRandom, kIterative };

struct TrainConfig {
  double alpha = 1e-3;
  double lr = 1e-3;
  int epochs = 60;
  int batch = 4;
  double gamma = 2.0;
  std::uint64_t seed = 0;
  ClickSampler sampler = ClickSampler::kRandom;
  double eps2 = 1e-2;
  bool flip = false;
  int max_positive = 5;
  int max_negative = 5;
  int max_iterative = 3;
};

// Everything one loss evaluation needs besides the parameters.
struct LossInputs {
  const FeatureMap* features = nullptr;  // already in model input layout
  Eigen::VectorXd gt;                    // 0/1 per pixel
  ClickSet clicks;
};

struct LossSettings {
  double alpha = 1e-3;
  double gamma = 2.0;
  double eps2 = 1e-2;
  std::uint64_t seed = 0;  // drives w and f_n, same split as pathwise_sample
};

struct LossBreakdown {
  double nfl = 0.0;
  double vi = 0.0;  // 0 and never evaluated when alpha == 0
  double total = 0.0;
  Eigen::VectorXd f;  // latent sample at every pixel
};

// Gradients in parameter_refs order; frozen tensors get zero gradients.
struct GradientResult {
  LossBreakdown loss;
  std::vector<Eigen::MatrixXd> grads;
};

LossBreakdown evaluate_loss(const ModelCheckpoint& model, const LossInputs& in, const LossSettings& s);

// Throws NumericalError naming the parameter when a gradient is not finite.
GradientResult compute_gradients(const ModelCheckpoint& model, const LossInputs& in, const LossSettings& s);

// Random click set: 1..max_positive foreground clicks and 0..max_negative
// background clicks, without repetition.
ClickSet sample_random_clicks(const Mask& gt, int max_positive, int max_negative, std::uint64_t seed);

double learning_rate_at(const TrainConfig& cfg, int epoch);

struct TrainCallbacks {
  std::function<void(const LossRecord&)> on_epoch;
  std::function<void(const std::string&)> on_warning;
};

ModelCheckpoint train(const std::vector<LabeledImage>& dataset, const ModelConfig& model_config,
                      const TrainConfig& cfg, const TrainCallbacks& callbacks = {});

// Continues from an existing model (used by tests and the iterative sampler).
void train_in_place(ModelCheckpoint& model, const std::vector<LabeledImage>& dataset, const TrainConfig& cfg,
                    const TrainCallbacks& callbacks = {});

std::string loss_trace_csv(const std::vector<LossRecord>& trace);

// DIR/images/*.png paired with DIR/masks/<same name>.png, sorted by name.
std::vector<LabeledImage> load_dataset(const std::filesystem::path& dir);

Eigen::VectorXd mask_vector(const Mask& mask);
Image flip_horizontal(const Image& image);
Mask flip_horizontal(const Mask& mask);

}  // namespace gpcis
