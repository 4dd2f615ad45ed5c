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
#include <span>
#include <string>
#include <vector>

#include "gpcis/features.hpp"
#include "gpcis/kernel.hpp"
#include "gpcis/posterior.hpp"
#include "gpcis/rff.hpp"

namespace gpcis {

// Structural choices of a model. The ablation flags map onto the four
// reduced variants: fixed_kernel (eta0 = 1, eta_t = e^-1, not trained),
// fixed_weight_space (theta, tau, mu_w, sigma_w^2 frozen at their draws),
// concat_image off (kernel and basis on X only); alpha = 0 lives in
// TrainConfig.
struct ModelConfig {
  int feature_dim = kFeatureDim;
  int hidden = kHeadHidden;
  int bases = kDefaultBases;
  double sigma2 = kDefaultSigma2;
  bool concat_image = true;
  bool fixed_kernel = false;
  bool fixed_weight_space = false;
  // Experimental, off in the reference model: previous probability map as an
  // extra feature channel.
  bool previous_mask_channel = false;

  int head_input_dims() const { return feature_dim + (previous_mask_channel ? 1 : 0); }
  int kernel_input_dims() const { return head_input_dims() + (concat_image ? kColorDim : 0); }
};

struct LossRecord {
  int epoch = 0;
  double nfl = 0.0;
  double vi = 0.0;
  double total = 0.0;
};

struct TrainingMetadata {
  int epochs = 0;
  std::uint64_t seed = 0;
  std::vector<LossRecord> loss_trace;
  int skipped_images = 0;
};

struct ModelCheckpoint {
  ModelConfig config;
  VariationalHead head;
  KernelParams kernel;
  WeightSpaceParams weight_space;
  TrainingMetadata metadata;
  int feature_recipe_version = kFeatureRecipeVersion;
};

// Named view of one parameter tensor inside a checkpoint. Storage is
// column-major (Eigen default); rows x cols elements starting at data.
struct ParameterRef {
  std::string name;
  double* data = nullptr;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  bool trainable = true;

  Eigen::Index size() const { return rows * cols; }
};

std::vector<ParameterRef> parameter_refs(ModelCheckpoint& model);

ModelCheckpoint init_model(const ModelConfig& config, std::uint64_t seed);

// Rounds every parameter to the nearest float so in-memory models and
// float32 checkpoints behave identically.
void round_parameters_to_float(ModelCheckpoint& model);

// Feature map the model consumes (adds the previous-probability channel when
// the model was built with it; `previous_prob` may be empty = all zeros).
FeatureMap model_features(const ModelCheckpoint& model, const FeatureMap& base,
                          std::span<const double> previous_prob = {});

PosteriorSample sample_model(const ModelCheckpoint& model, const FeatureMap& fm, const ClickSet& clicks,
                             double eps2, double sigma2, std::uint64_t seed);

}  // namespace gpcis
