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

#include "gpcis/model.hpp"

#include "gpcis/errors.hpp"
#include "gpcis/rng.hpp"

namespace gpcis {

std::vector<ParameterRef> parameter_refs(ModelCheckpoint& model) {
  VariationalHead& h = model.head;
  KernelParams& k = model.kernel;
  WeightSpaceParams& w = model.weight_space;
  const bool kernel_trainable = k.mode == LearnMode::kLearned;
  const bool weights_trainable = w.mode == LearnMode::kLearned;
  return {
      {"head.W1", h.W1.data(), h.W1.rows(), h.W1.cols(), true},
      {"head.b1", h.b1.data(), h.b1.rows(), 1, true},
      {"head.W2", h.W2.data(), h.W2.rows(), h.W2.cols(), true},
      {"head.b2", &h.b2, 1, 1, true},
      {"kernel.log_eta0", &k.log_eta0, 1, 1, kernel_trainable && k.use_color},
      {"kernel.log_eta", k.log_eta.data(), k.log_eta.rows(), 1, kernel_trainable},
      {"rff.theta", w.theta.data(), w.theta.rows(), w.theta.cols(), weights_trainable},
      {"rff.tau", w.tau.data(), w.tau.rows(), 1, weights_trainable},
      {"rff.mu_w", w.mu_w.data(), w.mu_w.rows(), 1, weights_trainable},
      {"rff.log_sigma2_w", &w.log_sigma2_w, 1, 1, weights_trainable},
  };
}

ModelCheckpoint init_model(const ModelConfig& config, std::uint64_t seed) {
  if (config.feature_dim < 1 || config.hidden < 1 || config.bases < 1) {
    throw InvalidInput("model dimensions must be positive");
  }
  ModelCheckpoint model;
  model.config = config;
  model.head = VariationalHead::init(config.head_input_dims(), config.hidden, derive_seed(seed, 11));
  model.head.sigma2 = config.sigma2;
  model.kernel = KernelParams::make(config.head_input_dims(), kFixedEta0, kFixedEtaT,
                                    config.fixed_kernel ? LearnMode::kFixed : LearnMode::kLearned,
                                    config.concat_image);
  model.weight_space =
      init_weight_space(config.bases, config.kernel_input_dims(),
                        config.fixed_weight_space ? LearnMode::kFixed : LearnMode::kLearned, derive_seed(seed, 12));
  model.metadata.seed = seed;
  round_parameters_to_float(model);
  return model;
}

void round_parameters_to_float(ModelCheckpoint& model) {
  for (ParameterRef& p : parameter_refs(model)) {
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data[i] = static_cast<double>(static_cast<float>(p.data[i]));
  }
}

FeatureMap model_features(const ModelCheckpoint& model, const FeatureMap& base, std::span<const double> previous_prob) {
  if (base.d() != model.config.feature_dim) throw InvalidInput("feature map width does not match the model");
  if (!model.config.previous_mask_channel) return base;
  if (previous_prob.empty()) {
    const std::vector<double> zeros(base.m(), 0.0);
    return with_previous_probability(base, zeros);
  }
  return with_previous_probability(base, previous_prob);
}

PosteriorSample sample_model(const ModelCheckpoint& model, const FeatureMap& fm, const ClickSet& clicks,
                             double eps2, double sigma2, std::uint64_t seed) {
  return pathwise_sample(fm, clicks, model.head, model.kernel, model.weight_space, eps2, sigma2, seed);
}

}  // namespace gpcis
