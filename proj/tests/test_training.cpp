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

#include <cmath>
#include <filesystem>

#include "gpcis/autodiff.hpp"
#include "gpcis/errors.hpp"
#include "gpcis/features.hpp"
#include "gpcis/losses.hpp"
#include "gpcis/rng.hpp"
#include "gpcis/synthetic.hpp"
#include "gpcis/training.hpp"
#include "oracles.hpp"
#include "verify.hpp"

using namespace gpcis;

namespace {

VariationalHead constant_head(double magnitude) {
  VariationalHead head = VariationalHead::zeros(kFeatureDim, kHeadHidden);
  head.b2 = magnitude > 0.0 ? std::log(std::expm1(magnitude)) : -1000.0;
  return head;
}

std::vector<LabeledImage> small_set(std::size_t n, std::uint64_t seed, int size = 24) {
  SyntheticConfig sc;
  sc.width = sc.height = size;
  return make_synthetic_set(seed, n, sc);
}

}  // namespace

TEST_CASE("focal loss examples") {
  Eigen::VectorXd gt(4), prob(4);
  gt << 1, 0, 1, 0;
  prob << 1.0 - 1e-12, 1e-12, 1.0 - 1e-12, 1e-12;
  CHECK(nfl_loss(prob, gt, 2.0) < 1e-10);

  prob << 0.9, 0.2, 0.6, 0.45;
  double bce = 0.0;
  for (int i = 0; i < 4; ++i) bce -= gt[i] > 0 ? std::log(prob[i]) : std::log(1.0 - prob[i]);
  CHECK(nfl_loss(prob, gt, 0.0) == doctest::Approx(bce / 4.0).epsilon(1e-14));

  RandomStream r(3);
  for (int k = 0; k < 10; ++k) {
    Eigen::VectorXd p(20), y(20);
    for (int i = 0; i < 20; ++i) {
      p[i] = r.uniform();
      y[i] = r.uniform() < 0.5 ? 1.0 : 0.0;
    }
    const double got = nfl_loss(p, y, 2.0);
    const double ref = oracle::nfl(p, y, 2.0);
    CHECK(std::abs(got - ref) <= 1e-10 * std::abs(ref));
  }
  prob[0] = 1.0;
  CHECK_THROWS_AS(nfl_loss(prob, gt, 2.0), InvalidInput);
  prob[0] = 0.0;
  CHECK_THROWS_AS(nfl_loss(prob, gt, 2.0), InvalidInput);
}

TEST_CASE("variational loss examples") {
  const Eigen::MatrixXd X = Eigen::MatrixXd::Zero(2, kFeatureDim);
  Eigen::VectorXd y(2);
  y << 1, -1;
  const Eigen::MatrixXd K = Eigen::MatrixXd::Identity(2, 2);

  const double big = vi_loss(constant_head(5.0), X, y, K, 1e-12, 0.0, 1);
  CHECK(big == doctest::Approx(25.0 + 2.0 * std::log1p(std::exp(-5.0))).epsilon(1e-10));
  CHECK(big == doctest::Approx(25.013).epsilon(1e-4));

  const double flat = vi_loss(constant_head(0.0), X, y, K, 1e-2, 0.0, 1);
  CHECK(flat == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("variational loss against the oracle") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    RandomStream r(10 + s);
    const int n = 2 + static_cast<int>(s % 5);
    const VariationalHead head = VariationalHead::init(kFeatureDim, kHeadHidden, s);
    Eigen::MatrixXd X(n, kFeatureDim), V(n, 4);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = r.normal();
    for (Eigen::Index i = 0; i < V.size(); ++i) V.data()[i] = r.normal();
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y[i] = r.uniform() < 0.5 ? 1 : -1;
    const Eigen::MatrixXd K = V * V.transpose();
    const Eigen::VectorXd m = variational_mean(head, X, y);
    const Eigen::VectorXd f = sample_f_n(m, 0.01, 77);
    const double got = vi_loss(head, X, y, K, 1e-2, 0.01, 77);
    const double ref = oracle::vi(m, f, y, K, 1e-2);
    CHECK(std::abs(got - ref) <= 1e-8 * std::abs(ref));
  }
}

TEST_CASE("tape gradients of small expressions") {
  ad::Tape tape;
  const ad::Var p = tape.variable(Eigen::MatrixXd::Constant(1, 1, 3.0));
  const ad::Var loss = ad::scale(ad::mul(p, p), 0.5);
  tape.backward(loss);
  CHECK(tape.grad(p)(0, 0) == 3.0);

  ad::Tape t2;
  const ad::Var f = t2.variable(Eigen::MatrixXd::Zero(1, 1));
  t2.backward(ad::sigmoid(f));
  CHECK(t2.grad(f)(0, 0) == 0.25);

  ad::Tape t3;
  const ad::Var c = t3.constant(Eigen::MatrixXd::Ones(2, 2));
  const ad::Var v = t3.variable(Eigen::MatrixXd::Ones(2, 2));
  t3.backward(ad::sum(ad::matmul(c, v)));
  CHECK(t3.grad(v) == Eigen::MatrixXd::Constant(2, 2, 2.0));
  CHECK_FALSE(t3.needs_grad(c));
}

TEST_CASE("full pipeline gradients pass finite differences") {
  verify::GradientOptions o;
  o.fixtures = 2;
  const verify::Result ok = verify::gradient_check(o);
  INFO(ok.detail);
  CHECK(ok.pass);

  o.inject_fault = true;
  const verify::Result bad = verify::gradient_check(o);
  INFO(bad.detail);
  CHECK_FALSE(bad.pass);
}

TEST_CASE("loss decomposition and forward agreement with the sampler") {
  const LabeledImage li = small_set(1, 4).front();
  ModelCheckpoint model = init_model(ModelConfig{}, 5);
  const FeatureMap fm = model_features(model, extract_features(li.image));
  LossInputs in{&fm, mask_vector(li.gt), sample_random_clicks(li.gt, 5, 5, 6)};
  LossSettings s;
  s.seed = 8;
  const LossBreakdown b = evaluate_loss(model, in, s);
  CHECK(b.total == b.nfl + s.alpha * b.vi);

  const PosteriorSample smp = sample_model(model, fm, in.clicks, s.eps2, model.head.sigma2, s.seed);
  CHECK(b.f == smp.f);
  CHECK(b.nfl == doctest::Approx(nfl_loss(smp.prob, in.gt, s.gamma)).epsilon(1e-12));

  s.alpha = 0.0;
  const LossBreakdown pure = evaluate_loss(model, in, s);
  CHECK(pure.vi == 0.0);
  CHECK(pure.total == pure.nfl);

  const GradientResult g = compute_gradients(model, in, s);
  CHECK(g.loss.total == pure.total);
  CHECK(g.grads.size() == parameter_refs(model).size());
}

TEST_CASE("step decay") {
  TrainConfig cfg;
  cfg.epochs = 100;
  cfg.lr = 1.0;
  CHECK(learning_rate_at(cfg, 0) == 1.0);
  CHECK(learning_rate_at(cfg, 79) == 1.0);
  CHECK(learning_rate_at(cfg, 80) == doctest::Approx(0.1));
  CHECK(learning_rate_at(cfg, 94) == doctest::Approx(0.1));
  CHECK(learning_rate_at(cfg, 95) == doctest::Approx(0.01));
}

TEST_CASE("random click sampler") {
  const LabeledImage li = small_set(1, 9).front();
  for (std::uint64_t s = 0; s < 50; ++s) {
    const ClickSet c = sample_random_clicks(li.gt, 5, 5, s);
    int pos = 0, neg = 0;
    for (const Click& k : c.clicks()) {
      CHECK((li.gt.values[k.pixel] != 0) == (k.label > 0));
      (k.label > 0 ? pos : neg)++;
    }
    CHECK(pos >= 1);
    CHECK(pos <= 5);
    CHECK(neg <= 5);
    CHECK(c.clicks() == sample_random_clicks(li.gt, 5, 5, s).clicks());
  }
  CHECK_THROWS_AS(sample_random_clicks(Mask(4, 4), 5, 5, 1), InvalidInput);
}

TEST_CASE("training is seeded and finite") {
  const auto data = small_set(6, 11);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 12;
  const ModelCheckpoint a = train(data, ModelConfig{}, cfg);
  const ModelCheckpoint b = train(data, ModelConfig{}, cfg);
  REQUIRE(a.metadata.loss_trace.size() == 3);
  for (std::size_t e = 0; e < 3; ++e) {
    CHECK(a.metadata.loss_trace[e].total == b.metadata.loss_trace[e].total);
    CHECK(std::isfinite(a.metadata.loss_trace[e].total));
  }
  CHECK(a.head.W1 == b.head.W1);
  CHECK(a.weight_space.theta == b.weight_space.theta);

  cfg.sampler = ClickSampler::kIterative;
  const ModelCheckpoint it = train(data, ModelConfig{}, cfg);
  CHECK(std::isfinite(it.metadata.loss_trace.back().total));

  cfg.sampler = ClickSampler::kRandom;
  cfg.alpha = 0.0;
  const ModelCheckpoint novi = train(data, ModelConfig{}, cfg);
  for (const LossRecord& r : novi.metadata.loss_trace) CHECK(r.vi == 0.0);
}

TEST_CASE("ablation switches freeze what they name") {
  const auto data = small_set(4, 13);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.seed = 1;
  ModelConfig mc;
  mc.fixed_kernel = true;
  mc.fixed_weight_space = true;
  const ModelCheckpoint init = init_model(mc, cfg.seed);
  const ModelCheckpoint trained = train(data, mc, cfg);
  CHECK(trained.kernel.eta0() == 1.0);
  CHECK(trained.kernel.log_eta == init.kernel.log_eta);
  CHECK(trained.weight_space.theta == init.weight_space.theta);
  CHECK(trained.weight_space.mu_w == init.weight_space.mu_w);
  CHECK(trained.weight_space.sigma2_w() == doctest::Approx(0.025).epsilon(1e-7));
  CHECK(trained.head.W1 != init.head.W1);

  ModelConfig flat;
  flat.concat_image = false;
  const ModelCheckpoint m = train(data, flat, cfg);
  CHECK_FALSE(m.kernel.use_color);
  CHECK(m.weight_space.dim() == kFeatureDim);
}

TEST_CASE("single-image fit drives the focal loss down") {
  const std::vector<LabeledImage> one = make_synthetic_set(3, 1);
  TrainConfig cfg;
  cfg.seed = 1;
  const ModelCheckpoint base = train(one, ModelConfig{}, cfg);
  const auto& tb = base.metadata.loss_trace;
  CHECK(tb.back().nfl < tb.front().nfl);

  // One image is one Adam step per epoch; the default rate is too slow to
  // reach a tenth of the starting loss in 60 steps, a larger one is not.
  cfg.lr = 1e-2;
  const ModelCheckpoint fast = train(one, ModelConfig{}, cfg);
  const auto& tf = fast.metadata.loss_trace;
  CHECK(tf.size() == 60);
  CHECK(tf.back().nfl < 0.1 * tf.front().nfl);
}

TEST_CASE("degenerate masks are skipped") {
  auto data = small_set(3, 14);
  LabeledImage empty = data.front();
  std::fill(empty.gt.values.begin(), empty.gt.values.end(), 0);
  empty.name = "empty.png";
  data.push_back(empty);
  TrainConfig cfg;
  cfg.epochs = 1;
  std::vector<std::string> warnings;
  TrainCallbacks cb;
  cb.on_warning = [&](const std::string& w) { warnings.push_back(w); };
  const ModelCheckpoint m = train(data, ModelConfig{}, cfg, cb);
  CHECK(m.metadata.skipped_images == 1);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("empty.png") != std::string::npos);

  std::vector<LabeledImage> only_bad{empty};
  CHECK_THROWS_AS(train(only_bad, ModelConfig{}, cfg), InvalidInput);
}

TEST_CASE("loss trace csv") {
  const std::string csv = loss_trace_csv({{0, 0.5, 2.0, 0.502}, {1, 0.25, 1.0, 0.251}});
  CHECK(csv.rfind("epoch,nfl,vi,total\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("dataset loading") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "gpcis_test_dataset";
  fs::remove_all(dir);
  fs::create_directories(dir);
  CHECK_THROWS_WITH_AS(load_dataset(dir), doctest::Contains("images/"), InvalidInput);
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  CHECK_THROWS_WITH_AS(load_dataset(dir), doctest::Contains("DIR/masks/NAME.png"), InvalidInput);

  const auto data = small_set(3, 15);
  write_dataset(dir, data);
  const auto loaded = load_dataset(dir);
  REQUIRE(loaded.size() == 3);
  CHECK(loaded[1].name == data[1].name);
  CHECK(loaded[1].gt == data[1].gt);
  for (std::size_t i = 0; i < loaded[2].image.rgb.size(); ++i) {
    CHECK(loaded[2].image.rgb[i] == doctest::Approx(data[2].image.rgb[i]).epsilon(1e-12));
  }

  fs::remove(dir / "masks" / data[0].name);
  CHECK_THROWS_WITH_AS(load_dataset(dir), doctest::Contains(data[0].name.c_str()), InvalidInput);
  fs::remove_all(dir);
}

TEST_CASE("horizontal flip") {
  const LabeledImage li = small_set(1, 16, 9).front();
  const Image f = flip_horizontal(li.image);
  CHECK(f.at(2, 0, 1) == li.image.at(2, 8, 1));
  CHECK(flip_horizontal(f).rgb == li.image.rgb);
  const Mask m = flip_horizontal(li.gt);
  CHECK(m.values[9 * 3 + 0] == li.gt.values[9 * 3 + 8]);
}
