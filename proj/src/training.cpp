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

#include "gpcis/training.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gpcis/autodiff.hpp"
#include "gpcis/clicksim.hpp"
#include "gpcis/errors.hpp"
#include "gpcis/rng.hpp"

namespace gpcis {
namespace {

// Positions inside parameter_refs().
enum Param : std::size_t { kW1, kB1, kW2, kB2, kLogEta0, kLogEta, kTheta, kTau, kMuW, kLogSigma2W, kParamCount };

struct Forward {
  ad::Var total;
  ad::Var nfl;
  ad::Var vi;
  ad::Var f;
  std::vector<ad::Var> params;
  bool has_vi = false;
};

Forward build_loss(ad::Tape& tape, ModelCheckpoint& model, const LossInputs& in, const LossSettings& s,
                   bool want_grad) {
  if (in.features == nullptr) throw InvalidInput("loss inputs carry no features");
  const FeatureMap& fm = *in.features;
  if (fm.d() != model.head.input_dims()) throw InvalidInput("feature width does not match the model");
  if (static_cast<std::size_t>(in.gt.size()) != fm.m()) throw InvalidInput("gt size does not match the image");
  if (in.clicks.empty()) throw InvalidInput("loss needs at least one click");
  for (const Click& c : in.clicks.clicks()) {
    if (c.pixel >= fm.m()) throw InvalidInput("click pixel outside the image");
  }

  Forward fw;
  for (const ParameterRef& p : parameter_refs(model)) {
    ad::Matrix value = Eigen::Map<const Eigen::MatrixXd>(p.data, p.rows, p.cols);
    fw.params.push_back(want_grad && p.trainable ? tape.variable(std::move(value)) : tape.constant(std::move(value)));
  }
  const std::vector<ad::Var>& P = fw.params;

  const bool use_color = model.kernel.use_color;
  const auto px = in.clicks.pixels();
  const FeatureRows at_clicks = gather(fm, px);
  const ad::Matrix xbar_n = kernel_inputs(at_clicks.X, at_clicks.I, use_color);
  const ad::Matrix xbar_m = kernel_inputs(fm.X, fm.I, use_color);
  const Eigen::VectorXd y = in.clicks.labels();
  const auto n = static_cast<Eigen::Index>(px.size());

  // Variational mean at the clicks.
  const ad::Var hidden =
      ad::relu(ad::add_col_broadcast(ad::matmul(P[kW1], tape.constant(at_clicks.X.transpose())), P[kB1]));
  const ad::Var logits = ad::add_scalar_broadcast(ad::matmul(P[kW2], hidden), P[kB2]);
  const ad::Var m_xi = ad::transpose(ad::mul_const(ad::softplus(logits), y.transpose()));

  // Reparameterized draws, same streams as pathwise_sample.
  Eigen::VectorXd z_f(n);
  RandomStream(latent_seed(s.seed), 0).fill_normal({z_f.data(), static_cast<std::size_t>(n)});
  const ad::Var f_n = ad::add(m_xi, tape.constant(std::sqrt(model.head.sigma2) * z_f));
  const int l = model.weight_space.bases();
  Eigen::VectorXd z_w(l);
  RandomStream(weight_seed(s.seed), 0).fill_normal({z_w.data(), static_cast<std::size_t>(l)});
  const ad::Var w =
      ad::add(P[kMuW], ad::scale_by(tape.constant(z_w), ad::exp(ad::scale(P[kLogSigma2W], 0.5))));
  const ad::Var coef = ad::scale(w, model.weight_space.basis_scale());

  const ad::Var prior_m = ad::rff_project(xbar_m, P[kTheta], P[kTau], coef);
  const ad::Var prior_n = ad::rff_project(xbar_n, P[kTheta], P[kTau], coef);
  const ad::Var K_nn = ad::kernel_cross(xbar_n, xbar_n, P[kLogEta0], P[kLogEta], use_color);
  const ad::Var K_mn = ad::kernel_cross(xbar_m, xbar_n, P[kLogEta0], P[kLogEta], use_color);
  const ad::Var v = ad::solve_jittered(K_nn, ad::sub(f_n, prior_n), s.eps2);
  fw.f = ad::add(prior_m, ad::matmul(K_mn, v));

  fw.nfl = ad::normalized_focal_loss(fw.f, in.gt, s.gamma);
  fw.total = fw.nfl;
  if (s.alpha > 0.0) {
    const Eigen::VectorXd targets = 0.5 * (y.array() + 1.0);
    const ad::Var quad = ad::scale(ad::dot(m_xi, ad::solve_jittered(K_nn, m_xi, s.eps2)), 0.5);
    fw.vi = ad::add(ad::bce_with_logits(f_n, targets), quad);
    fw.total = ad::add(fw.nfl, ad::scale(fw.vi, s.alpha));
    fw.has_vi = true;
  }
  return fw;
}

LossBreakdown breakdown(const Forward& fw, const LossSettings& s) {
  LossBreakdown out;
  out.nfl = fw.nfl.scalar();
  out.vi = fw.has_vi ? fw.vi.scalar() : 0.0;
  out.total = fw.has_vi ? out.nfl + s.alpha * out.vi : out.nfl;
  out.f = fw.f.value().col(0);
  return out;
}

struct Prepared {
  std::string name;
  FeatureMap fm;
  Eigen::VectorXd gt;
  Mask mask;
};

Prepared prepare(const ModelCheckpoint& model, std::string name, const Image& image, const Mask& mask) {
  Prepared p;
  p.name = std::move(name);
  p.fm = model_features(model, extract_features(image));
  p.gt = mask_vector(mask);
  p.mask = mask;
  return p;
}

struct AdamState {
  std::vector<Eigen::MatrixXd> m;
  std::vector<Eigen::MatrixXd> v;
  long step = 0;
};

void adam_step(ModelCheckpoint& model, AdamState& st, const std::vector<Eigen::MatrixXd>& grads, double lr) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  std::vector<ParameterRef> refs = parameter_refs(model);
  if (st.m.empty()) {
    for (const ParameterRef& p : refs) {
      st.m.push_back(Eigen::MatrixXd::Zero(p.rows, p.cols));
      st.v.push_back(Eigen::MatrixXd::Zero(p.rows, p.cols));
    }
  }
  ++st.step;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(st.step));
  for (std::size_t k = 0; k < refs.size(); ++k) {
    if (!refs[k].trainable) continue;
    st.m[k] = kBeta1 * st.m[k] + (1.0 - kBeta1) * grads[k];
    st.v[k] = kBeta2 * st.v[k] + (1.0 - kBeta2) * grads[k].cwiseProduct(grads[k]);
    for (Eigen::Index i = 0; i < refs[k].size(); ++i) {
      const double mhat = st.m[k].data()[i] / c1;
      const double vhat = st.v[k].data()[i] / c2;
      refs[k].data[i] -= lr * mhat / (std::sqrt(vhat) + kEps);
    }
  }
}

void add_iterative_clicks(const ModelCheckpoint& model, const Prepared& item, ClickSet& clicks, int count,
                          double eps2, std::uint64_t seed) {
  for (int k = 0; k < count; ++k) {
    const Eigen::VectorXd prob =
        sample_model(model, item.fm, clicks, eps2, model.head.sigma2, derive_seed(seed, static_cast<std::uint64_t>(k)))
            .prob;
    const std::optional<Click> c = next_click(threshold_mask(prob, item.fm.width, item.fm.height), item.mask, clicks);
    if (!c) return;
    clicks.add(*c);
  }
}

}  // namespace

LossBreakdown evaluate_loss(const ModelCheckpoint& model, const LossInputs& in, const LossSettings& s) {
  ModelCheckpoint copy = model;
  ad::Tape tape;
  return breakdown(build_loss(tape, copy, in, s, false), s);
}

GradientResult compute_gradients(const ModelCheckpoint& model, const LossInputs& in, const LossSettings& s) {
  ModelCheckpoint copy = model;
  ad::Tape tape;
  const Forward fw = build_loss(tape, copy, in, s, true);
  tape.backward(fw.total);
  GradientResult out;
  out.loss = breakdown(fw, s);
  const std::vector<ParameterRef> refs = parameter_refs(copy);
  for (std::size_t k = 0; k < refs.size(); ++k) {
    Eigen::MatrixXd g = tape.grad(fw.params[k]);
    if (!refs[k].trainable) g.setZero();
    if (!g.allFinite()) throw NumericalError(fmt::format("non-finite gradient for parameter {}", refs[k].name));
    out.grads.push_back(std::move(g));
  }
  return out;
}

ClickSet sample_random_clicks(const Mask& gt, int max_positive, int max_negative, std::uint64_t seed) {
  if (max_positive < 1 || max_negative < 0) throw InvalidInput("click budget must allow one positive click");
  std::vector<std::size_t> fg, bg;
  for (std::size_t i = 0; i < gt.values.size(); ++i) (gt.values[i] ? fg : bg).push_back(i);
  if (fg.empty()) throw InvalidInput("mask has no foreground");
  RandomStream rng(seed, 0);
  const auto k_pos = static_cast<std::size_t>(rng.uniform_int(1, max_positive));
  const auto k_neg = static_cast<std::size_t>(rng.uniform_int(0, max_negative));
  ClickSet clicks;
  const auto draw = [&](std::vector<std::size_t>& pool, std::size_t k, int label) {
    k = std::min(k, pool.size());
    for (std::size_t j = 0; j < k; ++j) {
      const auto pick = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(j),
                                                                 static_cast<std::int64_t>(pool.size() - 1)));
      std::swap(pool[j], pool[pick]);
      clicks.add({pool[j], label});
    }
  };
  draw(fg, k_pos, 1);
  draw(bg, k_neg, -1);
  return clicks;
}

double learning_rate_at(const TrainConfig& cfg, int epoch) {
  double lr = cfg.lr;
  if (epoch >= static_cast<int>(std::floor(0.8 * cfg.epochs))) lr *= 0.1;
  if (epoch >= static_cast<int>(std::floor(0.95 * cfg.epochs))) lr *= 0.1;
  return lr;
}

ModelCheckpoint train(const std::vector<LabeledImage>& dataset, const ModelConfig& model_config,
                      const TrainConfig& cfg, const TrainCallbacks& callbacks) {
  ModelCheckpoint model = init_model(model_config, cfg.seed);
  train_in_place(model, dataset, cfg, callbacks);
  return model;
}

void train_in_place(ModelCheckpoint& model, const std::vector<LabeledImage>& dataset, const TrainConfig& cfg,
                    const TrainCallbacks& callbacks) {
  if (dataset.empty()) throw InvalidInput("training dataset is empty");
  if (!(cfg.alpha >= 0.0)) throw InvalidInput("alpha must be non-negative");
  if (!(cfg.lr > 0.0)) throw InvalidInput("learning rate must be positive");
  if (cfg.epochs < 1 || cfg.batch < 1) throw InvalidInput("epochs and batch must be positive");
  if (!(cfg.eps2 > 0.0)) throw InvalidInput("training jitter must be positive");

  std::vector<Prepared> items;
  std::vector<Prepared> flipped;
  int skipped = 0;
  for (const LabeledImage& li : dataset) {
    if (li.gt.width != li.image.width || li.gt.height != li.image.height) {
      throw InvalidInput(fmt::format("mask size does not match image {}", li.name));
    }
    const std::size_t fg = li.gt.foreground_count();
    if (fg == 0 || fg == li.gt.pixel_count()) {
      ++skipped;
      if (callbacks.on_warning) callbacks.on_warning(fmt::format("skipping {}: mask is empty or full", li.name));
      continue;
    }
    items.push_back(prepare(model, li.name, li.image, li.gt));
    if (cfg.flip) flipped.push_back(prepare(model, li.name, flip_horizontal(li.image), flip_horizontal(li.gt)));
  }
  if (items.empty()) throw InvalidInput("no usable training images (all masks empty or full)");

  AdamState adam;
  std::vector<std::size_t> order(items.size());
  const std::uint64_t shuffle_seed = derive_seed(cfg.seed, 100);
  long global_step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    RandomStream shuffle(shuffle_seed, static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(shuffle.uniform_int(0, static_cast<std::int64_t>(i - 1)));
      std::swap(order[i - 1], order[j]);
    }
    const double lr = learning_rate_at(cfg, epoch);
    LossRecord rec;
    rec.epoch = epoch;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
      std::vector<Eigen::MatrixXd> sum;
      for (std::size_t b = start; b < stop; ++b) {
        const std::uint64_t step_seed =
            derive_seed(derive_seed(cfg.seed, 200 + static_cast<std::uint64_t>(epoch)), static_cast<std::uint64_t>(b));
        const bool use_flip = cfg.flip && RandomStream(step_seed, 3).uniform() < 0.5;
        const Prepared& item = use_flip ? flipped[order[b]] : items[order[b]];
        LossInputs in;
        in.features = &item.fm;
        in.gt = item.gt;
        in.clicks = sample_random_clicks(item.mask, cfg.max_positive, cfg.max_negative, derive_seed(step_seed, 1));
        if (cfg.sampler == ClickSampler::kIterative && global_step % 2 == 1) {
          const auto extra = static_cast<int>(RandomStream(step_seed, 4).uniform_int(0, cfg.max_iterative));
          add_iterative_clicks(model, item, in.clicks, extra, cfg.eps2, derive_seed(step_seed, 5));
        }
        LossSettings s;
        s.alpha = cfg.alpha;
        s.gamma = cfg.gamma;
        s.eps2 = cfg.eps2;
        s.seed = derive_seed(step_seed, 2);
        GradientResult g = compute_gradients(model, in, s);
        if (sum.empty()) {
          sum = std::move(g.grads);
        } else {
          for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += g.grads[k];
        }
        rec.nfl += g.loss.nfl;
        rec.vi += g.loss.vi;
        rec.total += g.loss.total;
      }
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (Eigen::MatrixXd& g : sum) g *= inv;
      adam_step(model, adam, sum, lr);
      ++global_step;
    }
    const double inv = 1.0 / static_cast<double>(items.size());
    rec.nfl *= inv;
    rec.vi *= inv;
    rec.total *= inv;
    if (!std::isfinite(rec.total) || !std::isfinite(rec.nfl) || !std::isfinite(rec.vi)) {
      throw NumericalError(fmt::format("training loss became non-finite at epoch {}", epoch));
    }
    model.metadata.loss_trace.push_back(rec);
    if (callbacks.on_epoch) callbacks.on_epoch(rec);
  }
  model.metadata.epochs += cfg.epochs;
  model.metadata.seed = cfg.seed;
  model.metadata.skipped_images += skipped;
  round_parameters_to_float(model);
}

std::string loss_trace_csv(const std::vector<LossRecord>& trace) {
  std::string out = "epoch,nfl,vi,total\n";
  for (const LossRecord& r : trace) out += fmt::format("{},{:.9g},{:.9g},{:.9g}\n", r.epoch, r.nfl, r.vi, r.total);
  return out;
}

std::vector<LabeledImage> load_dataset(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  constexpr const char* kLayout = "expected DIR/images/NAME.png with a binary mask at DIR/masks/NAME.png";
  const fs::path images = dir / "images";
  const fs::path masks = dir / "masks";
  if (!fs::is_directory(images) || !fs::is_directory(masks)) {
    throw InvalidInput(fmt::format("dataset {} must contain images/ and masks/ directories ({})", dir.string(),
                                   kLayout));
  }
  std::vector<fs::path> files;
  for (const fs::directory_entry& e : fs::directory_iterator(images)) {
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw InvalidInput(fmt::format("no .png files in {} ({})", images.string(), kLayout));
  std::vector<std::string> missing;
  for (const fs::path& f : files) {
    if (!fs::is_regular_file(masks / f.filename())) missing.push_back(f.filename().string());
  }
  if (!missing.empty()) {
    std::string list;
    for (const std::string& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw InvalidInput(fmt::format("images without a matching mask in {}: {}", masks.string(), list));
  }
  std::vector<LabeledImage> out;
  for (const fs::path& f : files) {
    LabeledImage li;
    li.name = f.filename().string();
    li.image = read_image(f);
    li.gt = read_mask(masks / f.filename());
    if (li.gt.width != li.image.width || li.gt.height != li.image.height) {
      throw InvalidInput(fmt::format("mask size does not match image {}", li.name));
    }
    out.push_back(std::move(li));
  }
  return out;
}

Eigen::VectorXd mask_vector(const Mask& mask) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(mask.pixel_count()));
  for (std::size_t i = 0; i < mask.values.size(); ++i) v[static_cast<Eigen::Index>(i)] = mask.values[i] ? 1.0 : 0.0;
  return v;
}

Image flip_horizontal(const Image& image) {
  Image out(image.width, image.height);
  for (int r = 0; r < image.height; ++r) {
    for (int c = 0; c < image.width; ++c) {
      for (int ch = 0; ch < 3; ++ch) out.at(r, c, ch) = image.at(r, image.width - 1 - c, ch);
    }
  }
  return out;
}

Mask flip_horizontal(const Mask& mask) {
  Mask out(mask.width, mask.height);
  for (int r = 0; r < mask.height; ++r) {
    for (int c = 0; c < mask.width; ++c) {
      out.values[static_cast<std::size_t>(r) * mask.width + c] =
          mask.values[static_cast<std::size_t>(r) * mask.width + (mask.width - 1 - c)];
    }
  }
  return out;
}

}  // namespace gpcis
