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

#include "verify.hpp"

#include <fmt/format.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include "gpcis/clicksim.hpp"
#include "gpcis/features.hpp"
#include "gpcis/kernel.hpp"
#include "gpcis/posterior.hpp"
#include "gpcis/rff.hpp"
#include "gpcis/rng.hpp"
#include "gpcis/synthetic.hpp"
#include "gpcis/training.hpp"
#include "oracles.hpp"

namespace gpcis::verify {
namespace {

double max_abs(const Eigen::MatrixXd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

ClickSet balanced_clicks(const Mask& gt, int count, RandomStream& rng) {
  std::vector<std::size_t> fg, bg;
  for (std::size_t i = 0; i < gt.values.size(); ++i) (gt.values[i] ? fg : bg).push_back(i);
  ClickSet clicks;
  for (int k = 0; k < count; ++k) {
    std::vector<std::size_t>& pool = (k % 2 == 0 && !fg.empty()) || bg.empty() ? fg : bg;
    const int label = &pool == &fg ? 1 : -1;
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1));
    clicks.add({pool[j], label});
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(j));
  }
  return clicks;
}

}  // namespace

Result interpolation_sweep(const InterpolationOptions& o) {
  const ModelCheckpoint model = init_model(ModelConfig{}, o.seed);
  SyntheticConfig sc;
  sc.width = sc.height = o.size;
  const std::vector<LabeledImage> data = make_synthetic_set(o.seed, static_cast<std::size_t>(o.fixtures), sc);
  std::vector<FeatureMap> features;
  std::vector<Mask> gts;
  for (const LabeledImage& li : data) {
    features.push_back(extract_features(li.image));
    gts.push_back(li.gt);
  }
  const std::vector<ClickTrace> traces = reference_traces(model, features, gts, o.max_clicks, 1e-7, o.seed);
  const std::vector<EpsSweepRow> rows = sweep_eps(model, features, traces, default_eps2_levels(), 0.0, o.seed);

  bool monotone = true;
  std::string table;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    table += fmt::format("{}{:.0e}:{}", i ? " " : "", rows[i].eps2, rows[i].noic);
    if (i > 0 && rows[i].noic > rows[i - 1].noic + 1) monotone = false;
  }
  const EpsSweepRow& last = rows.back();
  const double agreement = last.clicks ? 1.0 - static_cast<double>(last.noic) / last.clicks : 0.0;
  Result r;
  r.pass = monotone && agreement >= o.min_agreement;
  r.detail = fmt::format("NoIC by eps2 [{}] over {} clicks; monotone={} sign agreement at 1e-7 = {:.4f}", table,
                         last.clicks, monotone, agreement);
  return r;
}

Result sampler_fidelity(const FidelityOptions& o) {
  RandomStream rng(o.seed, 0);
  FeatureMap fm;
  fm.width = o.pixels;
  fm.height = 1;
  fm.X.resize(o.pixels, kFeatureDim);
  for (Eigen::Index i = 0; i < fm.X.size(); ++i) fm.X.data()[i] = 0.35 * rng.normal();
  fm.I = Eigen::MatrixXd::Constant(o.pixels, kColorDim, 0.5);

  // Unit RBF on the deep part; the color term is negligible and, with
  // constant colors, identical for every pair.
  const KernelParams kp = KernelParams::make(kFeatureDim, 1e-8, 1.0, LearnMode::kFixed, true);
  WeightSpaceParams ws = init_weight_space(o.bases, kFeatureDim + kColorDim, LearnMode::kFixed, derive_seed(o.seed, 1));
  ws.mu_w.setZero();
  ws.log_sigma2_w = 0.0;
  VariationalHead head = VariationalHead::init(kFeatureDim, kHeadHidden, derive_seed(o.seed, 2));
  head.sigma2 = o.sigma2;

  ClickSet clicks;
  while (static_cast<int>(clicks.size()) < o.clicks) {
    const auto p = static_cast<std::size_t>(rng.uniform_int(0, o.pixels - 1));
    if (!clicks.contains(p)) clicks.add({p, clicks.size() % 2 == 0 ? 1 : -1});
  }
  std::vector<std::size_t> all(static_cast<std::size_t>(o.pixels));
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const ExactPosterior exact = exact_posterior(fm, clicks, head, kp, o.eps2, all);

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(o.pixels);
  Eigen::MatrixXd outer = Eigen::MatrixXd::Zero(o.pixels, o.pixels);
  for (int s = 0; s < o.samples; ++s) {
    const Eigen::VectorXd f =
        pathwise_sample(fm, clicks, head, kp, ws, o.eps2, o.sigma2, derive_seed(o.seed, 1000 + s)).f;
    sum += f;
    outer.selfadjointView<Eigen::Lower>().rankUpdate(f);
  }
  outer.triangularView<Eigen::StrictlyUpper>() = outer.transpose();
  const Eigen::VectorXd mean = sum / o.samples;
  const Eigen::MatrixXd cov = (outer - static_cast<double>(o.samples) * mean * mean.transpose()) / (o.samples - 1);
  const double mean_err = max_abs(mean - exact.mean);
  const double cov_err = max_abs(cov - exact.cov);
  Result r;
  r.pass = mean_err <= o.mean_tol && cov_err <= o.cov_tol;
  r.detail = fmt::format("{} samples, l={}: max |mean err| = {:.4f} (tol {}), max |cov err| = {:.4f} (tol {})",
                         o.samples, o.bases, mean_err, o.mean_tol, cov_err, o.cov_tol);
  return r;
}

Result rff_approximation(const RffOptions& o) {
  const WeightSpaceParams ws = init_weight_space(o.bases, o.dims, LearnMode::kFixed, o.seed);
  RandomStream rng(derive_seed(o.seed, 1), 0);
  Eigen::MatrixXd pts(2, o.dims);
  double total = 0.0;
  for (int p = 0; p < o.pairs; ++p) {
    Eigen::VectorXd a(o.dims), dir(o.dims);
    for (int t = 0; t < o.dims; ++t) {
      a[t] = rng.normal();
      dir[t] = rng.normal();
    }
    const double dist = rng.uniform(0.0, 3.0);
    const Eigen::VectorXd b = a + dist * dir.normalized();
    pts.row(0) = a.transpose();
    pts.row(1) = b.transpose();
    const Eigen::MatrixXd P = phi(ws, pts);
    total += std::abs(P.row(0).dot(P.row(1)) - std::exp(-0.5 * (a - b).squaredNorm()));
  }
  const double mae = total / o.pairs;
  return {mae <= o.tol, fmt::format("l={} pairs={}: mean |phi(a).phi(b) - k(a,b)| = {:.4f} (tol {})", o.bases,
                                    o.pairs, mae, o.tol)};
}

Result gradient_check(const GradientOptions& o) {
  std::size_t checked = 0;
  std::size_t failed = 0;
  double worst = 0.0;
  std::string worst_name;
  int retries = 0;
  for (int f = 0; f < o.fixtures; ++f) {
    for (std::uint64_t attempt = 0;; ++attempt) {
      const std::uint64_t fseed = derive_seed(derive_seed(o.seed, static_cast<std::uint64_t>(f)), attempt);
      RandomStream rng(fseed, 0);
      Image image(o.size, o.size);
      Mask gt(o.size, o.size);
      const double a = rng.normal(), b = rng.normal(), c = 0.2 * rng.normal();
      for (int r = 0; r < o.size; ++r) {
        for (int col = 0; col < o.size; ++col) {
          const double u = a * (col - 0.5 * o.size) + b * (r - 0.5 * o.size) + c * o.size;
          const bool in = u > 0;
          gt.values[static_cast<std::size_t>(r) * o.size + col] = in ? 1 : 0;
          for (int ch = 0; ch < 3; ++ch) {
            image.at(r, col, ch) = std::clamp((in ? 0.7 : 0.3) + 0.15 * rng.normal(), 0.0, 1.0);
          }
        }
      }
      const std::size_t fg = gt.foreground_count();
      if (fg < 2 || fg + 2 > gt.pixel_count()) {
        ++retries;
        continue;
      }
      ModelConfig mc;
      mc.hidden = o.hidden;
      mc.bases = o.bases;
      ModelCheckpoint model = init_model(mc, fseed);
      for (Eigen::Index t = 0; t < model.kernel.log_eta.size(); ++t) model.kernel.log_eta[t] += 0.3 * rng.normal();
      model.kernel.log_eta0 += 0.3 * rng.normal();
      model.weight_space.log_sigma2_w += 0.3 * rng.normal();

      const FeatureMap fm = model_features(model, extract_features(image));
      LossInputs in;
      in.features = &fm;
      in.gt = mask_vector(gt);
      in.clicks = balanced_clicks(gt, o.clicks, rng);
      // Finite differences are meaningless across a ReLU kink.
      const FeatureRows rows = gather(fm, in.clicks.pixels());
      const Eigen::MatrixXd pre = (model.head.W1 * rows.X.transpose()).colwise() + model.head.b1;
      if (pre.cwiseAbs().minCoeff() < 1e-3) {
        ++retries;
        continue;
      }
      LossSettings s;
      s.alpha = f % 2 == 0 ? 1e-3 : 1.0;
      s.eps2 = 1e-2;
      s.seed = derive_seed(fseed, 9);
      const GradientResult analytic = compute_gradients(model, in, s);
      ModelCheckpoint probe = model;
      if (o.inject_fault) {
        // The output weight of the most active hidden unit; a dead unit's
        // weight would not move the loss at all.
        Eigen::Index unit = 0;
        pre.cwiseMax(0.0).rowwise().sum().maxCoeff(&unit);
        probe.head.W2(0, unit) += 0.05;
      }
      const auto fd = oracle::finite_difference(
          probe, [&](const ModelCheckpoint& m) { return evaluate_loss(m, in, s).total; }, o.step);
      const std::vector<ParameterRef> refs = parameter_refs(model);
      for (std::size_t k = 0; k < refs.size(); ++k) {
        if (!refs[k].trainable) continue;
        for (Eigen::Index i = 0; i < refs[k].size(); ++i) {
          const double g = analytic.grads[k].data()[i];
          const double d = fd[k].data()[i];
          if (std::abs(g) <= o.min_grad) continue;
          ++checked;
          const double rel = std::abs(g - d) / std::max(std::abs(g), std::abs(d));
          if (rel > o.rel_tol) ++failed;
          if (rel > worst) {
            worst = rel;
            worst_name = fmt::format("{}[{}] (fixture {})", refs[k].name, i, f);
          }
        }
      }
      break;
    }
  }
  Result r;
  r.pass = failed == 0 && checked > 0;
  r.detail = fmt::format("{} gradient entries over {} fixtures ({} redrawn): {} above tol {}, worst rel err {:.2e} at {}",
                         checked, o.fixtures, retries, failed, o.rel_tol, worst, worst_name);
  return r;
}

double fit_exponent(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

ComplexityResult complexity(const ComplexityOptions& o, const ModelCheckpoint* model_in) {
  ModelCheckpoint local;
  if (model_in == nullptr) {
    ModelConfig mc;
    mc.bases = o.bases;
    local = init_model(mc, o.seed);
  }
  const ModelCheckpoint& model = model_in ? *model_in : local;
  ComplexityResult out;
  for (const auto& [w, h] : o.sizes) {
    SyntheticConfig sc;
    sc.width = w;
    sc.height = h;
    const LabeledImage li = make_synthetic(o.seed, static_cast<std::size_t>(w) * 100000u + static_cast<std::size_t>(h), sc);
    const FeatureMap fm = model_features(model, extract_features(li.image));
    RandomStream rng(derive_seed(o.seed, static_cast<std::uint64_t>(w) * 100000u + static_cast<std::uint64_t>(h)), 0);
    const ClickSet clicks = balanced_clicks(li.gt, o.clicks, rng);
    double best = std::numeric_limits<double>::infinity();
    for (int rep = 0; rep < o.repeat; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      const PosteriorSample s = sample_model(model, fm, clicks, 1e-7, model.head.sigma2, o.seed);
      const auto t1 = std::chrono::steady_clock::now();
      if (s.f.size() != static_cast<Eigen::Index>(fm.m())) throw std::logic_error("sample size mismatch");
      best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    out.pixels.push_back(static_cast<double>(fm.m()));
    out.seconds.push_back(best);
  }
  out.exponent = fit_exponent(out.pixels, out.seconds);
  std::string points;
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    points += fmt::format("{}m={:.0f}:{:.2f}ms", i ? " " : "", out.pixels[i], 1000.0 * out.seconds[i]);
  }
  out.verdict.pass = out.exponent >= o.min_exponent && out.exponent <= o.max_exponent;
  out.verdict.detail = fmt::format("[{}] fitted exponent {:.3f} (allowed [{}, {}])", points, out.exponent,
                                   o.min_exponent, o.max_exponent);
  return out;
}

Result exact_posterior_oracle(const ExactOptions& o) {
  double worst_mean = 0.0;
  double worst_cov = 0.0;
  double worst_eig = std::numeric_limits<double>::infinity();
  bool pass = true;
  for (int k = 0; k < o.instances; ++k) {
    RandomStream rng(derive_seed(o.seed, static_cast<std::uint64_t>(k)), 0);
    const auto m = static_cast<int>(rng.uniform_int(5, 14));
    const auto n = static_cast<int>(rng.uniform_int(1, 4));
    FeatureMap fm;
    fm.width = m;
    fm.height = 1;
    fm.X.resize(m, kFeatureDim);
    fm.I.resize(m, kColorDim);
    for (Eigen::Index i = 0; i < fm.X.size(); ++i) fm.X.data()[i] = 0.5 * rng.normal();
    for (Eigen::Index i = 0; i < fm.I.size(); ++i) fm.I.data()[i] = rng.uniform();
    KernelParams kp = KernelParams::make(kFeatureDim, 1.0, 1.0, LearnMode::kLearned, true);
    kp.log_eta0 = 0.5 * rng.normal();
    for (Eigen::Index t = 0; t < kp.log_eta.size(); ++t) kp.log_eta[t] = 0.5 * rng.normal();
    VariationalHead head = VariationalHead::init(kFeatureDim, kHeadHidden, derive_seed(o.seed, 100 + k));
    head.sigma2 = kDefaultSigma2;
    const double eps2 = std::pow(10.0, -static_cast<double>(rng.uniform_int(2, 5)));
    ClickSet clicks;
    while (static_cast<int>(clicks.size()) < n) {
      const auto p = static_cast<std::size_t>(rng.uniform_int(0, m - 1));
      if (!clicks.contains(p)) clicks.add({p, rng.uniform() < 0.5 ? 1 : -1});
    }
    std::vector<std::size_t> test;
    for (int i = 0; i < m; ++i) test.push_back(static_cast<std::size_t>(i));

    const ExactPosterior got = exact_posterior(fm, clicks, head, kp, eps2, test);
    const FeatureRows at = gather(fm, clicks.pixels());
    const Eigen::VectorXd m_xi = oracle::head_magnitude_f32(head, at.X).cwiseProduct(clicks.labels());
    const Eigen::VectorXd m_prod = variational_mean(head, at.X, clicks.labels());
    // The oracle head runs in float; feed both sides the same m so only the
    // posterior algebra is compared.
    if (max_abs(m_prod - m_xi) > 1e-5 * std::max(1.0, max_abs(m_xi))) pass = false;
    const oracle::Posterior want = oracle::exact_posterior(kp, kernel_inputs(at.X, at.I, true),
                                                           kernel_inputs(fm.X, fm.I, true), m_prod, eps2,
                                                           head.sigma2);
    const double mean_rel = max_abs(got.mean - want.mean) / std::max(max_abs(want.mean), 1e-300);
    const double cov_rel = max_abs(got.cov - want.cov) / std::max(max_abs(want.cov), 1e-300);
    const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(got.cov).eigenvalues().minCoeff();
    worst_mean = std::max(worst_mean, mean_rel);
    worst_cov = std::max(worst_cov, cov_rel);
    worst_eig = std::min(worst_eig, min_eig / (kp.eta0() + 1.0));
    if (mean_rel > o.rel_tol || cov_rel > o.rel_tol || min_eig < -1e-8 * (kp.eta0() + 1.0)) pass = false;
  }
  return {pass, fmt::format("{} instances: worst rel err mean {:.2e}, cov {:.2e} (tol {}); min eig/(eta0+1) {:.2e}",
                            o.instances, worst_mean, worst_cov, o.rel_tol, worst_eig)};
}

EndToEndResult end_to_end(const EndToEndOptions& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<LabeledImage> train_set = make_synthetic_set(o.data_seed, static_cast<std::size_t>(o.train_images));
  const std::vector<LabeledImage> test_set = make_synthetic_set(o.test_seed, static_cast<std::size_t>(o.test_images));
  TrainConfig tc;
  tc.epochs = o.epochs;
  tc.seed = o.train_seed;
  EndToEndResult out;
  out.model = train(train_set, ModelConfig{}, tc);
  const auto t1 = std::chrono::steady_clock::now();
  EvalOptions eo;
  eo.seed = o.train_seed;
  const BenchmarkReport report = evaluate(out.model, test_set, eo);
  const auto t2 = std::chrono::steady_clock::now();
  const double noc90 = noc(report.traces, 0.90, report.max_clicks);
  const int nof90 = nof(report.traces, 0.90, report.max_clicks);
  out.verdict.pass = noc90 <= o.max_noc90 && nof90 <= o.max_nof;
  out.verdict.detail = fmt::format(
      "NoC@85 {:.2f} NoC@90 {:.2f} (max {}) NoF {} (max {}) IoU&1 {:.3f}; loss {:.4f} -> {:.4f}; train {:.0f}s eval {:.0f}s",
      noc(report.traces, 0.85, report.max_clicks), noc90, o.max_noc90, nof90, o.max_nof, iou_at(report.traces, 1),
      out.model.metadata.loss_trace.front().total, out.model.metadata.loss_trace.back().total,
      std::chrono::duration<double>(t1 - t0).count(), std::chrono::duration<double>(t2 - t1).count());
  return out;
}

Result protocol_determinism(const DeterminismOptions& o, const ModelCheckpoint* model_in) {
  const ModelCheckpoint local = model_in ? ModelCheckpoint{} : init_model(ModelConfig{}, o.seed);
  const ModelCheckpoint& model = model_in ? *model_in : local;
  const std::vector<LabeledImage> data = make_synthetic_set(o.data_seed, static_cast<std::size_t>(o.images));
  EvalOptions eo;
  eo.seed = o.seed;
  const std::string first = report_json(evaluate(model, data, eo));
  const std::string second = report_json(evaluate(model, data, eo));
  eo.jobs = 2;
  const std::string parallel = report_json(evaluate(model, data, eo));
  const bool same = first == second && first == parallel;
  return {same, fmt::format("{} images, report {} bytes: rerun identical={}, jobs=2 identical={}", o.images,
                            first.size(), first == second, first == parallel)};
}

Result distance_transform(const DistanceOptions& o) {
  int dt_bad = 0;
  int click_bad = 0;
  int click_cases = 0;
  for (int k = 0; k < o.cases; ++k) {
    RandomStream rng(derive_seed(o.seed, static_cast<std::uint64_t>(k)), 0);
    const auto w = static_cast<int>(rng.uniform_int(1, 14));
    const auto h = static_cast<int>(rng.uniform_int(1, 14));
    const double density = rng.uniform(0.2, 0.9);
    Mask gt(w, h), pred(w, h);
    std::vector<std::uint8_t> inside(gt.pixel_count());
    for (std::size_t i = 0; i < inside.size(); ++i) {
      inside[i] = rng.uniform() < density;
      gt.values[i] = rng.uniform() < 0.5;
      pred.values[i] = rng.uniform() < 0.3 ? !gt.values[i] : gt.values[i];
    }
    if (squared_distance_transform(inside, w, h) != oracle::brute_distance(inside, w, h)) ++dt_bad;

    ClickSet clicked;
    std::vector<std::size_t> clicked_list;
    for (std::size_t i = 0; i < gt.values.size(); ++i) {
      if (pred.values[i] != gt.values[i] && rng.uniform() < 0.2) {
        clicked.add({i, gt.values[i] ? 1 : -1});
        clicked_list.push_back(i);
      }
    }
    ++click_cases;
    if (next_click(pred, gt, clicked) != oracle::brute_next_click(pred, gt, clicked_list)) ++click_bad;
  }
  return {dt_bad == 0 && click_bad == 0,
          fmt::format("{} masks: distance mismatches {}, next-click mismatches {}/{}", o.cases, dt_bad, click_bad,
                      click_cases)};
}

Result kernel_oracle(const KernelOracleOptions& o) {
  double worst = 0.0;
  double worst_phi = 0.0;
  RandomStream rng(o.seed, 0);
  for (int k = 0; k < o.cases; ++k) {
    KernelParams kp = KernelParams::make(kFeatureDim, 1.0, 1.0, LearnMode::kLearned, k % 4 != 3);
    kp.log_eta0 = rng.normal();
    for (Eigen::Index t = 0; t < kp.log_eta.size(); ++t) kp.log_eta[t] = rng.normal();
    const int dims = kp.input_dims();
    Eigen::MatrixXd A(5, dims), B(7, dims);
    for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = rng.uniform();
    for (Eigen::Index i = 0; i < B.size(); ++i) B.data()[i] = rng.uniform();
    const Eigen::MatrixXd want = oracle::kernel_matrix(kp, A, B);
    const Eigen::MatrixXd got = kernel_matrix(kp, A, B);
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      const Eigen::VectorXd a = A.row(i).transpose();
      const Eigen::VectorXd b = B.row(i).transpose();
      const double single = kernel_eval(kp, {a.data(), static_cast<std::size_t>(dims)},
                                        {b.data(), static_cast<std::size_t>(dims)});
      worst = std::max(worst, std::abs(single - want(i, i)) / std::abs(want(i, i)));
    }
    worst = std::max(worst, ((got - want).array().abs() / want.array().abs()).maxCoeff());

    const WeightSpaceParams ws = init_weight_space(16, dims, LearnMode::kFixed, derive_seed(o.seed, k));
    worst_phi = std::max(worst_phi, max_abs(phi(ws, A) - oracle::phi(ws, A)) / ws.basis_scale());
  }
  return {worst <= o.rel_tol && worst_phi <= o.rel_tol,
          fmt::format("{} cases: worst kernel rel err {:.2e}, worst basis err {:.2e} (tol {})", o.cases, worst,
                      worst_phi, o.rel_tol)};
}

}  // namespace gpcis::verify
