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

#include "oracles.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

namespace gpcis::oracle {
namespace {

MatrixL to_long(const Eigen::MatrixXd& m) { return m.cast<long double>(); }

int mirror(int i, int n) {
  while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - 1 - i;
  return i;
}

}  // namespace

long double kernel(const KernelParams& kp, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::Index d = kp.log_eta.size();
  long double deep = 0.0L;
  for (Eigen::Index t = 0; t < d; ++t) {
    const long double diff = static_cast<long double>(a[t]) - b[t];
    deep += diff * diff / (2.0L * std::exp(static_cast<long double>(kp.log_eta[t])));
  }
  long double k = std::exp(-deep);
  if (kp.use_color) {
    long double color = 0.0L;
    for (Eigen::Index t = d; t < d + 3; ++t) {
      const long double diff = static_cast<long double>(a[t]) - b[t];
      color += diff * diff;
    }
    k += std::exp(static_cast<long double>(kp.log_eta0)) * std::exp(-color / 2.0L);
  }
  return k;
}

Eigen::MatrixXd kernel_matrix(const KernelParams& kp, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  Eigen::MatrixXd out(A.rows(), B.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < B.rows(); ++j) {
      out(i, j) = static_cast<double>(kernel(kp, A.row(i).transpose(), B.row(j).transpose()));
    }
  }
  return out;
}

Eigen::MatrixXd phi(const WeightSpaceParams& ws, const Eigen::MatrixXd& Xbar) {
  const long double scale = std::sqrt(2.0L / ws.theta.rows());
  Eigen::MatrixXd out(Xbar.rows(), ws.theta.rows());
  for (Eigen::Index i = 0; i < Xbar.rows(); ++i) {
    for (Eigen::Index r = 0; r < ws.theta.rows(); ++r) {
      long double u = ws.tau[r];
      for (Eigen::Index t = 0; t < Xbar.cols(); ++t) u += static_cast<long double>(ws.theta(r, t)) * Xbar(i, t);
      out(i, r) = static_cast<double>(scale * std::cos(u));
    }
  }
  return out;
}

Eigen::VectorXd head_magnitude_f32(const VariationalHead& head, const Eigen::MatrixXd& X) {
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index c = 0; c < X.rows(); ++c) {
    float z = static_cast<float>(head.b2);
    for (Eigen::Index h = 0; h < head.W1.rows(); ++h) {
      float a = static_cast<float>(head.b1[h]);
      for (Eigen::Index t = 0; t < X.cols(); ++t) a += static_cast<float>(head.W1(h, t)) * static_cast<float>(X(c, t));
      z += static_cast<float>(head.W2(0, h)) * std::max(a, 0.0f);
    }
    out[c] = static_cast<double>(z > 20.0f ? z : std::log1p(std::exp(z)));
  }
  return out;
}

Posterior exact_posterior(const KernelParams& kp, const Eigen::MatrixXd& xbar_n, const Eigen::MatrixXd& xbar_t,
                          const Eigen::VectorXd& m_xi, double eps2, double sigma2) {
  const Eigen::Index n = xbar_n.rows();
  const MatrixL K_nn = to_long(oracle::kernel_matrix(kp, xbar_n, xbar_n));
  const MatrixL K_tn = to_long(oracle::kernel_matrix(kp, xbar_t, xbar_n));
  const MatrixL K_tt = to_long(oracle::kernel_matrix(kp, xbar_t, xbar_t));
  const MatrixL A = K_nn + static_cast<long double>(eps2) * MatrixL::Identity(n, n);
  const MatrixL Kinv = A.fullPivLu().inverse();
  const MatrixL middle = MatrixL::Identity(n, n) - static_cast<long double>(sigma2) * Kinv;
  Posterior p;
  p.mean = (K_tn * Kinv * m_xi.cast<long double>()).cast<double>();
  p.cov = (K_tt - K_tn * Kinv * middle * K_tn.transpose()).cast<double>();
  return p;
}

double nfl(const Eigen::VectorXd& prob, const Eigen::VectorXd& gt, double gamma) {
  long double num = 0.0L;
  long double den = 0.0L;
  for (Eigen::Index i = 0; i < prob.size(); ++i) {
    const long double pt = gt[i] == 1.0 ? prob[i] : 1.0L - prob[i];
    const long double w = std::pow(1.0L - pt, static_cast<long double>(gamma));
    num += w * std::log(pt);
    den += w;
  }
  if (den < 1e-8L) den = 1e-8L;
  return static_cast<double>(-num / den);
}

double vi(const Eigen::VectorXd& m_xi, const Eigen::VectorXd& f_n, const Eigen::VectorXd& y, const Eigen::MatrixXd& K,
          double eps2) {
  long double ce = 0.0L;
  for (Eigen::Index c = 0; c < y.size(); ++c) {
    const long double s = 1.0L / (1.0L + std::exp(-static_cast<long double>(f_n[c])));
    ce -= y[c] > 0 ? std::log(s) : std::log(1.0L - s);
  }
  const Eigen::Index n = K.rows();
  const MatrixL Kinv = (to_long(K) + static_cast<long double>(eps2) * MatrixL::Identity(n, n)).fullPivLu().inverse();
  const VectorL m = m_xi.cast<long double>();
  return static_cast<double>(ce + 0.5L * m.dot(Kinv * m));
}

std::vector<double> dense_blur(const std::vector<double>& channel, int width, int height, double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<long double> g(static_cast<std::size_t>(2 * r + 1));
  long double total = 0.0L;
  for (int k = -r; k <= r; ++k) {
    g[static_cast<std::size_t>(k + r)] = std::exp(-static_cast<long double>(k * k) / (2.0L * sigma * sigma));
    total += g[static_cast<std::size_t>(k + r)];
  }
  std::vector<double> out(channel.size());
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      long double acc = 0.0L;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const long double w = g[static_cast<std::size_t>(dy + r)] * g[static_cast<std::size_t>(dx + r)];
          acc += w * channel[static_cast<std::size_t>(mirror(y + dy, height)) * width + mirror(x + dx, width)];
        }
      }
      out[static_cast<std::size_t>(y) * width + x] = static_cast<double>(acc / (total * total));
    }
  }
  return out;
}

Eigen::MatrixXd features(const Image& image) {
  const int w = image.width;
  const int h = image.height;
  const std::size_t m = static_cast<std::size_t>(w) * h;
  Eigen::MatrixXd X(static_cast<Eigen::Index>(m), 11);
  std::vector<std::vector<double>> ch(3, std::vector<double>(m));
  for (std::size_t i = 0; i < m; ++i) {
    for (int c = 0; c < 3; ++c) ch[c][i] = image.rgb[3 * i + c];
  }
  for (int c = 0; c < 3; ++c) {
    const std::vector<double> b2 = dense_blur(ch[c], w, h, 2.0);
    const std::vector<double> b8 = dense_blur(ch[c], w, h, 8.0);
    for (std::size_t i = 0; i < m; ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      X(row, c) = ch[c][i];
      X(row, 5 + c) = b2[i];
      X(row, 8 + c) = b8[i];
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    X(row, 3) = w > 1 ? static_cast<double>(i % w) / (w - 1) : 0.0;
    X(row, 4) = h > 1 ? static_cast<double>(i / w) / (h - 1) : 0.0;
  }
  return X;
}

std::vector<double> brute_distance(const std::vector<std::uint8_t>& inside, int width, int height) {
  std::vector<std::pair<int, int>> outside;
  for (int r = -1; r <= height; ++r) {
    for (int c = -1; c <= width; ++c) {
      const bool in_image = r >= 0 && r < height && c >= 0 && c < width;
      if (!in_image || !inside[static_cast<std::size_t>(r) * width + c]) outside.emplace_back(r, c);
    }
  }
  std::vector<double> out(inside.size(), 0.0);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * width + c;
      if (!inside[i]) continue;
      long best = std::numeric_limits<long>::max();
      for (const auto& [orow, ocol] : outside) {
        const long d = static_cast<long>(r - orow) * (r - orow) + static_cast<long>(c - ocol) * (c - ocol);
        best = std::min(best, d);
      }
      out[i] = static_cast<double>(best);
    }
  }
  return out;
}

std::optional<Click> brute_next_click(const Mask& pred, const Mask& gt, const std::vector<std::size_t>& clicked) {
  const int w = gt.width;
  const int h = gt.height;
  const std::size_t m = gt.values.size();
  std::vector<std::uint8_t> err(m);
  for (std::size_t i = 0; i < m; ++i) err[i] = (pred.values[i] != 0) != (gt.values[i] != 0);

  // Components by BFS; each is recorded with its pixel list.
  std::vector<int> comp(m, -1);
  std::vector<std::vector<std::size_t>> members;
  for (std::size_t s = 0; s < m; ++s) {
    if (!err[s] || comp[s] >= 0) continue;
    const int id = static_cast<int>(members.size());
    members.emplace_back();
    std::deque<std::size_t> q{s};
    comp[s] = id;
    while (!q.empty()) {
      const std::size_t p = q.front();
      q.pop_front();
      members[static_cast<std::size_t>(id)].push_back(p);
      const int r = static_cast<int>(p) / w;
      const int c = static_cast<int>(p) % w;
      const int nr[4] = {r - 1, r + 1, r, r};
      const int nc[4] = {c, c, c - 1, c + 1};
      for (int k = 0; k < 4; ++k) {
        if (nr[k] < 0 || nr[k] >= h || nc[k] < 0 || nc[k] >= w) continue;
        const std::size_t q2 = static_cast<std::size_t>(nr[k]) * w + nc[k];
        if (err[q2] && comp[q2] < 0) {
          comp[q2] = id;
          q.push_back(q2);
        }
      }
    }
  }
  std::vector<bool> used(members.size(), false);
  for (std::size_t round = 0; round < members.size(); ++round) {
    // Largest unused component; ties go to the one whose lowest pixel index is smaller.
    int pick = -1;
    for (std::size_t k = 0; k < members.size(); ++k) {
      if (used[k]) continue;
      if (pick < 0) {
        pick = static_cast<int>(k);
        continue;
      }
      const auto& a = members[k];
      const auto& b = members[static_cast<std::size_t>(pick)];
      const std::size_t amin = *std::min_element(a.begin(), a.end());
      const std::size_t bmin = *std::min_element(b.begin(), b.end());
      if (a.size() > b.size() || (a.size() == b.size() && amin < bmin)) pick = static_cast<int>(k);
    }
    used[static_cast<std::size_t>(pick)] = true;
    std::vector<std::uint8_t> inside(m, 0);
    for (std::size_t p : members[static_cast<std::size_t>(pick)]) inside[p] = 1;
    const std::vector<double> d = brute_distance(inside, w, h);
    std::optional<std::size_t> best;
    for (std::size_t p = 0; p < m; ++p) {
      if (!inside[p] || std::find(clicked.begin(), clicked.end(), p) != clicked.end()) continue;
      if (!best || d[p] > d[*best]) best = p;
    }
    if (best) return Click{*best, gt.values[*best] ? 1 : -1};
  }
  return std::nullopt;
}

std::vector<Eigen::MatrixXd> finite_difference(ModelCheckpoint model,
                                               const std::function<double(const ModelCheckpoint&)>& loss,
                                               double step) {
  std::vector<Eigen::MatrixXd> out;
  std::vector<ParameterRef> refs = parameter_refs(model);
  for (ParameterRef& p : refs) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(p.rows, p.cols);
    if (p.trainable) {
      for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double saved = p.data[i];
        p.data[i] = saved + step;
        const double up = loss(model);
        p.data[i] = saved - step;
        const double down = loss(model);
        p.data[i] = saved;
        g.data()[i] = (up - down) / (2.0 * step);
      }
    }
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace gpcis::oracle
