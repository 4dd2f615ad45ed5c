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

#include "gpcis/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "gpcis/errors.hpp"
#include "gpcis/kernel.hpp"
#include "gpcis/numeric.hpp"
#include "gpcis/simd/kernels.hpp"

namespace gpcis::ad {
namespace {

void require_same_shape(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw InvalidInput(std::string(op) + ": shape mismatch");
}

void require_scalar(Var s, const char* op) {
  if (s.rows() != 1 || s.cols() != 1) throw InvalidInput(std::string(op) + ": expected a 1x1 operand");
}

Tape& common_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw InvalidInput("operands recorded on different tapes");
  return a.tape();
}

simd::PixelColumns columns_of(const Matrix& m) {
  return {m.data(), static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.rows()),
          static_cast<std::size_t>(m.cols())};
}

}  // namespace

const Matrix& Var::value() const { return tape_->value(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw InvalidInput("Var::scalar on a non-scalar value");
  return v(0, 0);
}

Var Tape::constant(Matrix value) {
  nodes_.push_back({std::move(value), Matrix(), false, nullptr});
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::variable(Matrix value) {
  nodes_.push_back({std::move(value), Matrix(), true, nullptr});
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, Backprop backprop) {
  bool needs = false;
  for (Var in : inputs) needs = needs || nodes_[in.id()].needs_grad;
  nodes_.push_back({std::move(value), Matrix(), needs, needs ? std::move(backprop) : nullptr});
  return {this, static_cast<int>(nodes_.size() - 1)};
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& node = nodes_[v.id()];
  if (!node.needs_grad) return;
  if (node.grad.size() == 0) {
    node.grad = g;
  } else {
    node.grad += g;
  }
}

Matrix Tape::grad(Var v) const {
  const Node& node = nodes_[v.id()];
  if (node.grad.size() == 0) return Matrix::Zero(node.value.rows(), node.value.cols());
  return node.grad;
}

void Tape::backward(Var root) {
  if (root.value().size() != 1) throw InvalidInput("backward needs a scalar root");
  for (Node& n : nodes_) n.grad.resize(0, 0);
  nodes_[root.id()].grad = Matrix::Ones(1, 1);
  for (int id = root.id(); id >= 0; --id) {
    Node& node = nodes_[id];
    if (!node.backprop || node.grad.size() == 0) continue;
    const Matrix upstream = node.grad;
    node.backprop(*this, upstream);
  }
}

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  Tape& t = common_tape(a, b);
  return t.record(a.value() + b.value(), {a, b}, [a, b](Tape& tape, const Matrix& g) {
    tape.accumulate(a, g);
    tape.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  Tape& t = common_tape(a, b);
  return t.record(a.value() - b.value(), {a, b}, [a, b](Tape& tape, const Matrix& g) {
    tape.accumulate(a, g);
    tape.accumulate(b, -g);
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  Tape& t = common_tape(a, b);
  return t.record(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape& tape, const Matrix& g) {
    tape.accumulate(a, g.cwiseProduct(b.value()));
    tape.accumulate(b, g.cwiseProduct(a.value()));
  });
}

Var scale(Var a, double s) {
  return a.tape().record(a.value() * s, {a}, [a, s](Tape& tape, const Matrix& g) { tape.accumulate(a, g * s); });
}

Var mul_const(Var a, const Matrix& c) {
  if (a.rows() != c.rows() || a.cols() != c.cols()) throw InvalidInput("mul_const: shape mismatch");
  return a.tape().record(a.value().cwiseProduct(c), {a},
                         [a, c](Tape& tape, const Matrix& g) { tape.accumulate(a, g.cwiseProduct(c)); });
}

Var scale_by(Var a, Var s) {
  require_scalar(s, "scale_by");
  Tape& t = common_tape(a, s);
  return t.record(a.value() * s.scalar(), {a, s}, [a, s](Tape& tape, const Matrix& g) {
    tape.accumulate(a, g * s.scalar());
    tape.accumulate(s, Matrix::Constant(1, 1, g.cwiseProduct(a.value()).sum()));
  });
}

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw InvalidInput("matmul: inner dimension mismatch");
  Tape& t = common_tape(a, b);
  return t.record(a.value() * b.value(), {a, b}, [a, b](Tape& tape, const Matrix& g) {
    if (tape.needs_grad(a)) tape.accumulate(a, g * b.value().transpose());
    if (tape.needs_grad(b)) tape.accumulate(b, a.value().transpose() * g);
  });
}

Var transpose(Var a) {
  return a.tape().record(a.value().transpose(), {a},
                         [a](Tape& tape, const Matrix& g) { tape.accumulate(a, g.transpose()); });
}

Var add_col_broadcast(Var a, Var col) {
  if (col.cols() != 1 || col.rows() != a.rows()) throw InvalidInput("add_col_broadcast: shape mismatch");
  Tape& t = common_tape(a, col);
  Matrix value = a.value().colwise() + col.value().col(0);
  return t.record(std::move(value), {a, col}, [a, col](Tape& tape, const Matrix& g) {
    tape.accumulate(a, g);
    tape.accumulate(col, g.rowwise().sum());
  });
}

Var add_scalar_broadcast(Var a, Var s) {
  require_scalar(s, "add_scalar_broadcast");
  Tape& t = common_tape(a, s);
  Matrix value = a.value().array() + s.scalar();
  return t.record(std::move(value), {a, s}, [a, s](Tape& tape, const Matrix& g) {
    tape.accumulate(a, g);
    tape.accumulate(s, Matrix::Constant(1, 1, g.sum()));
  });
}

Var sum(Var a) {
  return a.tape().record(Matrix::Constant(1, 1, a.value().sum()), {a}, [a](Tape& tape, const Matrix& g) {
    tape.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var dot(Var a, Var b) {
  require_same_shape(a, b, "dot");
  Tape& t = common_tape(a, b);
  return t.record(Matrix::Constant(1, 1, a.value().cwiseProduct(b.value()).sum()), {a, b},
                  [a, b](Tape& tape, const Matrix& g) {
                    tape.accumulate(a, g(0, 0) * b.value());
                    tape.accumulate(b, g(0, 0) * a.value());
                  });
}

Var exp(Var a) {
  auto value = std::make_shared<Matrix>(a.value().array().exp());
  return a.tape().record(*value, {a}, [a, value](Tape& tape, const Matrix& g) {
    tape.accumulate(a, g.cwiseProduct(*value));
  });
}

Var relu(Var a) {
  Matrix value = a.value().cwiseMax(0.0);
  return a.tape().record(std::move(value), {a}, [a](Tape& tape, const Matrix& g) {
    tape.accumulate(a, (a.value().array() > 0.0).cast<double>().matrix().cwiseProduct(g));
  });
}

Var softplus(Var a) {
  Matrix value = a.value().unaryExpr([](double x) { return gpcis::softplus(x); });
  return a.tape().record(std::move(value), {a}, [a](Tape& tape, const Matrix& g) {
    tape.accumulate(a, a.value().unaryExpr([](double x) { return gpcis::sigmoid(x); }).cwiseProduct(g));
  });
}

Var sigmoid(Var a) {
  Matrix value = a.value().unaryExpr([](double x) { return gpcis::sigmoid(x); });
  return a.tape().record(std::move(value), {a}, [a](Tape& tape, const Matrix& g) {
    const Matrix s = a.value().unaryExpr([](double x) { return gpcis::sigmoid(x); });
    tape.accumulate(a, (s.array() * (1.0 - s.array())).matrix().cwiseProduct(g));
  });
}

Var solve_jittered(Var K, Var B, double eps2) {
  if (K.rows() != K.cols() || K.rows() != B.rows()) throw InvalidInput("solve_jittered: shape mismatch");
  Tape& t = common_tape(K, B);
  auto factor = std::make_shared<CholeskyFactor>(CholeskyFactor::jittered(K.value(), eps2));
  auto x = std::make_shared<Matrix>(factor->solve(B.value()));
  // d(A^{-1} B) = A^{-1} (dB - dK A^{-1} B).
  return t.record(*x, {K, B}, [K, B, factor, x](Tape& tape, const Matrix& g) {
    const Matrix adj = factor->solve(g);
    tape.accumulate(B, adj);
    if (tape.needs_grad(K)) tape.accumulate(K, -adj * x->transpose());
  });
}

Var kernel_cross(const Matrix& A, const Matrix& B, Var log_eta0, Var log_eta, bool use_color) {
  require_scalar(log_eta0, "kernel_cross");
  const Eigen::Index d = log_eta.rows();
  if (log_eta.cols() != 1 || A.cols() != d + (use_color ? 3 : 0) || B.cols() != A.cols()) {
    throw InvalidInput("kernel_cross: input width does not match kernel parameters");
  }
  Tape& t = common_tape(log_eta0, log_eta);
  auto points = std::make_shared<Matrix>(B.transpose());
  auto inv_two_eta = std::make_shared<Eigen::VectorXd>((2.0 * log_eta.value().col(0).array().exp()).inverse());
  const double eta0 = use_color ? std::exp(log_eta0.scalar()) : 0.0;

  simd::KernelCrossArgs args;
  args.pixels = columns_of(A);
  args.points = points->data();
  args.n = static_cast<std::size_t>(B.rows());
  args.deep_dims = static_cast<std::size_t>(d);
  args.color_dims = use_color ? 3 : 0;
  args.inv_two_eta = inv_two_eta->data();
  args.eta0 = eta0;

  Matrix value(A.rows(), B.rows());
  args.out = value.data();
  if (value.size() > 0) simd::active_table().kernel_cross(args);
  if (&A == &B || A == B) mirror_upper(value);

  auto pixels = std::make_shared<Matrix>(A);
  return t.record(std::move(value), {log_eta0, log_eta},
                  [log_eta0, log_eta, pixels, points, inv_two_eta, args](Tape& tape, const Matrix& g) {
                    simd::KernelCrossGradArgs grad_args;
                    grad_args.forward = args;
                    grad_args.forward.pixels = columns_of(*pixels);
                    grad_args.forward.points = points->data();
                    grad_args.forward.inv_two_eta = inv_two_eta->data();
                    grad_args.forward.out = nullptr;
                    grad_args.grad_out = g.data();
                    double g_eta0 = 0.0;
                    Eigen::VectorXd g_eta = Eigen::VectorXd::Zero(log_eta.rows());
                    grad_args.grad_log_eta0 = &g_eta0;
                    grad_args.grad_log_eta = g_eta.data();
                    if (g.size() > 0) simd::active_table().kernel_cross_grad(grad_args);
                    tape.accumulate(log_eta0, Matrix::Constant(1, 1, g_eta0));
                    tape.accumulate(log_eta, g_eta);
                  });
}

Var rff_project(const Matrix& Xbar, Var theta, Var tau, Var coef) {
  const Eigen::Index l = theta.rows();
  if (Xbar.cols() != theta.cols() || tau.rows() != l || coef.rows() != l || tau.cols() != 1 || coef.cols() != 1) {
    throw InvalidInput("rff_project: shape mismatch");
  }
  Tape& t = common_tape(theta, tau);
  common_tape(theta, coef);
  auto pixels = std::make_shared<Matrix>(Xbar);
  auto theta_rows = std::make_shared<Matrix>(theta.value().transpose());

  Matrix value(Xbar.rows(), 1);
  simd::RffProjectArgs args;
  args.pixels = columns_of(*pixels);
  args.theta = theta_rows->data();
  args.tau = tau.value().data();
  args.coef = coef.value().data();
  args.bases = static_cast<std::size_t>(l);
  args.out = value.data();
  if (value.size() > 0) simd::active_table().rff_project(args);

  return t.record(std::move(value), {theta, tau, coef},
                  [theta, tau, coef, pixels, theta_rows](Tape& tape, const Matrix& g) {
                    const Eigen::Index bases = theta.rows();
                    const Eigen::Index dims = theta.cols();
                    simd::RffProjectGradArgs grad_args;
                    grad_args.forward.pixels = columns_of(*pixels);
                    grad_args.forward.theta = theta_rows->data();
                    grad_args.forward.tau = tau.value().data();
                    grad_args.forward.coef = coef.value().data();
                    grad_args.forward.bases = static_cast<std::size_t>(bases);
                    grad_args.grad_out = g.data();
                    Matrix g_theta_rows = Matrix::Zero(dims, bases);  // row-major l x dims
                    Eigen::VectorXd g_tau = Eigen::VectorXd::Zero(bases);
                    Eigen::VectorXd g_coef = Eigen::VectorXd::Zero(bases);
                    grad_args.grad_theta = g_theta_rows.data();
                    grad_args.grad_tau = g_tau.data();
                    grad_args.grad_coef = g_coef.data();
                    if (g.size() > 0) simd::active_table().rff_project_grad(grad_args);
                    tape.accumulate(theta, g_theta_rows.transpose());
                    tape.accumulate(tau, g_tau);
                    tape.accumulate(coef, g_coef);
                  });
}

Var normalized_focal_loss(Var logits, const Eigen::VectorXd& target, double gamma) {
  if (logits.cols() != 1 || logits.rows() != target.size()) throw InvalidInput("focal loss: shape mismatch");
  constexpr double kDenominatorFloor = 1e-8;
  const Eigen::Index m = target.size();
  // z = f for foreground targets and -f for background, so p_t = sigmoid(z).
  Eigen::VectorXd sign(m), p_t(m), weight(m), log_p(m);
  double numer = 0.0;
  double denom = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    sign[i] = target[i] > 0.5 ? 1.0 : -1.0;
    const double z = sign[i] * logits.value()(i, 0);
    p_t[i] = gpcis::sigmoid(z);
    weight[i] = std::pow(gpcis::sigmoid(-z), gamma);
    log_p[i] = gpcis::log_sigmoid(z);
    numer -= weight[i] * log_p[i];
    denom += weight[i];
  }
  const bool floored = denom < kDenominatorFloor;
  const double denom_used = floored ? kDenominatorFloor : denom;
  const double loss = numer / denom_used;
  return logits.tape().record(
      Matrix::Constant(1, 1, loss), {logits},
      [logits, sign, p_t, weight, log_p, loss, floored, denom_used, gamma](Tape& tape, const Matrix& g) {
        const Eigen::Index n = sign.size();
        Matrix grad(n, 1);
        for (Eigen::Index i = 0; i < n; ++i) {
          const double one_minus_p = 1.0 - p_t[i];
          const double d_weight = -gamma * p_t[i] * weight[i];
          const double d_numer = -(d_weight * log_p[i] + weight[i] * one_minus_p);
          const double d_denom = floored ? 0.0 : d_weight;
          grad(i, 0) = g(0, 0) * sign[i] * (d_numer - loss * d_denom) / denom_used;
        }
        tape.accumulate(logits, grad);
      });
}

Var bce_with_logits(Var logits, const Eigen::VectorXd& target) {
  if (logits.cols() != 1 || logits.rows() != target.size()) throw InvalidInput("bce: shape mismatch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < target.size(); ++i) {
    const double f = logits.value()(i, 0);
    total += gpcis::softplus(f) - target[i] * f;
  }
  return logits.tape().record(Matrix::Constant(1, 1, total), {logits}, [logits, target](Tape& tape, const Matrix& g) {
    Matrix grad(target.size(), 1);
    for (Eigen::Index i = 0; i < target.size(); ++i) {
      grad(i, 0) = g(0, 0) * (gpcis::sigmoid(logits.value()(i, 0)) - target[i]);
    }
    tape.accumulate(logits, grad);
  });
}

}  // namespace gpcis::ad
