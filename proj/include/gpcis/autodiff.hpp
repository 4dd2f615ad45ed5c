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

// Minimal reverse-mode differentiation over dense matrices. Each op records
// its value and a closure that maps the upstream gradient to its inputs.
// Only the operations on the segmentation loss path are provided; the kernel
// and Fourier-basis ops are fused so no m x l or m x n x d intermediate is
// stored.

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <vector>

#include "gpcis/linalg.hpp"

namespace gpcis::ad {

using Matrix = Eigen::MatrixXd;

class Tape;

class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  double scalar() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  int id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using Backprop = std::function<void(Tape&, const Matrix& grad_out)>;

  Var constant(Matrix value);
  Var variable(Matrix value);
  Var record(Matrix value, std::initializer_list<Var> inputs, Backprop backprop);

  void backward(Var root);

  const Matrix& value(int id) const { return nodes_[id].value; }
  // Zero matrix of the right shape when nothing reached the node.
  Matrix grad(Var v) const;
  bool needs_grad(Var v) const { return nodes_[v.id()].needs_grad; }
  void accumulate(Var v, const Matrix& g);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    Backprop backprop;
  };
  std::vector<Node> nodes_;
};

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var scale(Var a, double s);
Var mul_const(Var a, const Matrix& c);  // elementwise by a constant
Var scale_by(Var a, Var s);             // a * s with s 1x1
Var matmul(Var a, Var b);
Var transpose(Var a);
Var add_col_broadcast(Var a, Var col);  // a(r, c) + col(r)
Var add_scalar_broadcast(Var a, Var s);  // a + s with s 1x1
Var sum(Var a);
Var dot(Var a, Var b);  // sum of elementwise product, 1x1
Var exp(Var a);
Var relu(Var a);
Var softplus(Var a);
Var sigmoid(Var a);

// (K + eps2 I)^{-1} B through a Cholesky factor; K is symmetric.
Var solve_jittered(Var K, Var B, double eps2);

// Cross kernel between fixed pixel inputs A (p x D) and fixed points B
// (q x D); differentiable in log eta0 (1x1, may be a constant) and
// log eta (d x 1).
Var kernel_cross(const Matrix& A, const Matrix& B, Var log_eta0, Var log_eta, bool use_color);

// Phi(Xbar) w as a p x 1 column, differentiable in theta (l x D), tau (l x 1)
// and coef (l x 1, = sqrt(2/l) w).
Var rff_project(const Matrix& Xbar, Var theta, Var tau, Var coef);

// Normalized focal loss on logits f against a binary target.
Var normalized_focal_loss(Var logits, const Eigen::VectorXd& target, double gamma);

// Sum over entries of binary cross-entropy between sigmoid(logits) and
// {0, 1} targets.
Var bce_with_logits(Var logits, const Eigen::VectorXd& target);

}  // namespace gpcis::ad
