// Copyright 2026 The PlanNetX Authors
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

#include <Eigen/Dense>

// Primal-dual interior-point method (Mehrotra predictor-corrector) for
//
//   min  1/2 z'Hz + g'z   s.t.  C z <= d
//
// The constraint matrix is accessed only through an operator so that the
// OCP can exploit its stage structure. Required members of `Constraints`:
//
//   int rows() const;
//   void apply(const VectorXd& z, VectorXd& out) const;        // out = C z
//   void apply_transpose(const VectorXd& w, VectorXd& out) const;  // C' w
//   void add_normal(const VectorXd& sigma, MatrixXd& m) const; // m += C' S C

namespace plannetx {

struct QpOptions {
  int max_iter = 100;
  // Stationarity and primal residuals, inf-norm, relative to the size of
  // the terms they are made of.
  double tol_residual = 1e-10;
  double tol_mu = 1e-10;  // average complementarity
  // Looser level accepted when rounding stalls progress near the solution
  // (factorization breakdown or iteration cap).
  double tol_acceptable = 1e-8;
};

enum class QpStatus { kSolved, kAcceptable, kMaxIter, kFactorization };

struct QpResult {
  Eigen::VectorXd z;
  Eigen::VectorXd lambda;  // >= 0, one per inequality row
  Eigen::VectorXd slack;   // d - C z
  int iterations = 0;
  double mu = 0.0;
  QpStatus status = QpStatus::kMaxIter;
};

class DenseConstraints {
 public:
  explicit DenseConstraints(Eigen::MatrixXd c) : c_(std::move(c)) {}
  int rows() const { return static_cast<int>(c_.rows()); }
  void apply(const Eigen::VectorXd& z, Eigen::VectorXd& out) const {
    out.noalias() = c_ * z;
  }
  void apply_transpose(const Eigen::VectorXd& w, Eigen::VectorXd& out) const {
    out.noalias() = c_.transpose() * w;
  }
  void add_normal(const Eigen::VectorXd& sigma, Eigen::MatrixXd& m) const {
    m.noalias() += c_.transpose() * sigma.asDiagonal() * c_;
  }

 private:
  Eigen::MatrixXd c_;
};

template <class Constraints>
QpResult solve_qp(const Eigen::MatrixXd& h, const Eigen::VectorXd& g,
                  const Constraints& c, const Eigen::VectorXd& d,
                  const QpOptions& opt = {},
                  const Eigen::VectorXd* z_init = nullptr);

QpResult solve_dense_qp(const Eigen::MatrixXd& h, const Eigen::VectorXd& g,
                        const Eigen::MatrixXd& c, const Eigen::VectorXd& d,
                        const QpOptions& opt = {});

}  // namespace plannetx

#include "plannetx/qp_impl.hpp"
