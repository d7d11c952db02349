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

#include <algorithm>
#include <cmath>
#include <limits>

namespace plannetx {

namespace detail {

// Largest alpha in (0, 1] keeping v + alpha * dv >= (1 - tau) * v.
inline double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv,
                       double tau) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (dv[i] < 0.0) alpha = std::min(alpha, -tau * v[i] / dv[i]);
  return alpha;
}

}  // namespace detail

template <class Constraints>
QpResult solve_qp(const Eigen::MatrixXd& h, const Eigen::VectorXd& g,
                  const Constraints& c, const Eigen::VectorXd& d,
                  const QpOptions& opt, const Eigen::VectorXd* z_init) {
  using Eigen::VectorXd;
  const Eigen::Index n = g.size();
  const Eigen::Index m = c.rows();

  QpResult res;
  VectorXd& z = res.z;
  VectorXd& lam = res.lambda;
  VectorXd& s = res.slack;
  z = z_init ? *z_init : VectorXd::Zero(n);

  VectorXd cz(m), ctl(n), rd(n), rp(m), rhs(n), tmp(m);
  VectorXd dz(n), ds(m), dl(m), dz_aff(n), ds_aff(m), dl_aff(m), sigma(m);
  Eigen::MatrixXd kkt(n, n);
  Eigen::LLT<Eigen::MatrixXd> llt(n);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(n);
  bool pivoted = false;

  c.apply(z, cz);
  s = (d - cz).cwiseMax(1.0);
  lam = VectorXd::Ones(m);

  auto residuals = [&] {
    c.apply(z, cz);
    c.apply_transpose(lam, ctl);
    rd.noalias() = h * z;
    rd += g + ctl;
    rp = cz + s - d;
  };

  // Solves the reduced Newton system for a given complementarity target rc
  // (the third block row reads lam.*ds + s.*dl = -rc).
  auto newton = [&](const VectorXd& rc, VectorXd& ddz, VectorXd& dds,
                    VectorXd& ddl) {
    tmp = (rc - lam.cwiseProduct(rp)).cwiseQuotient(s);
    c.apply_transpose(tmp, rhs);
    rhs -= rd;
    if (pivoted)
      ddz = ldlt.solve(rhs);
    else
      ddz = llt.solve(rhs);
    c.apply(ddz, dds);
    dds = -rp - dds;
    ddl = -(rc + lam.cwiseProduct(dds)).cwiseQuotient(s);
  };

  // Stationarity and primal residuals relative to the size of their terms.
  auto error = [&] {
    const double scale_d =
        std::max({1.0, g.lpNorm<Eigen::Infinity>(), ctl.lpNorm<Eigen::Infinity>(),
                  (rd - g - ctl).lpNorm<Eigen::Infinity>()});
    const double scale_p = std::max(
        {1.0, m > 0 ? d.lpNorm<Eigen::Infinity>() : 0.0,
         m > 0 ? cz.lpNorm<Eigen::Infinity>() : 0.0});
    return std::max(rd.lpNorm<Eigen::Infinity>() / scale_d,
                    m > 0 ? rp.lpNorm<Eigen::Infinity>() / scale_p : 0.0);
  };

  for (int it = 0; it < opt.max_iter; ++it) {
    residuals();
    const double mu = m > 0 ? s.dot(lam) / static_cast<double>(m) : 0.0;
    res.mu = mu;
    res.iterations = it;
    const double err = error();
    if (err <= opt.tol_residual && mu <= opt.tol_mu) {
      res.status = QpStatus::kSolved;
      return res;
    }
    const bool acceptable = err <= opt.tol_acceptable && mu <= opt.tol_acceptable;

    sigma = lam.cwiseQuotient(s);
    kkt = h;
    c.add_normal(sigma, kkt);
    llt.compute(kkt);
    pivoted = llt.info() != Eigen::Success;
    if (pivoted) {
      // Lost definiteness to rounding once the barrier is nearly closed.
      if (acceptable) {
        res.status = QpStatus::kAcceptable;
        return res;
      }
      kkt.diagonal().array() += 1e-12 * (1.0 + h.diagonal().cwiseAbs().maxCoeff());
      ldlt.compute(kkt);
      if (ldlt.info() != Eigen::Success) {
        res.status = QpStatus::kFactorization;
        return res;
      }
    }

    // Predictor.
    VectorXd rc = s.cwiseProduct(lam);
    newton(rc, dz_aff, ds_aff, dl_aff);
    const double a_p = detail::max_step(s, ds_aff, 1.0);
    const double a_d = detail::max_step(lam, dl_aff, 1.0);
    const double mu_aff =
        m > 0 ? (s + a_p * ds_aff).dot(lam + a_d * dl_aff) / static_cast<double>(m)
              : 0.0;
    const double centering = mu > 0.0 ? std::pow(mu_aff / mu, 3) : 0.0;

    // Corrector with centering.
    rc += ds_aff.cwiseProduct(dl_aff);
    rc.array() -= centering * mu;
    newton(rc, dz, ds, dl);

    const double tau = std::clamp(1.0 - mu, 0.9, 1.0 - 1e-8);
    const double alpha =
        std::min(detail::max_step(s, ds, tau), detail::max_step(lam, dl, tau));
    z += alpha * dz;
    s += alpha * ds;
    lam += alpha * dl;
  }
  residuals();
  res.iterations = opt.max_iter;
  res.mu = m > 0 ? s.dot(lam) / static_cast<double>(m) : 0.0;
  res.status = error() <= opt.tol_acceptable && res.mu <= opt.tol_acceptable
                   ? QpStatus::kAcceptable
                   : QpStatus::kMaxIter;
  return res;
}

}  // namespace plannetx
