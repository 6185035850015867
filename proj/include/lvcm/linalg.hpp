// Copyright 2026 The LVCM Workbench Authors
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
#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <vector>

#include "lvcm/errors.hpp"

namespace lvcm::linalg {

using cplx = std::complex<double>;

/// exp(-i t H) v for Hermitian H given as y = apply(x). Plain Lanczos with
/// adaptive substeps; the accumulated error estimate stays below tol * |v|.
template <class Apply>
Eigen::VectorXcd expv_hermitian(const Apply& apply, double t, const Eigen::VectorXcd& v, double tol = 1e-12,
                                int krylov_dim = 30) {
  Eigen::VectorXcd w = v;
  if (t == 0.0) return w;
  const Eigen::Index n = v.size();
  const int m = static_cast<int>(std::min<Eigen::Index>(krylov_dim, n));
  const double sign = t > 0 ? 1.0 : -1.0;
  const double total = std::abs(t);
  double done = 0.0;
  double dt = total;
  Eigen::MatrixXcd V(n, m + 1);
  Eigen::VectorXcd u(n);
  int guard = 0;
  while (done < total) {
    const double beta = w.norm();
    if (beta == 0.0) return w;
    V.col(0) = w / beta;
    std::vector<double> alpha, offd;
    int k = m;
    bool happy = false;
    for (int j = 0; j < m; ++j) {
      apply(V.col(j), u);
      const double a = V.col(j).dot(u).real();
      alpha.push_back(a);
      u -= a * V.col(j);
      if (j > 0) u -= offd[static_cast<std::size_t>(j - 1)] * V.col(j - 1);
      const double b = u.norm();
      offd.push_back(b);
      const double scale = std::abs(a) + (j > 0 ? offd[static_cast<std::size_t>(j - 1)] : 0.0) + 1.0;
      if (b <= 1e-13 * scale) {
        k = j + 1;
        happy = true;
        break;
      }
      V.col(j + 1) = u / b;
    }
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(k, k);
    for (int j = 0; j < k; ++j) {
      T(j, j) = alpha[static_cast<std::size_t>(j)];
      if (j + 1 < k) T(j, j + 1) = T(j + 1, j) = offd[static_cast<std::size_t>(j)];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    const Eigen::MatrixXd& Q = es.eigenvectors();
    const Eigen::VectorXd& lam = es.eigenvalues();
    Eigen::VectorXcd c(k);
    double step = std::min(dt, total - done);
    double err = 0.0;
    while (true) {
      if (++guard > 1000000) throw IntegratorFailure("Krylov propagation failed to converge");
      Eigen::VectorXcd phase(k);
      for (int j = 0; j < k; ++j) phase(j) = std::exp(cplx{0.0, -sign * step * lam(j)}) * Q(0, j);
      c = Q.cast<cplx>() * phase;
      if (happy) {
        err = 0.0;
        break;
      }
      err = beta * offd[static_cast<std::size_t>(k - 1)] * std::abs(c(k - 1));
      const double allowed = tol * beta * step / total;
      if (err <= allowed) break;
      step *= std::clamp(0.9 * std::pow(allowed / err, 1.0 / k), 0.05, 0.9);
    }
    w = beta * (V.leftCols(k) * c);
    done += step;
    if (happy) {
      dt = total;
    } else {
      const double allowed = tol * beta * step / total;
      const double grow = err > 0.0 ? 0.9 * std::pow(allowed / err, 1.0 / k) : 2.0;
      dt = step * std::clamp(grow, 0.2, 2.0);
    }
    if (total - done < 1e-15 * total) break;
  }
  return w;
}

struct Dopri5Options {
  double rtol = 1e-10;
  double atol = 1e-12;
  double initial_step = 0.0;
  double max_step = std::numeric_limits<double>::infinity();
  long max_steps = 50'000'000;
};

/// Dormand-Prince 5(4) with FSAL and standard PI-free step control.
/// `rhs(t, y, dydt)` fills dydt. The step size carries over between calls so a
/// grid can be integrated segment by segment.
template <class Vec>
class Dopri5 {
 public:
  using Rhs = std::function<void(double, const Vec&, Vec&)>;

  Dopri5(Rhs rhs, Dopri5Options opt = {}) : rhs_(std::move(rhs)), opt_(opt) {}

  long steps_taken() const { return accepted_; }
  long steps_rejected() const { return rejected_; }

  void integrate(Vec& y, double t0, double t1) {
    if (t1 == t0) return;
    if (t1 < t0) throw IntegratorFailure("Dopri5 integrates forward in time only");
    double t = t0;
    if (h_ <= 0.0) h_ = opt_.initial_step > 0.0 ? opt_.initial_step : initial_step(y, t0, t1);
    k1_.resize(y.size());
    rhs_(t, y, k1_);
    long local = 0;
    while (t < t1) {
      if (++local > opt_.max_steps) throw IntegratorFailure("Dopri5 exceeded the step budget");
      double h = std::min({h_, opt_.max_step, t1 - t});
      const bool last = h >= t1 - t;
      step(y, t, h);
      const double err = error_norm(y);
      if (!std::isfinite(err)) throw IntegratorFailure("Dopri5 produced a non-finite state");
      if (err <= 1.0) {
        ++accepted_;
        t = last ? t1 : t + h;
        y = ynew_;
        k1_ = k7_;
        const double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
        if (!last || fac < 1.0) h_ = h * fac;
      } else {
        ++rejected_;
        h_ = h * std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.9);
        if (h_ < 1e-14 * std::max(1.0, std::abs(t))) throw IntegratorFailure("Dopri5 step size underflow");
      }
    }
  }

 private:
  double initial_step(const Vec& y, double t0, double t1) {
    Vec f(y.size());
    rhs_(t0, y, f);
    const double d0 = scaled_norm(y, y);
    const double d1 = scaled_norm(f, y);
    double h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    return std::min(h, t1 - t0);
  }

  double scaled_norm(const Vec& v, const Vec& ref) const {
    double s = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double sc = opt_.atol + opt_.rtol * std::abs(ref(i));
      const double r = std::abs(v(i)) / sc;
      s += r * r;
    }
    return std::sqrt(s / static_cast<double>(std::max<Eigen::Index>(1, v.size())));
  }

  void step(const Vec& y, double t, double h) {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
    const auto n = y.size();
    for (Vec* k : {&k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &tmp_, &ynew_}) k->resize(n);
    tmp_ = y + h * a21 * k1_;
    rhs_(t + c2 * h, tmp_, k2_);
    tmp_ = y + h * (a31 * k1_ + a32 * k2_);
    rhs_(t + c3 * h, tmp_, k3_);
    tmp_ = y + h * (a41 * k1_ + a42 * k2_ + a43 * k3_);
    rhs_(t + c4 * h, tmp_, k4_);
    tmp_ = y + h * (a51 * k1_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
    rhs_(t + c5 * h, tmp_, k5_);
    tmp_ = y + h * (a61 * k1_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
    rhs_(t + h, tmp_, k6_);
    ynew_ = y + h * (b1 * k1_ + b3 * k3_ + b4 * k4_ + b5 * k5_ + b6 * k6_);
    rhs_(t + h, ynew_, k7_);
    err_ = h * (e1 * k1_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);
    yold_ = y;
  }

  double error_norm(const Vec&) const {
    double s = 0.0;
    for (Eigen::Index i = 0; i < err_.size(); ++i) {
      const double sc = opt_.atol + opt_.rtol * std::max(std::abs(yold_(i)), std::abs(ynew_(i)));
      const double r = std::abs(err_(i)) / sc;
      s += r * r;
    }
    return std::sqrt(s / static_cast<double>(std::max<Eigen::Index>(1, err_.size())));
  }

  Rhs rhs_;
  Dopri5Options opt_;
  double h_ = 0.0;
  long accepted_ = 0;
  long rejected_ = 0;
  Vec k1_, k2_, k3_, k4_, k5_, k6_, k7_, tmp_, ynew_, yold_, err_;
};

/// Index plan for applying an operator that acts on a subset of tensor factors.
/// `local` enumerates the target sub-index offsets (first listed factor most
/// significant), `other` enumerates offsets of the remaining factors.
class LocalPlan {
 public:
  LocalPlan() = default;

  LocalPlan(const std::vector<std::size_t>& dims, const std::vector<std::size_t>& factors) {
    std::vector<std::size_t> strides(dims.size(), 1);
    std::size_t total = 1;
    for (std::size_t f = dims.size(); f-- > 0;) {
      strides[f] = total;
      total *= dims[f];
    }
    local_ = {0};
    for (std::size_t f : factors) {
      std::vector<std::size_t> next;
      for (std::size_t base : local_) {
        for (std::size_t d = 0; d < dims.at(f); ++d) next.push_back(base + d * strides[f]);
      }
      local_ = std::move(next);
    }
    other_ = {0};
    for (std::size_t f = 0; f < dims.size(); ++f) {
      if (std::find(factors.begin(), factors.end(), f) != factors.end()) continue;
      std::vector<std::size_t> next;
      for (std::size_t base : other_) {
        for (std::size_t d = 0; d < dims[f]; ++d) next.push_back(base + d * strides[f]);
      }
      other_ = std::move(next);
    }
    dimension_ = total;
  }

  std::size_t local_dim() const { return local_.size(); }
  std::size_t other_count() const { return other_.size(); }
  std::size_t dimension() const { return dimension_; }
  const std::vector<std::size_t>& local_offsets() const { return local_; }
  const std::vector<std::size_t>& other_offsets() const { return other_; }

  /// psi <- (U on target factors) psi.
  void apply(const Eigen::MatrixXcd& U, Eigen::VectorXcd& psi) const {
    const auto L = static_cast<Eigen::Index>(local_.size());
    const auto O = static_cast<Eigen::Index>(other_.size());
    Eigen::MatrixXcd g(L, O);
    for (Eigen::Index o = 0; o < O; ++o) {
      for (Eigen::Index l = 0; l < L; ++l) g(l, o) = psi(static_cast<Eigen::Index>(other_[o] + local_[l]));
    }
    const Eigen::MatrixXcd r = U * g;
    for (Eigen::Index o = 0; o < O; ++o) {
      for (Eigen::Index l = 0; l < L; ++l) psi(static_cast<Eigen::Index>(other_[o] + local_[l])) = r(l, o);
    }
  }

  /// rho <- (U on target factors) rho, acting on the row index.
  void apply_rows(const Eigen::MatrixXcd& U, Eigen::MatrixXcd& rho) const {
    const auto L = static_cast<Eigen::Index>(local_.size());
    const auto O = static_cast<Eigen::Index>(other_.size());
    const Eigen::Index C = rho.cols();
    Eigen::MatrixXcd g(L, O * C);
    for (Eigen::Index c = 0; c < C; ++c) {
      const cplx* col = rho.col(c).data();
      for (Eigen::Index o = 0; o < O; ++o) {
        cplx* dst = g.col(c * O + o).data();
        const cplx* src = col + other_[o];
        for (Eigen::Index l = 0; l < L; ++l) dst[l] = src[local_[l]];
      }
    }
    const Eigen::MatrixXcd r = U * g;
    for (Eigen::Index c = 0; c < C; ++c) {
      cplx* col = rho.col(c).data();
      for (Eigen::Index o = 0; o < O; ++o) {
        const cplx* src = r.col(c * O + o).data();
        cplx* dst = col + other_[o];
        for (Eigen::Index l = 0; l < L; ++l) dst[local_[l]] = src[l];
      }
    }
  }

  /// rho <- U rho U^dag for Hermitian rho.
  void conjugate(const Eigen::MatrixXcd& U, Eigen::MatrixXcd& rho) const {
    apply_rows(U, rho);
    rho.adjointInPlace();
    apply_rows(U, rho);
  }

 private:
  std::vector<std::size_t> local_;
  std::vector<std::size_t> other_;
  std::size_t dimension_ = 1;
};

/// exp(-i H) for a small Hermitian matrix.
inline Eigen::MatrixXcd expm_hermitian(const Eigen::MatrixXcd& H, double t = 1.0) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H);
  const Eigen::VectorXcd ph = (es.eigenvalues().cast<cplx>() * cplx{0.0, -t}).array().exp();
  return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace lvcm::linalg
