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
#include <Eigen/Sparse>
#include <cmath>
#include <complex>
#include <numeric>
#include <string>
#include <vector>

#include "lvcm/errors.hpp"

namespace lvcm {

using cplx = std::complex<double>;
using SparseC = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;

inline constexpr std::size_t kDefaultMaxDimension = std::size_t{1} << 20;

/// Product space  electronic(levels) x qubit^qubit_count x Fock(d_0) x ... x Fock(d_{N-1}).
/// The electronic factor holds M molecular states directly for the exact solver and
/// is trivial (one level) on the trapped-ion side. The first factor is the most
/// significant digit of the flat index.
class SpaceLayout {
 public:
  SpaceLayout() : SpaceLayout(0, {}) {}

  SpaceLayout(std::size_t qubits, std::vector<std::size_t> cutoffs, std::size_t levels = 1,
              std::size_t max_dimension = kDefaultMaxDimension)
      : qubits_(qubits), cutoffs_(std::move(cutoffs)), levels_(levels) {
    if (levels_ < 1) throw LayoutMismatch("electronic factor needs at least one level");
    dims_.push_back(levels_);
    for (std::size_t q = 0; q < qubits_; ++q) dims_.push_back(2);
    for (std::size_t d : cutoffs_) {
      if (d < 2) throw LayoutMismatch("Fock cutoffs must be at least 2");
      dims_.push_back(d);
    }
    strides_.assign(dims_.size(), 1);
    dim_ = 1;
    for (std::size_t f = dims_.size(); f-- > 0;) {
      strides_[f] = dim_;
      if (dim_ > max_dimension / dims_[f]) {
        throw DimensionLimitExceeded("layout dimension exceeds the configured limit of " + std::to_string(max_dimension));
      }
      dim_ *= dims_[f];
    }
  }

  std::size_t qubit_count() const { return qubits_; }
  std::size_t mode_count() const { return cutoffs_.size(); }
  std::size_t levels() const { return levels_; }
  const std::vector<std::size_t>& mode_cutoffs() const { return cutoffs_; }
  std::size_t cutoff(std::size_t k) const { return cutoffs_.at(k); }
  std::size_t dimension() const { return dim_; }

  std::size_t factor_count() const { return dims_.size(); }
  const std::vector<std::size_t>& factor_dims() const { return dims_; }
  std::size_t factor_dim(std::size_t f) const { return dims_.at(f); }
  std::size_t stride(std::size_t f) const { return strides_.at(f); }
  std::size_t digit(std::size_t index, std::size_t f) const { return (index / strides_[f]) % dims_[f]; }

  static constexpr std::size_t electronic_factor() { return 0; }
  std::size_t qubit_factor(std::size_t q) const {
    if (q >= qubits_) throw IndexOutOfRange("qubit index " + std::to_string(q) + " out of range");
    return 1 + q;
  }
  std::size_t mode_factor(std::size_t k) const {
    if (k >= cutoffs_.size()) throw IndexOutOfRange("mode index " + std::to_string(k) + " out of range");
    return 1 + qubits_ + k;
  }

  friend bool operator==(const SpaceLayout& a, const SpaceLayout& b) {
    return a.qubits_ == b.qubits_ && a.cutoffs_ == b.cutoffs_ && a.levels_ == b.levels_;
  }
  friend bool operator!=(const SpaceLayout& a, const SpaceLayout& b) { return !(a == b); }

 private:
  std::size_t qubits_ = 0;
  std::vector<std::size_t> cutoffs_;
  std::size_t levels_ = 1;
  std::vector<std::size_t> dims_;
  std::vector<std::size_t> strides_;
  std::size_t dim_ = 1;
};

/// Operator on a SpaceLayout, stored sparse (row-major). `dense()` converts for
/// small exponentials and tests.
class FockOperator {
 public:
  FockOperator() = default;
  FockOperator(SpaceLayout layout, SparseC m) : layout_(std::move(layout)), m_(std::move(m)) {
    if (m_.rows() != static_cast<Eigen::Index>(layout_.dimension()) || m_.cols() != m_.rows())
      throw LayoutMismatch("operator dimension does not match layout");
  }

  static FockOperator zero(const SpaceLayout& layout) {
    const auto n = static_cast<Eigen::Index>(layout.dimension());
    return {layout, SparseC(n, n)};
  }

  static FockOperator identity(const SpaceLayout& layout) {
    const auto n = static_cast<Eigen::Index>(layout.dimension());
    SparseC m(n, n);
    m.setIdentity();
    return {layout, std::move(m)};
  }

  /// I (x) ... (x) local (x) ... (x) I with `local` acting on factor f.
  static FockOperator embed(const SpaceLayout& layout, std::size_t f, const Eigen::MatrixXcd& local) {
    const std::size_t d = layout.factor_dim(f);
    if (static_cast<std::size_t>(local.rows()) != d || static_cast<std::size_t>(local.cols()) != d)
      throw LayoutMismatch("local operator does not match factor dimension");
    const std::size_t right = layout.stride(f);
    const std::size_t left = layout.dimension() / (right * d);
    std::vector<Eigen::Triplet<cplx>> trip;
    for (Eigen::Index a = 0; a < local.rows(); ++a) {
      for (Eigen::Index b = 0; b < local.cols(); ++b) {
        const cplx v = local(a, b);
        if (v == cplx{}) continue;
        for (std::size_t l = 0; l < left; ++l) {
          const std::size_t row0 = (l * d + static_cast<std::size_t>(a)) * right;
          const std::size_t col0 = (l * d + static_cast<std::size_t>(b)) * right;
          for (std::size_t r = 0; r < right; ++r) {
            trip.emplace_back(static_cast<Eigen::Index>(row0 + r), static_cast<Eigen::Index>(col0 + r), v);
          }
        }
      }
    }
    const auto n = static_cast<Eigen::Index>(layout.dimension());
    SparseC m(n, n);
    m.setFromTriplets(trip.begin(), trip.end());
    return {layout, std::move(m)};
  }

  const SpaceLayout& layout() const { return layout_; }
  const SparseC& sparse() const { return m_; }
  Eigen::MatrixXcd dense() const { return Eigen::MatrixXcd(m_); }
  std::size_t dimension() const { return layout_.dimension(); }

  FockOperator adjoint() const { return {layout_, SparseC(m_.adjoint())}; }

  bool is_hermitian(double tol = 1e-12) const {
    const SparseC diff = m_ - SparseC(m_.adjoint());
    double worst = 0.0;
    for (Eigen::Index k = 0; k < diff.outerSize(); ++k) {
      for (SparseC::InnerIterator it(diff, k); it; ++it) worst = std::max(worst, std::abs(it.value()));
    }
    return worst <= tol;
  }

  FockOperator& operator+=(const FockOperator& o) {
    check(o);
    m_ += o.m_;
    return *this;
  }
  FockOperator& operator-=(const FockOperator& o) {
    check(o);
    m_ -= o.m_;
    return *this;
  }
  FockOperator& operator*=(cplx s) {
    m_ *= s;
    return *this;
  }

  friend FockOperator operator+(FockOperator a, const FockOperator& b) { return a += b; }
  friend FockOperator operator-(FockOperator a, const FockOperator& b) { return a -= b; }
  friend FockOperator operator*(cplx s, FockOperator a) { return a *= s; }
  friend FockOperator operator*(FockOperator a, cplx s) { return a *= s; }
  friend FockOperator operator*(const FockOperator& a, const FockOperator& b) {
    a.check(b);
    return {a.layout_, SparseC(a.m_ * b.m_)};
  }

 private:
  void check(const FockOperator& o) const {
    if (layout_ != o.layout_) throw LayoutMismatch("operators live on different layouts");
  }

  SpaceLayout layout_;
  SparseC m_;
};

/// Truncated single-mode annihilation operator: <n-1|a|n> = sqrt(n).
inline Eigen::MatrixXcd annihilation_matrix(std::size_t d) {
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t n = 1; n < d; ++n) a(static_cast<Eigen::Index>(n - 1), static_cast<Eigen::Index>(n)) = std::sqrt(static_cast<double>(n));
  return a;
}

inline FockOperator annihilation(const SpaceLayout& layout, std::size_t k) {
  const std::size_t f = layout.mode_factor(k);
  return FockOperator::embed(layout, f, annihilation_matrix(layout.factor_dim(f)));
}

inline FockOperator creation(const SpaceLayout& layout, std::size_t k) { return annihilation(layout, k).adjoint(); }

inline FockOperator number(const SpaceLayout& layout, std::size_t k) {
  const std::size_t f = layout.mode_factor(k);
  Eigen::MatrixXcd n = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(layout.factor_dim(f)), static_cast<Eigen::Index>(layout.factor_dim(f)));
  for (Eigen::Index i = 0; i < n.rows(); ++i) n(i, i) = static_cast<double>(i);
  return FockOperator::embed(layout, f, n);
}

enum class PauliAxis { X, Y, Z, plus, minus };

/// Qubit conventions: Z|0> = |0>, sigma+ = |0><1| = (X + iY)/2, sigma- = |1><0|.
inline Eigen::Matrix2cd pauli_matrix(PauliAxis axis) {
  const cplx i{0.0, 1.0};
  Eigen::Matrix2cd m;
  switch (axis) {
    case PauliAxis::X: m << 0, 1, 1, 0; break;
    case PauliAxis::Y: m << 0, -i, i, 0; break;
    case PauliAxis::Z: m << 1, 0, 0, -1; break;
    case PauliAxis::plus: m << 0, 1, 0, 0; break;
    case PauliAxis::minus: m << 0, 0, 1, 0; break;
  }
  return m;
}

/// sigma^phi = sigma+ e^{i phi} + sigma- e^{-i phi} = X cos(phi) - Y sin(phi).
inline Eigen::Matrix2cd sigma_phi_matrix(double phi) {
  return std::cos(phi) * pauli_matrix(PauliAxis::X) - std::sin(phi) * pauli_matrix(PauliAxis::Y);
}

/// n . sigma for a real 3-vector n.
inline Eigen::Matrix2cd pauli_vector_matrix(const Eigen::Vector3d& n) {
  return n.x() * pauli_matrix(PauliAxis::X) + n.y() * pauli_matrix(PauliAxis::Y) + n.z() * pauli_matrix(PauliAxis::Z);
}

inline FockOperator pauli(const SpaceLayout& layout, std::size_t q, PauliAxis axis) {
  return FockOperator::embed(layout, layout.qubit_factor(q), pauli_matrix(axis));
}

inline FockOperator sigma_phi(const SpaceLayout& layout, std::size_t q, double phi) {
  return FockOperator::embed(layout, layout.qubit_factor(q), sigma_phi_matrix(phi));
}

/// |i><j| on the electronic factor.
inline FockOperator electronic_operator(const SpaceLayout& layout, std::size_t i, std::size_t j) {
  const std::size_t m = layout.levels();
  if (i >= m || j >= m) throw IndexOutOfRange("electronic index out of range");
  Eigen::MatrixXcd local = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  local(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1.0;
  return FockOperator::embed(layout, SpaceLayout::electronic_factor(), local);
}

enum class StateKind { vector, density };

/// Pure state vector or density matrix on a layout.
class QuantumState {
 public:
  QuantumState() = default;

  static QuantumState from_vector(SpaceLayout layout, Eigen::VectorXcd psi) {
    if (static_cast<std::size_t>(psi.size()) != layout.dimension()) throw LayoutMismatch("vector size does not match layout");
    QuantumState s;
    s.layout_ = std::move(layout);
    s.kind_ = StateKind::vector;
    s.psi_ = std::move(psi);
    return s;
  }

  static QuantumState from_density(SpaceLayout layout, Eigen::MatrixXcd rho) {
    if (static_cast<std::size_t>(rho.rows()) != layout.dimension() || rho.cols() != rho.rows())
      throw LayoutMismatch("density matrix size does not match layout");
    QuantumState s;
    s.layout_ = std::move(layout);
    s.kind_ = StateKind::density;
    s.rho_ = std::move(rho);
    return s;
  }

  /// Product basis state; `digits` lists one value per factor (electronic, qubits, modes).
  static QuantumState basis(const SpaceLayout& layout, const std::vector<std::size_t>& digits) {
    return from_vector(layout, basis_vector(layout, digits));
  }

  static std::size_t flat_index(const SpaceLayout& layout, const std::vector<std::size_t>& digits) {
    if (digits.size() != layout.factor_count()) throw LayoutMismatch("digit count does not match factor count");
    std::size_t index = 0;
    for (std::size_t f = 0; f < digits.size(); ++f) {
      if (digits[f] >= layout.factor_dim(f)) throw IndexOutOfRange("basis digit out of range");
      index += digits[f] * layout.stride(f);
    }
    return index;
  }

  static Eigen::VectorXcd basis_vector(const SpaceLayout& layout, const std::vector<std::size_t>& digits) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(layout.dimension()));
    v(static_cast<Eigen::Index>(flat_index(layout, digits))) = 1.0;
    return v;
  }

  const SpaceLayout& layout() const { return layout_; }
  StateKind kind() const { return kind_; }
  const Eigen::VectorXcd& vector() const { return psi_; }
  const Eigen::MatrixXcd& density() const { return rho_; }
  Eigen::VectorXcd& vector() { return psi_; }
  Eigen::MatrixXcd& density() { return rho_; }

  Eigen::MatrixXcd to_density_matrix() const { return kind_ == StateKind::density ? rho_ : Eigen::MatrixXcd(psi_ * psi_.adjoint()); }

  /// Probability of each basis index.
  Eigen::VectorXd diagonal() const {
    if (kind_ == StateKind::vector) return psi_.cwiseAbs2();
    return rho_.diagonal().real();
  }

  /// Checks the state invariants; throws NumericalFailure with a description on violation.
  void validate(double norm_tol = 1e-9, double eig_tol = 1e-8) const {
    if (kind_ == StateKind::vector) {
      if (std::abs(psi_.norm() - 1.0) > norm_tol) throw NumericalFailure("state vector is not normalized");
      return;
    }
    const double herm = (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff();
    if (herm > norm_tol) throw NumericalFailure("density matrix is not Hermitian");
    if (std::abs(rho_.trace().real() - 1.0) > norm_tol) throw NumericalFailure("density matrix trace deviates from 1");
    if (!positive(eig_tol)) throw NumericalFailure("density matrix has a negative eigenvalue");
  }

  /// Cholesky certificate that rho + eig_tol * I is positive definite.
  bool positive(double eig_tol = 1e-8) const {
    if (kind_ == StateKind::vector) return true;
    Eigen::MatrixXcd shifted = rho_;
    shifted.diagonal().array() += eig_tol;
    Eigen::LLT<Eigen::MatrixXcd> llt(shifted);
    return llt.info() == Eigen::Success;
  }

 private:
  SpaceLayout layout_;
  StateKind kind_ = StateKind::vector;
  Eigen::VectorXcd psi_;
  Eigen::MatrixXcd rho_;
};

/// Geometric occupations p_n ~ (nbar/(1+nbar))^n renormalized over d levels.
inline std::vector<double> thermal_occupations(std::size_t d, double nbar) {
  if (nbar < 0.0) throw Error("mean occupation must be non-negative");
  std::vector<double> p(d, 0.0);
  if (nbar == 0.0) {
    p[0] = 1.0;
    return p;
  }
  const double r = nbar / (1.0 + nbar);
  double w = 1.0, sum = 0.0;
  for (std::size_t n = 0; n < d; ++n) {
    p[n] = w;
    sum += w;
    w *= r;
  }
  for (double& x : p) x /= sum;
  return p;
}

/// Density matrix with mode k thermal and every other factor in its |0> level.
inline QuantumState thermal_mode_state(const SpaceLayout& layout, std::size_t k, double nbar) {
  const std::size_t f = layout.mode_factor(k);
  const auto p = thermal_occupations(layout.factor_dim(f), nbar);
  const auto n = static_cast<Eigen::Index>(layout.dimension());
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(n, n);
  for (std::size_t level = 0; level < p.size(); ++level) {
    const auto i = static_cast<Eigen::Index>(level * layout.stride(f));
    rho(i, i) = p[level];
  }
  return QuantumState::from_density(layout, std::move(rho));
}

inline cplx expectation(const QuantumState& state, const FockOperator& op) {
  if (state.layout() != op.layout()) throw LayoutMismatch("state and operator live on different layouts");
  if (state.kind() == StateKind::vector) return state.vector().dot(op.sparse() * state.vector());
  const Eigen::MatrixXcd prod = op.sparse() * state.density();
  return prod.trace();
}

/// Marginal probabilities of factor f.
inline std::vector<double> factor_populations(const SpaceLayout& layout, const Eigen::VectorXd& diag, std::size_t f) {
  std::vector<double> p(layout.factor_dim(f), 0.0);
  for (std::size_t i = 0; i < layout.dimension(); ++i) p[layout.digit(i, f)] += diag(static_cast<Eigen::Index>(i));
  return p;
}

inline std::vector<double> factor_populations(const QuantumState& state, std::size_t f) {
  return factor_populations(state.layout(), state.diagonal(), f);
}

/// Population of the highest retained Fock level, per mode.
inline std::vector<double> leakage(const QuantumState& state) {
  const auto diag = state.diagonal();
  std::vector<double> out;
  for (std::size_t k = 0; k < state.layout().mode_count(); ++k) {
    const std::size_t f = state.layout().mode_factor(k);
    out.push_back(factor_populations(state.layout(), diag, f).back());
  }
  return out;
}

}  // namespace lvcm
