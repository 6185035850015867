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
#include <array>
#include <cmath>
#include <complex>
#include <numbers>

#include "lvcm/hilbert.hpp"

// Single-qubit SU(2) helpers shared by the pulse compiler and the emulator.
// Physical in-plane axis for phase phi is (cos phi, -sin phi, 0), so that
// sigma^phi = X cos phi - Y sin phi.

namespace lvcm::spin {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using SU2 = Eigen::Matrix2cd;

/// exp(-i angle/2 n.sigma): right-handed Bloch rotation by `angle` about unit axis n.
inline SU2 rotation(const Vec3& n, double angle) {
  const double c = std::cos(0.5 * angle), s = std::sin(0.5 * angle);
  return c * SU2::Identity() - cplx{0.0, s} * pauli_vector_matrix(n);
}

/// Bloch rotation R with G (n.sigma) G^dag = (R n).sigma.
inline Mat3 bloch_rotation(const SU2& g) {
  Mat3 r;
  const std::array<PauliAxis, 3> ax{PauliAxis::X, PauliAxis::Y, PauliAxis::Z};
  for (int b = 0; b < 3; ++b) {
    const SU2 m = g * pauli_matrix(ax[static_cast<std::size_t>(b)]) * g.adjoint();
    for (int a = 0; a < 3; ++a) r(a, b) = 0.5 * (pauli_matrix(ax[static_cast<std::size_t>(a)]) * m).trace().real();
  }
  return r;
}

/// Quaternion (w, x, y, z) with G = w I - i (x X + y Y + z Z); G assumed in SU(2).
inline std::array<double, 4> quaternion(const SU2& g) {
  return {0.5 * (g(0, 0) + g(1, 1)).real(), -0.5 * (g(0, 1) + g(1, 0)).imag(), 0.5 * (g(1, 0) - g(0, 1)).real(),
          0.5 * (g(1, 1).imag() - g(0, 0).imag())};
}

inline double axis_phase(const Vec3& m) { return std::atan2(-m.y(), m.x()); }
inline Vec3 phase_axis(double phi) { return {std::cos(phi), -std::sin(phi), 0.0}; }

/// exp(-i (alpha/2) sigma^phi).
inline SU2 carrier_matrix(double alpha, double phi) { return rotation(phase_axis(phi), alpha); }

/// Unit vector orthogonal to v (deterministic choice).
inline Vec3 orthogonal(const Vec3& v) {
  const Vec3 t = std::abs(v.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  return v.cross(t).normalized();
}

/// Rotation (axis, angle) that takes unit vector `from` onto unit vector `to`.
struct AxisAngle {
  Vec3 axis = Vec3::UnitX();
  double angle = 0.0;
};

inline AxisAngle align(const Vec3& from, const Vec3& to) {
  const Vec3 c = from.cross(to);
  const double s = c.norm();
  const double d = std::clamp(from.dot(to), -1.0, 1.0);
  if (s < 1e-14) {
    if (d > 0) return {Vec3::UnitX(), 0.0};
    return {orthogonal(from), std::numbers::pi};
  }
  return {c / s, std::atan2(s, d)};
}

}  // namespace lvcm::spin
