// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Dense kernels behind the Kleene star: LU inversion, power-iteration
// spectral radius, and (I - W)^-1 with a nonnegativity certificate.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "wfsm/errors.hpp"

namespace wfsm {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using DenseMatrix = Matrix<double>;
using DenseVector = Vector<double>;

struct LinalgConfig {
  double pivot_tolerance = 1e-12;
  // kleene_star rejects estimates at or above 1 - divergence_margin.
  double divergence_margin = 1e-9;
  double power_tolerance = 1e-10;
  int power_max_iterations = 200;
};

inline constexpr LinalgConfig kDefaultLinalg{};

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x) {
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (!std::isfinite(static_cast<double>(x(i, j)))) return false;
    }
  }
  return true;
}

template <typename Scalar>
struct SpectralEstimate {
  Scalar value = Scalar(0);
  bool converged = false;
  int iterations = 0;
};

/// Inverse by LU with partial pivoting. Throws SingularMatrix when a pivot
/// magnitude drops below `config.pivot_tolerance`.
template <typename Derived>
Matrix<typename Derived::Scalar> invert(const Eigen::MatrixBase<Derived>& m,
                                        const LinalgConfig& config = kDefaultLinalg) {
  using Scalar = typename Derived::Scalar;
  if (m.rows() != m.cols()) {
    throw DimensionMismatch("invert expects a square matrix, got " +
                            std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
  if (m.rows() == 0) return Matrix<Scalar>(0, 0);
  const Eigen::PartialPivLU<Matrix<Scalar>> lu(m);
  const auto& packed = lu.matrixLU();
  for (Eigen::Index k = 0; k < packed.rows(); ++k) {
    using std::abs;
    if (!(abs(packed(k, k)) >= Scalar(config.pivot_tolerance))) {
      throw SingularMatrix("pivot " + std::to_string(k) + " has magnitude " +
                           std::to_string(static_cast<double>(abs(packed(k, k)))));
    }
  }
  return lu.inverse();
}

/// Power iteration from the normalized all-ones vector. The estimate is the
/// Rayleigh quotient v'Mv; convergence means two successive quotients differ
/// by less than `config.power_tolerance`. A vector mapped to zero means the
/// matrix is nilpotent along that direction and the radius is reported as 0.
template <typename Derived>
SpectralEstimate<typename Derived::Scalar> spectral_radius(
    const Eigen::MatrixBase<Derived>& m, const LinalgConfig& config = kDefaultLinalg) {
  using Scalar = typename Derived::Scalar;
  if (m.rows() != m.cols()) {
    throw DimensionMismatch("spectral_radius expects a square matrix");
  }
  SpectralEstimate<Scalar> est;
  const Eigen::Index n = m.rows();
  if (n == 0) {
    est.converged = true;
    return est;
  }
  Vector<Scalar> v = Vector<Scalar>::Constant(n, Scalar(1) / std::sqrt(Scalar(n)));
  Vector<Scalar> w(n);
  Scalar previous = std::numeric_limits<Scalar>::quiet_NaN();
  for (int it = 1; it <= config.power_max_iterations; ++it) {
    w.noalias() = m * v;
    const Scalar norm = w.norm();
    est.iterations = it;
    if (norm == Scalar(0)) {
      est.value = Scalar(0);
      est.converged = true;
      return est;
    }
    est.value = v.dot(w);
    using std::abs;
    if (abs(est.value - previous) < Scalar(config.power_tolerance)) {
      est.converged = true;
      return est;
    }
    previous = est.value;
    v = w / norm;
  }
  return est;
}

namespace detail {

// For nonnegative W, I - W is a nonsingular M-matrix iff rho(W) < 1, and then
// (I - W)^-1 is entrywise nonnegative. A negative entry beyond rounding
// therefore proves divergence even when power iteration was fooled.
template <typename Scalar>
Matrix<Scalar> certified_star(const Matrix<Scalar>& w, const LinalgConfig& config) {
  const Eigen::Index n = w.rows();
  Matrix<Scalar> star;
  try {
    star = invert(Matrix<Scalar>(Matrix<Scalar>::Identity(n, n) - w), config);
  } catch (const SingularMatrix& e) {
    throw DivergentMachine(std::string("I - W is singular (") + e.what() + ")");
  }
  if (!all_finite(star)) throw DivergentMachine("(I - W)^-1 is not finite");
  const Scalar scale = std::max(Scalar(1), star.cwiseAbs().maxCoeff());
  if (n > 0 && star.minCoeff() < -Scalar(1e-9) * scale) {
    throw DivergentMachine("(I - W)^-1 has negative entries; spectral radius >= 1");
  }
  return star;
}

}  // namespace detail

/// W* = sum_k W^k = (I - W)^-1 for nonnegative W with spectral radius < 1.
template <typename Derived>
Matrix<typename Derived::Scalar> kleene_star(const Eigen::MatrixBase<Derived>& w,
                                             const LinalgConfig& config = kDefaultLinalg) {
  using Scalar = typename Derived::Scalar;
  if (w.rows() != w.cols()) throw DimensionMismatch("kleene_star expects a square matrix");
  const auto rho = spectral_radius(w, config);
  if (!(rho.value < Scalar(1) - Scalar(config.divergence_margin))) {
    throw DivergentMachine("spectral radius estimate " +
                           std::to_string(static_cast<double>(rho.value)) + " >= 1 - " +
                           std::to_string(config.divergence_margin));
  }
  return detail::certified_star(Matrix<Scalar>(w), config);
}

/// Kleene star that skips power iteration and relies only on the
/// nonnegativity certificate of the inverse.
template <typename Derived>
Matrix<typename Derived::Scalar> kleene_star_certified(
    const Eigen::MatrixBase<Derived>& w, const LinalgConfig& config = kDefaultLinalg) {
  using Scalar = typename Derived::Scalar;
  if (w.rows() != w.cols()) throw DimensionMismatch("kleene_star expects a square matrix");
  return detail::certified_star(Matrix<Scalar>(w), config);
}

}  // namespace wfsm
