//
// Copyright 2026 The Aniso Authors
//
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

// Dense symmetric and symmetric positive-definite matrices.
//
// Every matrix function here goes through a symmetric eigendecomposition
// (Q f(L) Q^T), so exponentials, square roots and eigenvalue clamps share a
// single code path. Diagonal inputs skip the decomposition.

#ifndef ANISO_MATRIX_HPP_
#define ANISO_MATRIX_HPP_

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>

#include "aniso/errors.hpp"

namespace aniso {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

// Relative tolerance for the symmetry check on construction.
inline constexpr double kSymmetryTolerance = 1e-12;
// Cholesky pivots at or below this value reject the input.
inline constexpr double kMinPivot = 1e-14;

namespace internal {

inline void require_square(const Matrix& m, const std::string& op) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw DimensionMismatch(op, "expected a non-empty square matrix, got " +
                                    std::to_string(m.rows()) + "x" +
                                    std::to_string(m.cols()));
  }
}

// Checks |m_ij - m_ji| <= tol * max(1, |m_ij|) and returns (m + m^T) / 2.
inline Matrix checked_symmetrize(const Matrix& m, const std::string& op) {
  require_square(m, op);
  if (!m.allFinite()) throw InvalidArgument(op, "matrix has non-finite entries");
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = i + 1; j < m.cols(); ++j) {
      const double scale = std::max(1.0, std::abs(m(i, j)));
      if (std::abs(m(i, j) - m(j, i)) > kSymmetryTolerance * scale) {
        throw NotSymmetric(op, "entries (" + std::to_string(i) + "," +
                                   std::to_string(j) + ") differ");
      }
    }
  }
  return 0.5 * (m + m.transpose());
}

inline bool is_diagonal(const Matrix& m) {
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) {
      if (i != j && m(i, j) != 0.0) return false;
    }
  }
  return true;
}

// Plain Cholesky-Banachiewicz; nullopt when a pivot is <= kMinPivot.
inline std::optional<Matrix> try_cholesky(const Matrix& m) {
  const Index n = m.rows();
  Matrix lower = Matrix::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    double pivot = m(j, j);
    for (Index k = 0; k < j; ++k) pivot -= lower(j, k) * lower(j, k);
    if (!(pivot > kMinPivot)) return std::nullopt;
    const double diag = std::sqrt(pivot);
    lower(j, j) = diag;
    for (Index i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (Index k = 0; k < j; ++k) s -= lower(i, k) * lower(j, k);
      lower(i, j) = s / diag;
    }
  }
  return lower;
}

}  // namespace internal

// Symmetric matrix without a definiteness requirement.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(const Matrix& m)
      : m_(internal::checked_symmetrize(m, "SymMatrix")) {}

  static SymMatrix zeros(Index n) { return SymMatrix(Matrix::Zero(n, n)); }
  static SymMatrix identity(Index n) {
    return SymMatrix(Matrix::Identity(n, n));
  }
  static SymMatrix diagonal(const Vector& d) {
    return SymMatrix(Matrix(d.asDiagonal()));
  }

  Index dim() const { return m_.rows(); }
  const Matrix& matrix() const { return m_; }
  double operator()(Index i, Index j) const { return m_(i, j); }

 private:
  Matrix m_;
};

// Symmetric positive-definite matrix carrying its lower Cholesky factor.
//
// A matrix built with psd_relaxed() may be only semidefinite (for example the
// zero covariance of a deterministic initial state); lower() throws for such
// a matrix when no factor exists.
class SpdMatrix {
 public:
  SpdMatrix() = default;
  explicit SpdMatrix(const Matrix& m) : SpdMatrix(m, /*relaxed=*/false) {}
  explicit SpdMatrix(const SymMatrix& m) : SpdMatrix(m.matrix(), false) {}

  static SpdMatrix psd_relaxed(const Matrix& m) { return SpdMatrix(m, true); }
  static SpdMatrix identity(Index n) {
    return SpdMatrix(Matrix::Identity(n, n));
  }
  static SpdMatrix diagonal(const Vector& d) {
    return SpdMatrix(Matrix(d.asDiagonal()));
  }

  Index dim() const { return m_.rows(); }
  const Matrix& matrix() const { return m_; }
  double operator()(Index i, Index j) const { return m_(i, j); }
  SymMatrix sym() const { return SymMatrix(m_); }

  bool is_positive_definite() const { return lower_.has_value(); }

  const Matrix& lower() const {
    if (!lower_) {
      throw NotPositiveDefinite("cholesky", "matrix is only semidefinite");
    }
    return *lower_;
  }

 private:
  SpdMatrix(const Matrix& m, bool relaxed)
      : m_(internal::checked_symmetrize(m, "SpdMatrix")),
        lower_(internal::try_cholesky(m_)) {
    if (lower_) return;
    if (!relaxed) {
      throw NotPositiveDefinite("cholesky", "non-positive pivot encountered");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(m_, Eigen::EigenvaluesOnly);
    const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
    if (eig.eigenvalues().minCoeff() < -1e-12 * scale) {
      throw NotPositiveDefinite("SpdMatrix",
                                "matrix has a negative eigenvalue");
    }
  }

  Matrix m_;
  std::optional<Matrix> lower_;
};

struct SymEigen {
  Vector values;   // ascending
  Matrix vectors;  // columns are orthonormal eigenvectors
};

inline SymEigen sym_eigen(const SymMatrix& m) {
  if (internal::is_diagonal(m.matrix())) {
    return {m.matrix().diagonal(), Matrix::Identity(m.dim(), m.dim())};
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m.matrix());
  return {eig.eigenvalues(), eig.eigenvectors()};
}

// Q f(L) Q^T for a precomputed decomposition.
inline Matrix apply_spectral(const SymEigen& eig,
                             const std::function<double(double)>& f) {
  Vector fv = eig.values.unaryExpr(f);
  Matrix out = eig.vectors * fv.asDiagonal() * eig.vectors.transpose();
  return 0.5 * (out + out.transpose());
}

inline SymMatrix sym_function(const SymMatrix& m,
                              const std::function<double(double)>& f) {
  return SymMatrix(apply_spectral(sym_eigen(m), f));
}

// e^{scale * m}.
inline SymMatrix sym_exp(const SymMatrix& m, double scale) {
  return sym_function(m, [scale](double v) { return std::exp(scale * v); });
}

inline const Matrix& cholesky(const SpdMatrix& m) { return m.lower(); }

inline Vector solve(const SpdMatrix& m, const Vector& rhs) {
  if (rhs.size() != m.dim()) {
    throw DimensionMismatch("solve", "right-hand side has wrong length");
  }
  const Matrix& lower = m.lower();
  Vector y = lower.triangularView<Eigen::Lower>().solve(rhs);
  return lower.transpose().triangularView<Eigen::Upper>().solve(y);
}

// v^T m^{-1} v, i.e. ||L^{-1} v||^2 for m = L L^T.
inline double inverse_quadratic_form(const SpdMatrix& m, const Vector& v) {
  if (v.size() != m.dim()) {
    throw DimensionMismatch("inverse_quadratic_form", "vector has wrong length");
  }
  Vector y = m.lower().triangularView<Eigen::Lower>().solve(v);
  return y.squaredNorm();
}

inline SpdMatrix inverse(const SpdMatrix& m) {
  const Matrix& lower = m.lower();
  const Index n = m.dim();
  Matrix linv = lower.triangularView<Eigen::Lower>().solve(Matrix::Identity(n, n));
  return SpdMatrix(Matrix(linv.transpose() * linv));
}

inline double log_det(const SpdMatrix& m) {
  return 2.0 * m.lower().diagonal().array().log().sum();
}

inline double trace(const SymMatrix& m) { return m.matrix().trace(); }
inline double trace(const SpdMatrix& m) { return m.matrix().trace(); }

// Largest absolute eigenvalue.
inline double spectral_norm(const SymMatrix& m) {
  return sym_eigen(m).values.cwiseAbs().maxCoeff();
}

// Symmetric square root via eigenvalues clamped at zero.
inline Matrix psd_sqrt(const SymMatrix& m) {
  return apply_spectral(sym_eigen(m),
                        [](double v) { return std::sqrt(std::max(v, 0.0)); });
}

}  // namespace aniso

#endif  // ANISO_MATRIX_HPP_
