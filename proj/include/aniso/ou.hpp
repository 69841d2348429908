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

// Exact Gaussian laws for linear-drift (Ornstein-Uhlenbeck) dynamics
//
//   dx_t = -B^T (B x_t - b) dt + Sigma^{1/2} dW_t,
//
// which arise from noisy gradient flow on a least-squares objective. Write
// A = B^T B. All matrix functions of A go through one eigendecomposition
// A = Q diag(lambda) Q^T; in that basis the covariance integrand
// e^{-A s} Sigma e^{-A s} is (Q^T Sigma Q)_ij e^{-(lambda_i + lambda_j) s}.

#ifndef ANISO_OU_HPP_
#define ANISO_OU_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "aniso/errors.hpp"
#include "aniso/matrix.hpp"
#include "aniso/quadrature.hpp"

namespace aniso {

inline constexpr double kInfiniteTime = std::numeric_limits<double>::infinity();
// Relative target for every quadrature in this module.
inline constexpr double kOuQuadratureTolerance = 1e-8;

struct QuadraticProblem {
  Matrix B;      // m x d
  Vector b;      // m
  SpdMatrix sigma;  // d x d diffusion covariance
  Vector x0;     // deterministic initial condition
  std::optional<SpdMatrix> v0;  // initial covariance; zero when absent

  Index dim() const { return B.cols(); }
  SymMatrix btb() const { return SymMatrix(Matrix(B.transpose() * B)); }

  void validate() const {
    const std::string op = "QuadraticProblem";
    if (B.rows() == 0 || B.cols() == 0) throw InvalidArgument(op, "B is empty");
    if (b.size() != B.rows()) throw DimensionMismatch(op, "b must have B.rows() entries");
    if (sigma.dim() != dim()) throw DimensionMismatch(op, "sigma must be d x d");
    if (x0.size() != dim()) throw DimensionMismatch(op, "x0 must have d entries");
    if (v0 && v0->dim() != dim()) throw DimensionMismatch(op, "v0 must be d x d");
    if (sym_eigen(btb()).values.minCoeff() <= 1e-12) {
      throw InvalidArgument(op, "B^T B must be invertible (min eigenvalue > 1e-12)");
    }
  }
};

struct GaussianState {
  Vector mean;
  SpdMatrix cov;  // may be semidefinite at time 0
  double time = 0.0;
};

enum class CovarianceForm {
  kAuto,        // closed form when the reversibility condition holds
  kClosedForm,  // closed form; NonCommuting otherwise
  kQuadrature,  // always integrate (Lyapunov eigenbasis at t = infinity)
};

// A Sigma == Sigma A up to 1e-10 ||A||_F ||Sigma||_F.
inline bool check_reversibility(const SpdMatrix& btb, const SpdMatrix& sigma) {
  if (btb.dim() != sigma.dim()) {
    throw DimensionMismatch("check_reversibility", "matrices differ in size");
  }
  const Matrix& a = btb.matrix();
  const Matrix& s = sigma.matrix();
  const double commutator = (a * s - s * a).norm();
  return commutator <= 1e-10 * a.norm() * s.norm();
}

namespace internal {

struct OuBasis {
  SymEigen eig;    // of A
  Matrix sigma_rot;  // Q^T Sigma Q
  Vector m_inf;    // A^{-1} B^T b
  bool reversible;
};

inline OuBasis ou_basis(const QuadraticProblem& p) {
  p.validate();
  OuBasis basis;
  const SymMatrix a = p.btb();
  basis.eig = sym_eigen(a);
  const Matrix& q = basis.eig.vectors;
  basis.sigma_rot = q.transpose() * p.sigma.matrix() * q;
  const Vector rhs = p.B.transpose() * p.b;
  basis.m_inf = q * (q.transpose() * rhs).cwiseQuotient(basis.eig.values);
  basis.reversible = check_reversibility(SpdMatrix(a), p.sigma);
  return basis;
}

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

// Q (S_ij * w(lambda_i, lambda_j)) Q^T.
template <typename Weight>
Matrix rotate_weighted(const OuBasis& basis, Weight&& w) {
  const Vector& lam = basis.eig.values;
  const Index d = lam.size();
  Matrix inner(d, d);
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) {
      inner(i, j) = basis.sigma_rot(i, j) * w(lam(i), lam(j));
    }
  }
  const Matrix& q = basis.eig.vectors;
  return symmetrize(q * inner * q.transpose());
}

// int_0^t e^{-A s} Sigma e^{-A s} ds by composite Simpson in the A eigenbasis.
inline Matrix covariance_quadrature(const OuBasis& basis, double t) {
  const Vector& lam = basis.eig.values;
  const Index d = lam.size();
  auto integrand = [&](double s) {
    Matrix out(d, d);
    for (Index i = 0; i < d; ++i) {
      for (Index j = 0; j < d; ++j) {
        out(i, j) = basis.sigma_rot(i, j) * std::exp(-(lam(i) + lam(j)) * s);
      }
    }
    return out;
  };
  const double tau = 1.0 / (2.0 * lam.maxCoeff());
  const Matrix inner = simpson_segments(integrand, geometric_breakpoints(t, tau),
                                        kOuQuadratureTolerance);
  const Matrix& q = basis.eig.vectors;
  return symmetrize(q * inner * q.transpose());
}

}  // namespace internal

// Law of x_t given the deterministic start x0 (plus optional V0).
inline GaussianState exact_state(const QuadraticProblem& p, double t,
                                 CovarianceForm form = CovarianceForm::kAuto) {
  if (!(t >= 0.0) || !std::isfinite(t)) {
    throw InvalidArgument("exact_state", "t must be finite and nonnegative");
  }
  const internal::OuBasis basis = internal::ou_basis(p);
  if (form == CovarianceForm::kClosedForm && !basis.reversible) {
    throw NonCommuting("exact_state",
                       "B^T B and Sigma do not commute; closed form unavailable");
  }
  const Matrix e = apply_spectral(basis.eig, [t](double l) { return std::exp(-l * t); });
  Vector mean = basis.m_inf + e * (p.x0 - basis.m_inf);

  const Index d = p.dim();
  Matrix cov = Matrix::Zero(d, d);
  if (t > 0.0) {
    if (basis.reversible && form != CovarianceForm::kQuadrature) {
      const Matrix weight = apply_spectral(basis.eig, [t](double l) {
        return -std::expm1(-2.0 * l * t) / (2.0 * l);
      });
      cov = internal::symmetrize(weight * p.sigma.matrix());
    } else {
      cov = internal::covariance_quadrature(basis, t);
    }
  }
  if (p.v0) cov += internal::symmetrize(e * p.v0->matrix() * e);
  return {std::move(mean), SpdMatrix::psd_relaxed(cov), t};
}

// Unique invariant law N(m_inf, V_inf). V_inf solves A V + V A = Sigma.
inline GaussianState invariant_state(const QuadraticProblem& p,
                                     CovarianceForm form = CovarianceForm::kAuto) {
  const internal::OuBasis basis = internal::ou_basis(p);
  if (form == CovarianceForm::kClosedForm && !basis.reversible) {
    throw NonCommuting("invariant_state",
                       "B^T B and Sigma do not commute; closed form unavailable");
  }
  Matrix cov;
  if (basis.reversible && form != CovarianceForm::kQuadrature) {
    const Matrix half_inv =
        apply_spectral(basis.eig, [](double l) { return 0.5 / l; });
    cov = internal::symmetrize(half_inv * p.sigma.matrix());
  } else {
    cov = internal::rotate_weighted(basis,
                                    [](double li, double lj) { return 1.0 / (li + lj); });
  }
  return {basis.m_inf, SpdMatrix(cov), kInfiniteTime};
}

// KL(p || q) between two Gaussian laws. Identical laws give exactly 0, even
// when degenerate.
inline double gaussian_kl(const GaussianState& p, const GaussianState& q) {
  if (p.mean.size() != q.mean.size() || p.cov.dim() != q.cov.dim() ||
      p.cov.dim() != p.mean.size()) {
    throw DimensionMismatch("gaussian_kl", "states differ in dimension");
  }
  if (p.mean == q.mean && p.cov.matrix() == q.cov.matrix()) return 0.0;
  if (!p.cov.is_positive_definite() || !q.cov.is_positive_definite()) {
    throw NotPositiveDefinite("gaussian_kl", "covariance is not strictly positive definite");
  }
  const auto d = static_cast<double>(p.mean.size());
  const Matrix& lq = q.cov.lower();
  const Matrix whitened = lq.triangularView<Eigen::Lower>().solve(p.cov.lower());
  const double trace_term = whitened.squaredNorm();  // Tr(Sq^{-1} Sp)
  const double mahalanobis = inverse_quadratic_form(q.cov, q.mean - p.mean);
  const double kl = 0.5 * (log_det(q.cov) - log_det(p.cov)) - 0.5 * d +
                    0.5 * trace_term + 0.5 * mahalanobis;
  return std::max(kl, 0.0);
}

// E||x_t - x*||^2 from the noise alone:
// int_0^t ||e^{A(u-t)} Sigma^{1/2}||_F^2 du, or (1/2) Tr(A^{-1} Sigma) at
// t = infinity.
inline double error_to_opt(const QuadraticProblem& p, double t) {
  if (!(t >= 0.0)) throw InvalidArgument("error_to_opt", "t must be nonnegative");
  const internal::OuBasis basis = internal::ou_basis(p);
  const Vector& lam = basis.eig.values;
  const Vector diag = basis.sigma_rot.diagonal();
  if (std::isinf(t)) return 0.5 * diag.cwiseQuotient(lam).sum();
  if (t == 0.0) return 0.0;
  // ||e^{-A s} L||_F^2 = Tr(e^{-2 A s} Sigma) = sum_i e^{-2 lambda_i s} S_ii.
  auto integrand = [&](double s) {
    double acc = 0.0;
    for (Index i = 0; i < lam.size(); ++i) acc += diag(i) * std::exp(-2.0 * lam(i) * s);
    return acc;
  };
  const double tau = 1.0 / (2.0 * lam.maxCoeff());
  return simpson_segments(integrand, geometric_breakpoints(t, tau),
                          kOuQuadratureTolerance);
}

}  // namespace aniso

#endif  // ANISO_OU_HPP_
