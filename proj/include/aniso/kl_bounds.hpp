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

// Relative-entropy bounds between two diffusions sharing an initial law:
// the Phi field and its Monte-Carlo time integral, the log-Sobolev constant
// of the evolving law, and closed-form bounds under strong convexity.

#ifndef ANISO_KL_BOUNDS_HPP_
#define ANISO_KL_BOUNDS_HPP_

#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "aniso/csv.hpp"
#include "aniso/errors.hpp"
#include "aniso/matrix.hpp"
#include "aniso/ou.hpp"
#include "aniso/parallel.hpp"
#include "aniso/sde.hpp"

namespace aniso {

struct RegularityParams {
  double kappa = 1.0;
  double kappa_prime = 1.0;
  double L = 1.0;
  double L_prime = 1.0;
  double sigma = 1.0;
  double sigma_prime = 1.0;
  double C0 = 1.0;
  Vector xstar;
  Vector xstar_prime;

  void validate() const {
    const std::string op = "RegularityParams";
    for (double v : {kappa, kappa_prime, L, L_prime, sigma, sigma_prime, C0}) {
      if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument(op, "constants must be positive");
    }
    if (kappa > L || kappa_prime > L_prime) {
      throw InvalidArgument(op, "strong convexity constant exceeds smoothness constant");
    }
    if (xstar.size() != xstar_prime.size()) {
      throw DimensionMismatch(op, "minimizers have different dimensions");
    }
  }

  double minimizer_gap_sq() const {
    return xstar.size() == 0 ? 0.0 : (xstar - xstar_prime).squaredNorm();
  }
};

// Score grad log p'(x) of a fixed Gaussian law.
struct GaussianScore {
  GaussianState state;
};

// Gaussian law that evolves in time, e.g. t -> exact_state(problem', t).
struct TimeVaryingGaussianScore {
  std::function<GaussianState(double)> state_at;
};

struct CallableScore {
  std::function<Vector(double, const Vector&)> fn;
};

// Only valid when the two covariance fields coincide.
struct AbsentScore {};

using ScoreSpec = std::variant<GaussianScore, TimeVaryingGaussianScore, CallableScore, AbsentScore>;

namespace internal {

inline Vector gaussian_score(const GaussianState& s, const Vector& x) {
  const Vector centered = x - s.mean;
  if (s.cov.is_positive_definite()) return -solve(s.cov, centered);
  if (centered.isZero(0.0)) return Vector::Zero(x.size());
  throw NotPositiveDefinite("gaussian_score", "score of a degenerate Gaussian off its mean");
}

// Row divergence sum_j d_j Sigma_ij; zero for constant fields.
inline Vector covariance_divergence(const CovarianceSpec& cov, const Vector& x) {
  const Index d = x.size();
  Vector out = Vector::Zero(d);
  if (std::holds_alternative<ConstantSpd>(cov)) return out;
  const Matrix base = evaluate_covariance(cov, x);
  const bool diagonal = std::holds_alternative<DiagonalOfState>(cov);
  for (Index j = 0; j < d; ++j) {
    const double step = 1e-6 * std::max(1.0, std::abs(x(j)));
    Vector xp = x;
    xp(j) += step;
    const Matrix shifted = evaluate_covariance(cov, xp);
    if (diagonal) {
      out(j) = (shifted(j, j) - base(j, j)) / step;
    } else {
      out += (shifted.col(j) - base.col(j)) / step;
    }
  }
  return out;
}

}  // namespace internal

// Phi = (Sigma' - Sigma) grad log p' - (h' - h), h_i = b_i - sum_j d_j Sigma_ij.
struct PhiField {
  DriftSpec drift;
  DriftSpec drift_prime;
  CovarianceSpec cov;
  CovarianceSpec cov_prime;
  ScoreSpec score = AbsentScore{};

  // Phi(t, .) with the time-dependent score resolved once.
  std::function<Vector(const Vector&)> at_time(double t) const {
    std::optional<GaussianState> frozen;
    if (const auto* s = std::get_if<TimeVaryingGaussianScore>(&score)) frozen = s->state_at(t);
    return [this, t, frozen](const Vector& x) { return evaluate(t, x, frozen); };
  }

  Vector operator()(double t, const Vector& x) const { return at_time(t)(x); }

 private:
  Vector evaluate(double t, const Vector& x, const std::optional<GaussianState>& frozen) const {
    const Vector h = evaluate_drift(drift, x) - internal::covariance_divergence(cov, x);
    const Vector h_prime =
        evaluate_drift(drift_prime, x) - internal::covariance_divergence(cov_prime, x);
    Vector out = h - h_prime;
    const Matrix gap = evaluate_covariance(cov_prime, x) - evaluate_covariance(cov, x);
    if (gap.isZero(0.0)) return out;
    Vector s;
    if (const auto* g = std::get_if<GaussianScore>(&score)) {
      s = internal::gaussian_score(g->state, x);
    } else if (frozen) {
      s = internal::gaussian_score(*frozen, x);
    } else if (const auto* c = std::get_if<CallableScore>(&score)) {
      s = c->fn(t, x);
    } else {
      throw ScoreRequired("phi", "covariances differ but no score was supplied");
    }
    if (s.size() != x.size()) throw DimensionMismatch("phi", "score has wrong dimension");
    return out + gap * s;
  }
};

inline Vector phi(const Vector& x, const DriftSpec& drift, const DriftSpec& drift_prime,
                  const CovarianceSpec& cov, const CovarianceSpec& cov_prime,
                  const ScoreSpec& score, double t = 0.0) {
  return PhiField{drift, drift_prime, cov, cov_prime, score}(t, x);
}

struct BoundPoint {
  double time;
  double bound;
  double std_error;
};

namespace internal {

template <typename Slicer>
std::vector<BoundPoint> mc_kl_bound_impl(const TrajectoryEnsemble& ens, Slicer&& slice,
                                         const CovarianceSpec& cov) {
  const std::string op = "mc_kl_bound";
  std::optional<SpdMatrix> constant;
  if (const auto* c = std::get_if<ConstantSpd>(&cov)) {
    constant = c->cov;
    if (!constant->is_positive_definite()) {
      throw NotPositiveDefinite(op, "diffusion covariance must be positive definite");
    }
  }
  const Index records = ens.records();
  const auto paths = static_cast<std::size_t>(ens.paths());
  std::vector<double> values(paths);
  std::vector<BoundPoint> out;
  out.reserve(records);
  double bound = 0.0;
  double se = 0.0;
  for (Index r = 0; r < records; ++r) {
    out.push_back({ens.times()[r], bound, se});
    if (r + 1 == records) break;
    const auto phi_t = slice(ens.times()[r]);
    parallel_for(paths, [&](std::size_t p) {
      const Vector x = ens.state(static_cast<Index>(p), r);
      const Vector f = phi_t(x);
      values[p] = constant ? inverse_quadratic_form(*constant, f)
                           : inverse_quadratic_form(SpdMatrix(evaluate_covariance(cov, x)), f);
    });
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(paths);
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    const double mean_se =
        paths > 1 ? std::sqrt(var / static_cast<double>(paths - 1) / static_cast<double>(paths)) : 0.0;
    const double dt = ens.times()[r + 1] - ens.times()[r];
    bound += 0.5 * dt * mean;
    se += 0.5 * dt * mean_se;
  }
  return out;
}

}  // namespace internal

// Running value of 1/2 int_0^t E_{p_s} |Sigma^{-1/2} Phi(s, x)|^2 ds on the
// recorded grid (left Riemann sum). std_error accumulates the per-time
// standard errors linearly.
inline std::vector<BoundPoint> mc_kl_bound(const TrajectoryEnsemble& ens, const PhiField& field,
                                           const CovarianceSpec& cov) {
  return internal::mc_kl_bound_impl(ens, [&](double t) { return field.at_time(t); }, cov);
}

inline std::vector<BoundPoint> mc_kl_bound(
    const TrajectoryEnsemble& ens, const std::function<Vector(double, const Vector&)>& phi_eval,
    const CovarianceSpec& cov) {
  return internal::mc_kl_bound_impl(
      ens,
      [&](double t) { return [&phi_eval, t](const Vector& x) { return phi_eval(t, x); }; },
      cov);
}

inline void write_bound_csv(std::ostream& out, const std::vector<BoundPoint>& curve) {
  write_csv_header(out, {"time", "bound"});
  for (const auto& p : curve) write_csv_row(out, {p.time, p.bound});
}

// C_t = (2/rho)(1 - e^{-rho t}) + C0 e^{-rho t}.
inline double lsi_constant(double t, double rho, double C0) {
  if (!(t >= 0.0) || !(rho > 0.0) || !(C0 > 0.0)) {
    throw InvalidArgument("lsi_constant", "t must be >= 0 and rho, C0 positive");
  }
  const double decay = std::exp(-rho * t);
  return -(2.0 / rho) * std::expm1(-rho * t) + C0 * decay;
}

// With remark_variant the (sigma^2/(2 kappa) + 1) factor becomes
// sigma^2/(2 kappa), the sharper large-time constant.
inline double klbound_closed(const RegularityParams& p, bool remark_variant = false) {
  p.validate();
  const double s2 = p.sigma * p.sigma;
  const double sp2 = p.sigma_prime * p.sigma_prime;
  const double lr = p.L * p.L / (p.L_prime * p.L_prime);
  const double tail = s2 / (2.0 * p.kappa) + (remark_variant ? 0.0 : 1.0);
  const double brace = 2.0 * (lr + 2.0) * tail + p.minimizer_gap_sq();
  return 8.0 * p.L_prime * p.L_prime / s2 * brace * (4.0 + p.C0 * sp2 * p.kappa_prime) /
         (s2 * sp2 * p.kappa_prime);
}

inline double klbound_stationary(const RegularityParams& p) {
  p.validate();
  const double s2 = p.sigma * p.sigma;
  const double sp2 = p.sigma_prime * p.sigma_prime;
  const double lp2 = p.L_prime * p.L_prime;
  const double brace =
      2.0 * (sp2 * p.L * p.L / (s2 * lp2) + 2.0) * s2 / (2.0 * p.kappa) + p.minimizer_gap_sq();
  return lp2 / (2.0 * p.kappa_prime * sp2 * sp2 * sp2) * brace;
}

// Time-varying bound on the score-weighted gradient gap; t = kInfiniteTime
// gives the limit.
inline double xi_bound(double t, const RegularityParams& p, double M) {
  p.validate();
  if (!(t >= 0.0) || !(M > 0.0)) throw InvalidArgument("xi_bound", "t must be >= 0 and M positive");
  const double s2 = p.sigma * p.sigma;
  const double lp2 = p.L_prime * p.L_prime;
  const double decay = std::isinf(t) ? 0.0 : std::exp(-2.0 * p.kappa * t);
  const double brace = 2.0 * (p.L * p.L / (M * M * lp2) + 2.0) * (s2 / (2.0 * p.kappa) + decay) +
                       p.minimizer_gap_sq();
  return 2.0 * M * M * lp2 * brace;
}

// e^{-2 kappa t} v0 + Tr(Sigma)/(4 kappa) (1 - e^{-2 kappa t}), v0 = 1/2 E|x0 - x*|^2.
inline double convergence_bound(double t, double kappa, double trace_sigma, double v0) {
  if (!(t >= 0.0) || !(kappa > 0.0) || !(trace_sigma >= 0.0) || !(v0 >= 0.0)) {
    throw InvalidArgument("convergence_bound", "arguments must be nonnegative and kappa positive");
  }
  if (std::isinf(t)) return trace_sigma / (4.0 * kappa);
  const double decay = std::exp(-2.0 * kappa * t);
  return decay * v0 - trace_sigma / (4.0 * kappa) * std::expm1(-2.0 * kappa * t);
}

}  // namespace aniso

#endif  // ANISO_KL_BOUNDS_HPP_
