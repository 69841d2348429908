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

// Noise-shape trade-off between the covariance-dependent KL term
// |Sigma^{-1/2} s|^2 and the accuracy loss Tr(Sigma), for diagonal Sigma.

#ifndef ANISO_COV_OPTIMIZER_HPP_
#define ANISO_COV_OPTIMIZER_HPP_

#include <cmath>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "aniso/csv.hpp"
#include "aniso/errors.hpp"
#include "aniso/matrix.hpp"
#include "aniso/ou.hpp"
#include "aniso/parallel.hpp"

namespace aniso {

// Elementwise |grad f' - grad f|.
struct GradientGap {
  Vector s;

  void validate(const std::string& op) const {
    if (s.size() == 0) throw InvalidArgument(op, "gradient gap is empty");
    if (!s.allFinite() || s.minCoeff() < 0.0) {
      throw InvalidArgument(op, "gradient gap entries must be finite and >= 0");
    }
  }
};

struct TradeoffPoint {
  Vector diag_sigma;
  double kl_term = 0.0;
  double accuracy_loss = 0.0;
};

// sum_i s_i^2 / v_i.
inline double kl_term(const GradientGap& gap, const Vector& diag_sigma) {
  const std::string op = "kl_term";
  gap.validate(op);
  if (diag_sigma.size() != gap.s.size()) throw DimensionMismatch(op, "diag_sigma length differs from s");
  if (!(diag_sigma.minCoeff() > 0.0)) throw NonPositiveVariance(op, "variances must be positive");
  return (gap.s.array().square() / diag_sigma.array()).sum();
}

// Minimizes sum s_i^2 / v_i subject to sum v_i = zeta: v_i = zeta s_i / sum s.
// Coordinates with s_i = 0 get the floor 1e-8 zeta and the rest is rescaled.
inline TradeoffPoint optimal_diag_cov(const GradientGap& gap, double zeta) {
  const std::string op = "optimal_diag_cov";
  gap.validate(op);
  if (!(zeta > 0.0) || !std::isfinite(zeta)) throw InvalidArgument(op, "zeta must be positive");
  const double total = gap.s.sum();
  if (!(total > 0.0)) throw DegenerateGap(op, "all gradient-gap entries are zero");
  const double floor = 1e-8 * zeta;
  const auto floored = static_cast<double>((gap.s.array() == 0.0).count());
  const double budget = zeta - floored * floor;
  Vector v(gap.s.size());
  for (Index i = 0; i < v.size(); ++i) {
    v(i) = gap.s(i) == 0.0 ? floor : budget * gap.s(i) / total;
  }
  return {v, kl_term(gap, v), v.sum()};
}

struct GridPoint {
  double x;
  double y;
  double kl_term;
  double trace;
};

struct AxisRange {
  double lo;
  double hi;
};

namespace internal {

inline std::vector<double> linspace(const AxisRange& r, Index n, const std::string& op) {
  if (!(r.lo > 0.0) || !(r.hi >= r.lo)) throw InvalidArgument(op, "ranges must be positive and ordered");
  if (n < 1) throw InvalidArgument(op, "resolution must be positive");
  std::vector<double> out(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    out[i] = n == 1 ? r.lo : r.lo + (r.hi - r.lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return out;
}

}  // namespace internal

// Sigma^{1/2} = diag(x, y) on a resolution x resolution grid; x is the outer
// (slow) index.
inline std::vector<GridPoint> grid_surface(const GradientGap& gap, const AxisRange& xr,
                                           const AxisRange& yr, Index resolution) {
  const std::string op = "grid_surface";
  gap.validate(op);
  if (gap.s.size() != 2) throw DimensionMismatch(op, "grid surfaces are two-dimensional");
  const auto xs = internal::linspace(xr, resolution, op);
  const auto ys = internal::linspace(yr, resolution, op);
  std::vector<GridPoint> out;
  out.reserve(xs.size() * ys.size());
  for (double x : xs) {
    for (double y : ys) {
      const Vector v = (Vector(2) << x * x, y * y).finished();
      out.push_back({x, y, kl_term(gap, v), v.sum()});
    }
  }
  return out;
}

inline void write_grid_csv(std::ostream& out, const std::vector<GridPoint>& grid) {
  write_csv_header(out, {"x", "y", "kl_term", "trace"});
  for (const auto& p : grid) write_csv_row(out, {p.x, p.y, p.kl_term, p.trace});
}

struct TradeoffSample {
  double x;
  double y;
  double exact_kl;
  double error;
};

namespace internal {

inline QuadraticProblem with_noise(QuadraticProblem p, double x, double y) {
  p.sigma = SpdMatrix::diagonal((Vector(2) << x * x, y * y).finished());
  return p;
}

}  // namespace internal

// Exact KL between the two OU marginals at time t, and the accuracy error of
// the first, with Sigma^{1/2} = diag(x, y) swept over the grid.
inline std::vector<TradeoffSample> quadratic_tradeoff(const QuadraticProblem& p,
                                                      const QuadraticProblem& p_prime, double t,
                                                      const AxisRange& xr, const AxisRange& yr,
                                                      Index resolution) {
  const std::string op = "quadratic_tradeoff";
  if (p.dim() != 2 || p_prime.dim() != 2) throw DimensionMismatch(op, "problems must be two-dimensional");
  if ((p.x0 - p_prime.x0).norm() != 0.0) throw InvalidArgument(op, "problems must share x0");
  const auto xs = internal::linspace(xr, resolution, op);
  const auto ys = internal::linspace(yr, resolution, op);
  std::vector<TradeoffSample> out(xs.size() * ys.size());
  parallel_for(out.size(), [&](std::size_t k) {
    const double x = xs[k / ys.size()];
    const double y = ys[k % ys.size()];
    const QuadraticProblem a = internal::with_noise(p, x, y);
    const QuadraticProblem b = internal::with_noise(p_prime, x, y);
    out[k] = {x, y, gaussian_kl(exact_state(a, t), exact_state(b, t)), error_to_opt(a, t)};
  });
  return out;
}

inline void write_tradeoff_csv(std::ostream& out, const std::vector<TradeoffSample>& rows) {
  write_csv_header(out, {"x", "y", "exact_kl", "error"});
  for (const auto& r : rows) write_csv_row(out, {r.x, r.y, r.exact_kl, r.error});
}

// KL reduction bought by raising the first noise scale from lo to hi (second
// held at base), divided by the reduction from the same sweep on the second
// axis. Both sweeps add the same trace.
inline double kl_anisotropy_ratio(const QuadraticProblem& p, const QuadraticProblem& p_prime,
                                  double t, double lo, double hi, double base) {
  auto kl_at = [&](double x, double y) {
    return gaussian_kl(exact_state(internal::with_noise(p, x, y), t),
                       exact_state(internal::with_noise(p_prime, x, y), t));
  };
  const double first = kl_at(lo, base) - kl_at(hi, base);
  const double second = kl_at(base, lo) - kl_at(base, hi);
  if (!(second > 0.0)) {
    throw InvalidArgument("kl_anisotropy_ratio", "second-axis sweep does not reduce the KL");
  }
  return first / second;
}

// Adjacent pair with B = diag(sqrt(condition), 1): minimizer x* against
// x* + shift (1, ..., 1).
inline std::pair<QuadraticProblem, QuadraticProblem> conditioned_pair(double condition,
                                                                      const Vector& xstar,
                                                                      double shift) {
  if (!(condition >= 1.0)) throw InvalidArgument("conditioned_pair", "condition number must be >= 1");
  if (xstar.size() != 2) throw DimensionMismatch("conditioned_pair", "xstar must be two-dimensional");
  const Matrix B = (Vector(2) << std::sqrt(condition), 1.0).finished().asDiagonal();
  const Vector shifted = xstar + Vector::Constant(2, shift);
  QuadraticProblem p{B, B * xstar, SpdMatrix::identity(2), Vector::Zero(2), std::nullopt};
  QuadraticProblem q{B, B * shifted, SpdMatrix::identity(2), Vector::Zero(2), std::nullopt};
  return {p, q};
}

}  // namespace aniso

#endif  // ANISO_COV_OPTIMIZER_HPP_
