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

#include "aniso/kl_bounds.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "gtest/gtest.h"
#include "oracles.hpp"

namespace aniso {
namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

CovarianceSpec scalar_cov(double s) { return ConstantSpd{SpdMatrix::diagonal(vec({s}))}; }

RegularityParams ones() {
  RegularityParams p;
  p.C0 = 2.0;
  p.xstar = vec({0.0, 0.0});
  p.xstar_prime = vec({0.0, 0.0});
  return p;
}

QuadraticProblem scalar_ou(double b, double x0) {
  return {Matrix::Identity(1, 1), vec({b}), SpdMatrix::identity(1), vec({x0}), std::nullopt};
}

TEST(PhiTest, EqualConstantCovariancesGiveDriftGap) {
  const QuadraticDrift a(Matrix::Identity(2, 2), vec({0.0, 0.0}));
  const QuadraticDrift b(Matrix::Identity(2, 2), vec({0.3, -0.2}));
  const CovarianceSpec cov = ConstantSpd{SpdMatrix::identity(2)};
  const Vector x = vec({1.0, 2.0});
  const Vector f = phi(x, a, b, cov, cov, AbsentScore{});
  EXPECT_LT((f - (a(x) - b(x))).norm(), 1e-15);
}

TEST(PhiTest, UnequalConstantCovariancesUseGaussianScore) {
  const DriftSpec a = CallableDrift{[](const Vector& x) -> Vector { return -x; }};
  const DriftSpec b = CallableDrift{[](const Vector& x) -> Vector { return -2.0 * x + vec({0.5}); }};
  const GaussianState law{vec({0.4}), SpdMatrix::diagonal(vec({0.8})), 0.0};
  const double x = 1.3;
  const Vector f = phi(vec({x}), a, b, scalar_cov(1.0), scalar_cov(2.0), GaussianScore{law});
  const double expected = -(x - 0.4) / 0.8 * (2.0 - 1.0) - ((-2.0 * x + 0.5) - (-x));
  EXPECT_NEAR(f(0), expected, 1e-14);
}

TEST(PhiTest, MissingScoreIsRejected) {
  const DriftSpec a = CallableDrift{[](const Vector& x) -> Vector { return -x; }};
  EXPECT_THROW(phi(vec({0.0}), a, a, scalar_cov(1.0), scalar_cov(2.0), AbsentScore{}),
               ScoreRequired);
}

TEST(PhiTest, StateDependentEqualCovariancesCancel) {
  const DiagonalOfState cov{[](const Vector& x) -> Vector { return (x.array().square() + 1.0).matrix(); }};
  const DriftSpec a = CallableDrift{[](const Vector& x) -> Vector { return -x; }};
  const DriftSpec b = CallableDrift{[](const Vector& x) -> Vector { return -x + vec({0.7}); }};
  const Vector f = phi(vec({2.0}), a, b, cov, cov, AbsentScore{});
  EXPECT_NEAR(f(0), -0.7, 1e-8);
  const Vector div = internal::covariance_divergence(cov, vec({2.0}));
  EXPECT_NEAR(div(0), 4.0, 1e-4);
}

TEST(PhiTest, StateDependentDivergenceEntersPhi) {
  // Sigma(x) = 1 + x^2 versus constant Sigma' = 1; score of N(0, 1).
  const DiagonalOfState cov{[](const Vector& x) -> Vector { return (x.array().square() + 1.0).matrix(); }};
  const DriftSpec a = CallableDrift{[](const Vector& x) -> Vector { return -x; }};
  const GaussianState law{vec({0.0}), SpdMatrix::identity(1), 0.0};
  const double x = 0.5;
  const Vector f = phi(vec({x}), a, a, cov, scalar_cov(1.0), GaussianScore{law});
  // (1 - (1 + x^2)) (-x) - (0 - (-2x)) = x^3 - 2x.
  EXPECT_NEAR(f(0), x * x * x - 2.0 * x, 1e-5);
}

TEST(PhiTest, DegenerateScoreAtMeanIsZero) {
  const GaussianState law{vec({1.0}), SpdMatrix::psd_relaxed(Matrix::Zero(1, 1)), 0.0};
  const DriftSpec a = CallableDrift{[](const Vector& x) -> Vector { return -x; }};
  EXPECT_NEAR(phi(vec({1.0}), a, a, scalar_cov(1.0), scalar_cov(2.0), GaussianScore{law})(0), 0.0, 0.0);
  EXPECT_THROW(phi(vec({2.0}), a, a, scalar_cov(1.0), scalar_cov(2.0), GaussianScore{law}),
               NotPositiveDefinite);
}

TEST(McKlBoundTest, IdenticalDynamicsGiveZero) {
  const QuadraticDrift d(Matrix::Identity(1, 1), vec({0.0}));
  const auto ens = simulate(d, scalar_cov(1.0), vec({1.0}), {.step = 0.01, .horizon = 1.0, .paths = 100, .seed = 1});
  const auto curve = mc_kl_bound(ens, PhiField{d, d, scalar_cov(1.0), scalar_cov(1.0)}, scalar_cov(1.0));
  ASSERT_EQ(curve.size(), static_cast<std::size_t>(ens.records()));
  for (const auto& p : curve) EXPECT_EQ(p.bound, 0.0);
}

std::vector<BoundPoint> adjacent_curve(double gap, Index paths) {
  const QuadraticDrift a(Matrix::Identity(1, 1), vec({0.0}));
  const QuadraticDrift b(Matrix::Identity(1, 1), vec({gap}));
  const auto ens = simulate(a, scalar_cov(1.0), vec({0.0}),
                            {.step = 1e-3, .horizon = 2.0, .paths = paths, .seed = 31, .record_stride = 20});
  return mc_kl_bound(ens, PhiField{a, b, scalar_cov(1.0), scalar_cov(1.0)}, scalar_cov(1.0));
}

TEST(McKlBoundTest, DominatesExactMarginalKl) {
  const auto curve = adjacent_curve(0.1, 10000);
  for (const auto& p : curve) {
    const double kl = gaussian_kl(exact_state(scalar_ou(0.0, 0.0), p.time),
                                  exact_state(scalar_ou(0.1, 0.0), p.time));
    // Oracle: 0.01 tanh(t/2).
    EXPECT_NEAR(kl, 0.01 * std::tanh(p.time / 2.0), 1e-12);
    EXPECT_GE(p.bound + 3.0 * p.std_error, kl) << "t=" << p.time;
  }
}

TEST(McKlBoundTest, QuadraticInGradientGap) {
  const auto c1 = adjacent_curve(0.1, 200);
  const auto c2 = adjacent_curve(0.2, 200);
  const double ratio = c2.back().bound / c1.back().bound;
  EXPECT_NEAR(ratio, 4.0, 0.4);
}

TEST(McKlBoundTest, NonnegativeAndNondecreasing) {
  const DriftSpec a = CallableDrift{[](const Vector& x) -> Vector { return -x.array().cube().matrix(); }};
  const DriftSpec b = CallableDrift{[](const Vector& x) -> Vector { return -x + vec({0.3, 0.1}); }};
  const CovarianceSpec cov = ConstantSpd{SpdMatrix::diagonal(vec({0.5, 2.0}))};
  const auto ens = simulate(a, cov, vec({0.5, -0.5}), {.step = 0.01, .horizon = 1.0, .paths = 64, .seed = 2});
  const auto curve = mc_kl_bound(ens, PhiField{a, b, cov, cov}, cov);
  for (std::size_t i = 1; i < curve.size(); ++i) {
    EXPECT_GE(curve[i].bound, curve[i - 1].bound);
    EXPECT_GE(curve[i].bound, 0.0);
  }
}

TEST(McKlBoundTest, TimeVaryingScoreAndCallableOverloadAgree) {
  const QuadraticProblem prime{Matrix::Identity(1, 1), vec({0.2}), SpdMatrix::diagonal(vec({2.0})),
                               vec({0.0}), SpdMatrix::identity(1)};
  const QuadraticDrift a(Matrix::Identity(1, 1), vec({0.0}));
  const QuadraticDrift b(Matrix::Identity(1, 1), vec({0.2}));
  const PhiField field{a, b, scalar_cov(1.0), scalar_cov(2.0),
                       TimeVaryingGaussianScore{[&](double t) { return exact_state(prime, t); }}};
  const auto ens = simulate(a, scalar_cov(1.0), vec({0.0}), {.step = 0.05, .horizon = 1.0, .paths = 50, .seed = 9});
  const auto c1 = mc_kl_bound(ens, field, scalar_cov(1.0));
  const auto c2 = mc_kl_bound(
      ens, [&](double t, const Vector& x) { return field(t, x); }, scalar_cov(1.0));
  ASSERT_EQ(c1.size(), c2.size());
  for (std::size_t i = 0; i < c1.size(); ++i) EXPECT_EQ(c1[i].bound, c2[i].bound);
  EXPECT_GT(c1.back().bound, 0.0);
}

TEST(McKlBoundTest, CsvLayout) {
  std::ostringstream out;
  write_bound_csv(out, {{0.0, 0.0, 0.0}, {0.5, 0.25, 0.0}});
  EXPECT_EQ(out.str(), "time,bound\n0,0\n0.5,0.25\n");
}

TEST(LsiConstantTest, Examples) {
  EXPECT_EQ(lsi_constant(0.0, 0.7, 3.0), 3.0);
  EXPECT_NEAR(lsi_constant(1e6 / 0.7, 0.7, 3.0), 2.0 / 0.7, 1e-12);
  EXPECT_NEAR(lsi_constant(std::numbers::ln2, 1.0, 2.0), 2.0, 1e-15);
}

TEST(LsiConstantTest, BoundedBetweenEndpoints) {
  for (double c0 : {0.1, 1.0, 10.0}) {
    for (double t = 0.0; t < 20.0; t += 0.37) {
      const double c = lsi_constant(t, 0.5, c0);
      EXPECT_GE(c, std::min(c0, 4.0) - 1e-12);
      EXPECT_LE(c, std::max(c0, 4.0) + 1e-12);
    }
  }
}

TEST(KlBoundClosedTest, Examples) {
  RegularityParams p = ones();
  EXPECT_EQ(klbound_closed(p), 432.0);
  EXPECT_EQ(klbound_closed(p, true), 144.0);
  p.xstar_prime = vec({1.0, 0.0});
  EXPECT_NEAR(klbound_closed(p) - 432.0, 48.0, 1e-12);
}

TEST(KlBoundClosedTest, RemarkVariantIsSharper) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int i = 0; i < 200; ++i) {
    RegularityParams p;
    p.kappa = u(rng);
    p.L = p.kappa + u(rng);
    p.kappa_prime = u(rng);
    p.L_prime = p.kappa_prime + u(rng);
    p.sigma = u(rng);
    p.sigma_prime = u(rng);
    p.C0 = u(rng);
    p.xstar = vec({u(rng)});
    p.xstar_prime = vec({u(rng)});
    EXPECT_LE(klbound_closed(p, true), klbound_closed(p));
  }
}

TEST(KlBoundClosedTest, RejectsInvalidParams) {
  RegularityParams p = ones();
  p.kappa = 2.0;
  EXPECT_THROW(klbound_closed(p), InvalidArgument);
  p = ones();
  p.sigma = 0.0;
  EXPECT_THROW(klbound_stationary(p), InvalidArgument);
}

TEST(KlBoundStationaryTest, Examples) {
  RegularityParams p = ones();
  EXPECT_EQ(klbound_stationary(p), 1.5);
  p.xstar_prime = vec({0.0, 1.0});
  EXPECT_EQ(klbound_stationary(p), 2.0);
}

TEST(KlBoundStationaryTest, SigmaPrimeSixthPowerPrefactor) {
  RegularityParams p = ones();
  p.sigma = 0.7;
  p.sigma_prime = 0.9;
  p.L = 1.5;
  const double base_prefactor = 1.0 / (2.0 * std::pow(0.9, 6));
  const double doubled_prefactor = 1.0 / (2.0 * std::pow(1.8, 6));
  EXPECT_NEAR(doubled_prefactor / base_prefactor, 1.0 / 64.0, 1e-15);
  // Holding the brace fixed, the bound scales with the prefactor.
  auto brace = [](const RegularityParams& q) {
    return klbound_stationary(q) * 2.0 * q.kappa_prime * std::pow(q.sigma_prime, 6) /
           (q.L_prime * q.L_prime);
  };
  RegularityParams q = p;
  q.sigma_prime = 1.8;
  EXPECT_NEAR(klbound_stationary(q) / klbound_stationary(p), brace(q) / brace(p) / 64.0, 1e-12);
}

TEST(XiBoundTest, Examples) {
  const RegularityParams p = ones();
  EXPECT_EQ(xi_bound(0.0, p, 1.0), 18.0);
  EXPECT_EQ(xi_bound(kInfiniteTime, p, 1.0), 6.0);
  EXPECT_NEAR(xi_bound(50.0, p, 1.0), 6.0, 1e-12);
}

TEST(XiBoundTest, NonincreasingWithLimit) {
  RegularityParams p = ones();
  p.L = 2.0;
  p.sigma = 0.8;
  p.xstar_prime = vec({0.5, 0.5});
  double prev = xi_bound(0.0, p, 1.7);
  for (double t = 0.1; t < 10.0; t += 0.1) {
    const double v = xi_bound(t, p, 1.7);
    EXPECT_LE(v, prev);
    prev = v;
  }
  const double m = 1.7;
  const double limit = 2.0 * m * m * (2.0 * (4.0 / (m * m) + 2.0) * 0.64 / 2.0 + 0.5);
  EXPECT_NEAR(xi_bound(kInfiniteTime, p, m), limit, 1e-12);
}

TEST(XiBoundTest, StationaryChainWithMatchedNoise) {
  // With M = sigma^2 / sigma'^2 and C' = 4 / (sigma'^2 kappa'), C'/(4 sigma^4) xi_inf
  // shares its brace with the stationary bound and carries 4 times its prefactor.
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.2, 2.0);
  for (int i = 0; i < 50; ++i) {
    RegularityParams p = ones();
    p.kappa = u(rng);
    p.L = p.kappa + u(rng);
    p.kappa_prime = u(rng);
    p.L_prime = p.kappa_prime + u(rng);
    p.sigma = p.sigma_prime = u(rng);
    p.xstar_prime = vec({u(rng), 0.0});
    const double s2 = p.sigma * p.sigma;
    const double m = s2 / (p.sigma_prime * p.sigma_prime);
    const double c_prime = 4.0 / (p.sigma_prime * p.sigma_prime * p.kappa_prime);
    const double chain = c_prime / (4.0 * s2 * s2) * xi_bound(kInfiniteTime, p, m);
    EXPECT_NEAR(chain, 4.0 * klbound_stationary(p), 1e-10 * chain);
  }
}

TEST(ConvergenceBoundTest, Examples) {
  EXPECT_EQ(convergence_bound(0.0, 1.3, 5.0, 1.0), 1.0);
  EXPECT_EQ(convergence_bound(kInfiniteTime, 1.0, 2.0, 1.0), 0.5);
  EXPECT_NEAR(convergence_bound(1e3, 1.0, 2.0, 1.0), 0.5, 1e-15);
  EXPECT_THROW(convergence_bound(1.0, 0.0, 1.0, 1.0), InvalidArgument);
}

TEST(ConvergenceBoundTest, SimulatedOrnsteinUhlenbeckStaysBelow) {
  // kappa = 1, sigma = 1, x0 = x* + 2 so v0 = 2.
  const QuadraticDrift d(Matrix::Identity(1, 1), vec({1.0}));
  const auto ens = simulate(d, scalar_cov(1.0), vec({3.0}),
                            {.step = 1e-3, .horizon = 2.0, .paths = 10000, .seed = 17, .record_stride = 10});
  for (Index r = 0; r < ens.records(); ++r) {
    std::vector<double> err(ens.paths());
    for (Index p = 0; p < ens.paths(); ++p) {
      err[p] = 0.5 * std::pow(ens.state(p, r)(0) - 1.0, 2);
    }
    const auto s = testing::mean_and_se(err);
    EXPECT_LE(s.mean - 3.0 * s.std_error, convergence_bound(ens.times()[r], 1.0, 1.0, 2.0))
        << "t=" << ens.times()[r];
  }
}

}  // namespace
}  // namespace aniso
