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

#include "aniso/cov_optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <random>
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

TEST(KlTermTest, Examples) {
  EXPECT_EQ(kl_term({vec({10, 10})}, vec({16, 16})), 12.5);
  EXPECT_EQ(kl_term({vec({0, 0})}, vec({3, 0.5})), 0.0);
  EXPECT_NEAR(kl_term({vec({10, 1})}, vec({16, 1})), 7.25, 1e-15);
  EXPECT_NEAR(kl_term({vec({10, 1})}, vec({16, 9})), 6.25 + 1.0 / 9.0, 1e-15);
  EXPECT_THROW(kl_term({vec({1, 1})}, vec({1, 0})), NonPositiveVariance);
  EXPECT_THROW(kl_term({vec({1, 1})}, vec({1, 1, 1})), DimensionMismatch);
  EXPECT_THROW(kl_term({vec({-1, 1})}, vec({1, 1})), InvalidArgument);
}

TEST(OptimalDiagCovTest, SymmetricGapGivesIsotropicNoise) {
  for (double zeta : {0.5, 2.0, 11.0, 100.0}) {
    const auto opt = optimal_diag_cov({vec({10, 10})}, zeta);
    EXPECT_EQ(opt.diag_sigma(0), opt.diag_sigma(1));
    EXPECT_NEAR(opt.diag_sigma(0), zeta / 2.0, 1e-14 * zeta);
  }
}

TEST(OptimalDiagCovTest, MatchesProjectedGradientOracle) {
  const auto opt = optimal_diag_cov({vec({10, 1})}, 11.0);
  EXPECT_NEAR(opt.diag_sigma(0), 10.0, 1e-12);
  EXPECT_NEAR(opt.diag_sigma(1), 1.0, 1e-12);
  EXPECT_NEAR(opt.kl_term, 11.0, 1e-10);
  const Vector oracle = testing::projected_gradient_oracle(vec({10, 1}), 11.0);
  EXPECT_LT((opt.diag_sigma - oracle).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(OptimalDiagCovTest, RandomGapsAgreeWithOracle) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.1, 5.0);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector s = vec({u(rng), u(rng), u(rng)});
    const double zeta = u(rng);
    const auto opt = optimal_diag_cov({s}, zeta);
    const Vector oracle = testing::projected_gradient_oracle(s, zeta);
    EXPECT_LT((opt.diag_sigma - oracle).cwiseAbs().maxCoeff(), 1e-6 * zeta);
  }
}

TEST(OptimalDiagCovTest, AnisotropicRatioAtEveryZeta) {
  for (double zeta = 1.0; zeta <= 30.0; zeta += 1.5) {
    const auto opt = optimal_diag_cov({vec({10, 1})}, zeta);
    EXPECT_NEAR(opt.diag_sigma(0) / opt.diag_sigma(1), 10.0, 1e-12);
  }
}

TEST(OptimalDiagCovTest, TraceStationarityAndCauchySchwarz) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.01, 10.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Index d = 1 + trial % 6;
    Vector s(d);
    for (Index i = 0; i < d; ++i) s(i) = u(rng);
    const double zeta = u(rng);
    const auto opt = optimal_diag_cov({s}, zeta);
    EXPECT_NEAR(opt.accuracy_loss, zeta, 1e-12 * zeta);
    EXPECT_NEAR(opt.diag_sigma.sum(), zeta, 1e-12 * zeta);
    const Vector ratio = s.array().square() / opt.diag_sigma.array().square();
    EXPECT_LT(ratio.maxCoeff() - ratio.minCoeff(), 1e-8 * ratio.maxCoeff());
    EXPECT_NEAR(opt.kl_term, s.sum() * s.sum() / zeta, 1e-10 * opt.kl_term);
    const double iso = kl_term({s}, Vector::Constant(d, zeta / d));
    EXPECT_LE(opt.kl_term, iso * (1.0 + 1e-14));
  }
  // Equality only for equal gaps.
  const auto eq = optimal_diag_cov({vec({2, 2, 2})}, 3.0);
  EXPECT_NEAR(eq.kl_term, kl_term({vec({2, 2, 2})}, vec({1, 1, 1})), 1e-12);
  const auto neq = optimal_diag_cov({vec({2, 2, 3})}, 3.0);
  EXPECT_LT(neq.kl_term, kl_term({vec({2, 2, 3})}, vec({1, 1, 1})));
}

TEST(OptimalDiagCovTest, ZeroGapCoordinatesAreFloored) {
  const auto opt = optimal_diag_cov({vec({3, 0, 1})}, 4.0);
  EXPECT_EQ(opt.diag_sigma(1), 4e-8);
  EXPECT_NEAR(opt.diag_sigma.sum(), 4.0, 1e-14);
  EXPECT_NEAR(opt.diag_sigma(0) / opt.diag_sigma(2), 3.0, 1e-12);
  EXPECT_GT(opt.diag_sigma.minCoeff(), 0.0);
}

TEST(OptimalDiagCovTest, Rejections) {
  EXPECT_THROW(optimal_diag_cov({vec({0, 0})}, 1.0), DegenerateGap);
  EXPECT_THROW(optimal_diag_cov({vec({1, 0})}, 0.0), InvalidArgument);
}

TEST(GridSurfaceTest, Examples) {
  const auto grid = grid_surface({vec({10, 10})}, {3, 4}, {3, 4}, 2);
  ASSERT_EQ(grid.size(), 4u);
  EXPECT_EQ(grid[0].x, 3.0);
  EXPECT_EQ(grid[0].y, 3.0);
  EXPECT_NEAR(grid[0].kl_term, 200.0 / 9.0, 1e-13);
  EXPECT_EQ(grid[0].trace, 18.0);
  EXPECT_EQ(grid[1].y, 4.0);
  EXPECT_EQ(grid[3].kl_term, 12.5);
  EXPECT_EQ(grid[3].trace, 32.0);
}

TEST(GridSurfaceTest, SymmetricAndMonotone) {
  const Index n = 9;
  const auto grid = grid_surface({vec({10, 10})}, {0.5, 5}, {0.5, 5}, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      EXPECT_EQ(grid[i * n + j].kl_term, grid[j * n + i].kl_term);
      if (i + 1 < n) EXPECT_LT(grid[(i + 1) * n + j].kl_term, grid[i * n + j].kl_term);
    }
  }
  const auto again = grid_surface({vec({10, 10})}, {0.5, 5}, {0.5, 5}, n);
  for (std::size_t k = 0; k < grid.size(); ++k) EXPECT_EQ(grid[k].kl_term, again[k].kl_term);
}

TEST(GridSurfaceTest, CsvLayout) {
  std::ostringstream out;
  write_grid_csv(out, grid_surface({vec({10, 10})}, {4, 4}, {4, 4}, 1));
  EXPECT_EQ(out.str(), "x,y,kl_term,trace\n4,4,12.5,32\n");
}

TEST(QuadraticTradeoffTest, IdenticalProblemsGiveZero) {
  const auto [p, q] = conditioned_pair(10.0, vec({1, 1}), 0.0);
  for (const auto& r : quadratic_tradeoff(p, q, 100.0, {0.5, 2}, {0.5, 2}, 4)) {
    EXPECT_EQ(r.exact_kl, 0.0);
    EXPECT_GT(r.error, 0.0);
  }
}

TEST(QuadraticTradeoffTest, StationaryAtLargeTime) {
  const auto [p, q] = conditioned_pair(10.0, vec({1, 1}), 0.3);
  for (const auto& r : quadratic_tradeoff(p, q, 100.0, {0.5, 2}, {0.5, 2}, 3)) {
    QuadraticProblem a = p;
    QuadraticProblem b = q;
    a.sigma = b.sigma = SpdMatrix::diagonal(vec({r.x * r.x, r.y * r.y}));
    const double stationary = gaussian_kl(invariant_state(a), invariant_state(b));
    // Shifted minimizers: delta^2 (c / x^2 + 1 / y^2).
    EXPECT_NEAR(stationary, 0.09 * (10.0 / (r.x * r.x) + 1.0 / (r.y * r.y)), 1e-12);
    EXPECT_NEAR(r.exact_kl, stationary, 1e-6);
    EXPECT_NEAR(r.error, error_to_opt(a, kInfiniteTime), 1e-6);
  }
}

TEST(QuadraticTradeoffTest, AnisotropyGrowsWithConditionNumber) {
  const auto [p10, q10] = conditioned_pair(10.0, vec({1, 1}), 0.1);
  const auto [p100, q100] = conditioned_pair(100.0, vec({1, 1}), 0.1);
  const double r10 = kl_anisotropy_ratio(p10, q10, 100.0, 0.5, 2.0, 1.0);
  const double r100 = kl_anisotropy_ratio(p100, q100, 100.0, 0.5, 2.0, 1.0);
  EXPECT_NEAR(r10, 10.0, 1e-6);
  EXPECT_NEAR(r100, 100.0, 1e-5);
  EXPECT_GT(r100, r10);
}

TEST(QuadraticTradeoffTest, CsvLayout) {
  std::ostringstream out;
  write_tradeoff_csv(out, {{1.0, 2.0, 0.5, 0.25}});
  EXPECT_EQ(out.str(), "x,y,exact_kl,error\n1,2,0.5,0.25\n");
}

}  // namespace
}  // namespace aniso
