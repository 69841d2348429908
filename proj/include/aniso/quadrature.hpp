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

#ifndef ANISO_QUADRATURE_HPP_
#define ANISO_QUADRATURE_HPP_

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "aniso/errors.hpp"
#include "aniso/matrix.hpp"

namespace aniso {

namespace internal {
inline double magnitude(double v) { return std::abs(v); }
inline double magnitude(const Matrix& m) { return m.norm(); }
}  // namespace internal

// Composite Simpson rule on [a, b]; the panel count doubles until two
// successive estimates differ by less than rel_tol (relative). Trapezoid sums
// are carried between levels so every node is evaluated once.
template <typename Fn>
auto simpson_doubling(Fn&& f, double a, double b, double rel_tol,
                      int max_levels = 24) -> decltype(f(a)) {
  using Value = decltype(f(a));
  constexpr int kMinLevels = 3;
  const double width = b - a;
  Value trapezoid = 0.5 * width * (f(a) + f(b));
  Value simpson_prev = trapezoid;
  for (int level = 1; level <= max_levels; ++level) {
    const long panels = 1L << level;
    const double h = width / static_cast<double>(panels);
    Value mid_sum = f(a + h);
    for (long i = 1; i < panels / 2; ++i) {
      mid_sum = mid_sum + f(a + static_cast<double>(2 * i + 1) * h);
    }
    Value refined = 0.5 * trapezoid + h * mid_sum;
    Value simpson = (4.0 * refined - trapezoid) / 3.0;
    trapezoid = refined;
    if (level >= kMinLevels) {
      const double diff = internal::magnitude(Value(simpson - simpson_prev));
      const double scale = internal::magnitude(simpson);
      if (diff <= rel_tol * scale || (scale == 0.0 && diff == 0.0)) {
        return simpson;
      }
    }
    simpson_prev = simpson;
  }
  throw QuadratureNotConverged(
      "simpson_doubling",
      "no convergence after 2^" + std::to_string(max_levels) + " panels");
}

// Sums simpson_doubling over consecutive segments [points[k], points[k+1]].
template <typename Fn>
auto simpson_segments(Fn&& f, const std::vector<double>& points,
                      double rel_tol) -> decltype(f(points.front())) {
  using Value = decltype(f(points.front()));
  Value total = simpson_doubling(f, points[0], points[1], rel_tol);
  for (std::size_t k = 1; k + 1 < points.size(); ++k) {
    total = total + simpson_doubling(f, points[k], points[k + 1], rel_tol);
  }
  return total;
}

// Breakpoints 0, tau, 2 tau, 4 tau, ... capped at t, for integrands that decay
// like exp(-s / tau). Keeps every segment smooth on its own scale.
inline std::vector<double> geometric_breakpoints(double t, double tau) {
  std::vector<double> pts{0.0};
  double s = tau;
  while (s < t) {
    pts.push_back(s);
    s *= 2.0;
  }
  pts.push_back(t);
  return pts;
}

}  // namespace aniso

#endif  // ANISO_QUADRATURE_HPP_
