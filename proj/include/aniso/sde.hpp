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

// Euler-Maruyama ensembles for dx = b(x) dt + Sigma^{1/2}(x) dW.
//
// Gaussian increments are drawn from the counter-based generator keyed by
// (seed, path, step, coordinate), so an ensemble is a pure function of its
// inputs no matter how paths are scheduled across workers, and two ensembles
// simulated with the same seed share every increment.

#ifndef ANISO_SDE_HPP_
#define ANISO_SDE_HPP_

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "aniso/csv.hpp"
#include "aniso/errors.hpp"
#include "aniso/matrix.hpp"
#include "aniso/parallel.hpp"
#include "aniso/random.hpp"

namespace aniso {

// Drift -B^T (B x - b).
class QuadraticDrift {
 public:
  QuadraticDrift(Matrix B, Vector b)
      : B_(std::move(B)), b_(std::move(b)),
        gram_(B_.transpose() * B_), rhs_(B_.transpose() * b_) {
    if (b_.size() != B_.rows()) {
      throw DimensionMismatch("QuadraticDrift", "b must have B.rows() entries");
    }
  }
  const Matrix& B() const { return B_; }
  const Vector& b() const { return b_; }
  Vector operator()(const Vector& x) const { return rhs_ - gram_ * x; }

 private:
  Matrix B_;
  Vector b_;
  Matrix gram_;
  Vector rhs_;
};

struct CallableDrift {
  std::function<Vector(const Vector&)> fn;
};

// Drift -grad f(x, D) for a loss over a dataset; built by toy_models.
struct DatasetGradientDrift {
  std::function<Vector(const Vector&)> gradient;
  std::string dataset;
};

using DriftSpec = std::variant<QuadraticDrift, CallableDrift, DatasetGradientDrift>;

inline Vector evaluate_drift(const DriftSpec& drift, const Vector& x) {
  Vector out = std::visit(
      [&](const auto& d) -> Vector {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, QuadraticDrift>) {
          return d(x);
        } else if constexpr (std::is_same_v<T, CallableDrift>) {
          return d.fn(x);
        } else {
          return -d.gradient(x);
        }
      },
      drift);
  if (out.size() != x.size()) {
    throw DimensionMismatch("evaluate_drift", "drift output has wrong dimension");
  }
  return out;
}

struct ConstantSpd {
  SpdMatrix cov;  // may be psd_relaxed (e.g. zero noise)
};

// Sigma(x) = diag(variances(x)).
struct DiagonalOfState {
  std::function<Vector(const Vector&)> variances;
};

// Minibatch SGD covariance built from per-example gradients (an N x d matrix
// at x); projected onto the PSD cone with floor psd_floor before use.
struct MinibatchSgd {
  std::function<Matrix(const Vector&)> per_example_grads;
  Index batch_size = 1;
  Index dataset_size = 1;
  bool replacement = true;
  double psd_floor = 1e-10;
  bool strict = false;  // require a positive-definite projection
};

using CovarianceSpec = std::variant<ConstantSpd, DiagonalOfState, MinibatchSgd>;

// alpha_{n,N} * (sum_l g_l g_l^T - g g^T), g = sum_l g_l, with
// alpha = N^2/n (1 - 1/N) with replacement and N^2/n (1 - n/N) without.
inline SymMatrix minibatch_covariance(const Matrix& per_example_grads,
                                      const Vector& full_grad, Index n, Index N,
                                      bool replacement) {
  const std::string op = "minibatch_covariance";
  if (n <= 0 || N <= 0) throw InvalidArgument(op, "n and N must be positive");
  if (n > N) {
    throw BatchLargerThanDataset(op, "batch size " + std::to_string(n) +
                                         " exceeds dataset size " + std::to_string(N));
  }
  if (per_example_grads.rows() != N || per_example_grads.cols() != full_grad.size()) {
    throw DimensionMismatch(op, "per-example gradients must be N x d");
  }
  const Vector col_sum = per_example_grads.colwise().sum().transpose();
  if ((col_sum - full_grad).norm() > 1e-9 * std::max(1.0, full_grad.norm())) {
    throw InvalidArgument(op, "full gradient must equal the sum of per-example gradients");
  }
  const double nn = static_cast<double>(n);
  const double big = static_cast<double>(N);
  const double alpha = replacement ? big * big / nn * (1.0 - 1.0 / big)
                                   : big * big / nn * (1.0 - nn / big);
  Matrix m = per_example_grads.transpose() * per_example_grads -
             full_grad * full_grad.transpose();
  m *= alpha;
  return SymMatrix(Matrix(0.5 * (m + m.transpose())));
}

// Eigenvalues clamped below at floor; the nearest (Frobenius) matrix whose
// spectrum is bounded below by floor.
inline SymMatrix psd_project(const SymMatrix& m, double floor) {
  if (!(floor >= 0.0)) throw InvalidArgument("psd_project", "floor must be >= 0");
  return SymMatrix(apply_spectral(sym_eigen(m),
                                  [floor](double v) { return std::max(v, floor); }));
}

inline Matrix evaluate_covariance(const CovarianceSpec& cov, const Vector& x) {
  Matrix out = std::visit(
      [&](const auto& c) -> Matrix {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, ConstantSpd>) {
          return c.cov.matrix();
        } else if constexpr (std::is_same_v<T, DiagonalOfState>) {
          const Vector v = c.variances(x);
          if (v.size() != x.size()) {
            throw DimensionMismatch("evaluate_covariance", "variance vector has wrong length");
          }
          return v.asDiagonal();
        } else {
          const Matrix g = c.per_example_grads(x);
          if (!g.allFinite()) {
            throw CovarianceEvaluationFailed("evaluate_covariance",
                                             "non-finite per-example gradient");
          }
          const Vector full = g.colwise().sum().transpose();
          return psd_project(minibatch_covariance(g, full, c.batch_size,
                                                  c.dataset_size, c.replacement),
                             c.psd_floor)
              .matrix();
        }
      },
      cov);
  if (!out.allFinite()) {
    throw CovarianceEvaluationFailed("evaluate_covariance", "Sigma(x) is not finite");
  }
  return out;
}

// Lower-triangular (or symmetric, for semidefinite input) S with S S^T = Sigma.
inline Matrix covariance_sqrt(const CovarianceSpec& cov, const Vector& x) {
  if (const auto* c = std::get_if<ConstantSpd>(&cov)) {
    return c->cov.is_positive_definite() ? c->cov.lower() : psd_sqrt(c->cov.sym());
  }
  if (const auto* c = std::get_if<DiagonalOfState>(&cov)) {
    const Vector v = c->variances(x);
    if (v.size() != x.size() || !v.allFinite() || v.minCoeff() < 0.0) {
      throw CovarianceEvaluationFailed("covariance_sqrt",
                                       "diagonal variances must be finite and >= 0");
    }
    return Matrix(v.cwiseSqrt().asDiagonal());
  }
  const auto& mb = std::get<MinibatchSgd>(cov);
  const Matrix sigma = evaluate_covariance(cov, x);
  if (auto lower = internal::try_cholesky(sigma)) return *lower;
  if (mb.strict) {
    throw CovarianceEvaluationFailed("covariance_sqrt",
                                     "PSD projection is not positive definite");
  }
  return psd_sqrt(SymMatrix(sigma));
}

struct SimConfig {
  double step = 1e-3;
  double horizon = 1.0;
  Index paths = 1;
  std::uint64_t seed = 0;
  Index record_stride = 1;

  Index steps() const { return static_cast<Index>(std::llround(horizon / step)); }

  void validate() const {
    const std::string op = "SimConfig";
    if (!(step > 0.0) || !(horizon > 0.0)) throw InvalidArgument(op, "step and horizon must be positive");
    if (step > horizon) throw InvalidArgument(op, "step must not exceed horizon");
    const double ratio = horizon / step;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio)) {
      throw InvalidArgument(op, "horizon / step must be an integer");
    }
    if (paths <= 0) throw InvalidArgument(op, "paths must be positive");
    if (record_stride <= 0) throw InvalidArgument(op, "record_stride must be positive");
  }
};

// Recorded sample paths: states(path, record) is a d-vector.
class TrajectoryEnsemble {
 public:
  TrajectoryEnsemble(std::vector<double> times, Index paths, Index dim,
                     std::uint64_t seed)
      : times_(std::move(times)), paths_(paths), dim_(dim), seed_(seed),
        data_(static_cast<std::size_t>(paths * dim) * times_.size(), 0.0) {}

  const std::vector<double>& times() const { return times_; }
  Index paths() const { return paths_; }
  Index dim() const { return dim_; }
  Index records() const { return static_cast<Index>(times_.size()); }
  std::uint64_t seed() const { return seed_; }

  Eigen::Map<const Vector> state(Index path, Index record) const {
    return Eigen::Map<const Vector>(data_.data() + offset(path, record), dim_);
  }
  Eigen::Map<Vector> state(Index path, Index record) {
    return Eigen::Map<Vector>(data_.data() + offset(path, record), dim_);
  }

  bool operator==(const TrajectoryEnsemble& o) const {
    return times_ == o.times_ && paths_ == o.paths_ && dim_ == o.dim_ && data_ == o.data_;
  }

  // Columns path,time,x0..x{d-1}; one row per (path, recorded time).
  void write_csv(std::ostream& out) const {
    std::vector<std::string> header{"path", "time"};
    for (Index j = 0; j < dim_; ++j) header.push_back("x" + std::to_string(j));
    write_csv_header(out, header);
    for (Index p = 0; p < paths_; ++p) {
      for (Index r = 0; r < records(); ++r) {
        out << p << ',' << format_double(times_[r]);
        auto s = state(p, r);
        for (Index j = 0; j < dim_; ++j) out << ',' << format_double(s(j));
        out << '\n';
      }
    }
  }

 private:
  std::size_t offset(Index path, Index record) const {
    return static_cast<std::size_t>((path * records() + record) * dim_);
  }

  std::vector<double> times_;
  Index paths_;
  Index dim_;
  std::uint64_t seed_;
  std::vector<double> data_;
};

namespace internal {

inline std::vector<Index> recorded_steps(const SimConfig& cfg) {
  std::vector<Index> out;
  const Index n = cfg.steps();
  for (Index k = 0; k <= n; k += cfg.record_stride) out.push_back(k);
  if (out.back() != n) out.push_back(n);
  return out;
}

}  // namespace internal

// x_{k+1} = x_k + h b(x_k) + sqrt(h) Sigma^{1/2}(x_k) xi_k.
inline TrajectoryEnsemble simulate(const DriftSpec& drift, const CovarianceSpec& cov,
                                   const Vector& x0, const SimConfig& cfg) {
  cfg.validate();
  const Index d = x0.size();
  if (d == 0) throw InvalidArgument("simulate", "x0 is empty");
  if (const auto* c = std::get_if<ConstantSpd>(&cov); c && c->cov.dim() != d) {
    throw DimensionMismatch("simulate", "covariance dimension differs from x0");
  }
  const std::vector<Index> rec_steps = internal::recorded_steps(cfg);
  std::vector<double> times;
  for (Index k : rec_steps) times.push_back(static_cast<double>(k) * cfg.step);
  TrajectoryEnsemble ens(std::move(times), cfg.paths, d, cfg.seed);

  // Constant diffusion factors are computed once.
  std::optional<Matrix> constant_sqrt;
  if (std::holds_alternative<ConstantSpd>(cov)) constant_sqrt = covariance_sqrt(cov, x0);

  const double h = cfg.step;
  const double sqrt_h = std::sqrt(h);
  const Index n = cfg.steps();
  parallel_for(static_cast<std::size_t>(cfg.paths), [&](std::size_t path_index) {
    const auto path = static_cast<Index>(path_index);
    Vector x = x0;
    Vector xi(d);
    std::size_t next_record = 0;
    ens.state(path, 0) = x;
    ++next_record;
    for (Index k = 0; k < n; ++k) {
      for (Index j = 0; j < d; ++j) {
        xi(j) = standard_normal(cfg.seed, path_index, static_cast<std::uint64_t>(k),
                                static_cast<std::uint64_t>(j));
      }
      const Vector b = evaluate_drift(drift, x);
      if (constant_sqrt) {
        x += h * b + sqrt_h * (*constant_sqrt * xi);
      } else {
        x += h * b + sqrt_h * (covariance_sqrt(cov, x) * xi);
      }
      if (next_record < rec_steps.size() && rec_steps[next_record] == k + 1) {
        ens.state(path, static_cast<Index>(next_record)) = x;
        ++next_record;
      }
    }
  });
  return ens;
}

// Both ensembles consume identical increments per (path, step, coordinate).
inline std::pair<TrajectoryEnsemble, TrajectoryEnsemble> paired_simulate(
    const DriftSpec& drift_a, const DriftSpec& drift_b, const CovarianceSpec& cov,
    const Vector& x0, const SimConfig& cfg) {
  return {simulate(drift_a, cov, x0, cfg), simulate(drift_b, cov, x0, cfg)};
}

}  // namespace aniso

#endif  // ANISO_SDE_HPP_
