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

// Empirical privacy audit: estimate delta at a fixed epsilon from paired
// trainings on adjacent datasets, and the membership-distinguishability
// experiment on a single target point.

#ifndef ANISO_DP_ESTIMATOR_HPP_
#define ANISO_DP_ESTIMATOR_HPP_

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aniso/csv.hpp"
#include "aniso/errors.hpp"
#include "aniso/parallel.hpp"
#include "aniso/random.hpp"
#include "aniso/toy_models.hpp"

namespace aniso {

inline constexpr double kProbabilityClamp = 1e-12;

enum class AdjacencyMode {
  kReplace,    // row j becomes a copy of another random row
  kRemove,     // row j dropped
  kIdentical,  // D' = D, the null control
};

inline std::string to_string(AdjacencyMode m) {
  switch (m) {
    case AdjacencyMode::kReplace: return "replace";
    case AdjacencyMode::kRemove: return "remove";
    case AdjacencyMode::kIdentical: return "identical";
  }
  return "replace";
}

inline AdjacencyMode parse_adjacency(const std::string& s) {
  if (s == "replace") return AdjacencyMode::kReplace;
  if (s == "remove") return AdjacencyMode::kRemove;
  if (s == "identical") return AdjacencyMode::kIdentical;
  throw InvalidArgument("parse_adjacency", "unknown adjacency mode '" + s + "'");
}

// Architecture plus optimizer settings; the training seed is set per run.
struct ModelSettings {
  Index hidden = 10;
  Activation activation = Activation::kReLU;
  TrainConfig train;
};

struct AuditConfig {
  double epsilon = 0.1;
  Index T1 = 1;
  Index T2 = 1;
  ModelSettings model;
  Dataset base;
  AdjacencyMode adjacency = AdjacencyMode::kReplace;
  std::uint64_t master_seed = 0;

  void validate() const {
    const std::string op = "estimate_delta";
    if (!(epsilon > 0.0)) throw InvalidArgument(op, "epsilon must be positive");
    if (T1 < 1 || T2 < 1) throw InvalidArgument(op, "T1 and T2 must be positive");
    if (model.hidden < 1) throw InvalidArgument(op, "hidden width must be positive");
    base.validate(op);
    if (adjacency == AdjacencyMode::kReplace && base.size() < 2) {
      throw InvalidArgument(op, "replace adjacency needs at least two rows");
    }
    const Index smallest = adjacency == AdjacencyMode::kRemove ? base.size() - 1 : base.size();
    model.train.validate(smallest);
  }
};

struct AuditReport {
  std::vector<double> delta_per_outer;
  double delta = 0.0;
  std::vector<Index> counts;             // threshold exceedances per outer round
  std::vector<Index> adjacency_index;    // the j chosen per outer round
  std::vector<Index> valid_inner;        // inner rounds with no divergence
  Index total_comparisons = 0;
  Index excluded_runs = 0;
  double worst_loss = 0.0;               // max training loss over all iterations and runs
  double worst_final_train_loss = 0.0;   // max over runs of the final full-data loss
  double runtime_seconds = 0.0;

  nlohmann::json to_json() const {
    return {{"delta_per_outer", delta_per_outer},
            {"delta", delta},
            {"counts", counts},
            {"adjacency_index", adjacency_index},
            {"valid_inner", valid_inner},
            {"total_comparisons", total_comparisons},
            {"excluded_runs", excluded_runs},
            {"worst_loss", worst_loss},
            {"worst_final_train_loss", worst_final_train_loss},
            {"runtime_seconds", runtime_seconds}};
  }
};

namespace internal {

inline constexpr std::uint64_t kAdjacencyStream = 16;

inline Index uniform_index(std::uint64_t seed, std::uint64_t step, std::uint64_t slot, Index n) {
  const double u = uniform_open01(seed, kAdjacencyStream, step, slot);
  return std::min(n - 1, static_cast<Index>(u * static_cast<double>(n)));
}

// Adjacent dataset for outer round t1 and the index it touches.
inline std::pair<Dataset, Index> outer_adjacent(const AuditConfig& cfg, Index t1) {
  const Dataset& d = cfg.base;
  const auto step = static_cast<std::uint64_t>(t1);
  const Index j = uniform_index(cfg.master_seed, step, 0, d.size());
  switch (cfg.adjacency) {
    case AdjacencyMode::kIdentical:
      return {d, j};
    case AdjacencyMode::kRemove:
      return {make_adjacent(d, j, Removal{}), j};
    case AdjacencyMode::kReplace: {
      Index k = uniform_index(cfg.master_seed, step, 1, d.size() - 1);
      if (k >= j) ++k;
      return {make_adjacent(d, j, Replacement{{d.features.row(k).transpose(), d.labels[k]}}), j};
    }
  }
  return {d, j};
}

inline TrainResult train_run(const ModelSettings& s, const Dataset& d, int classes,
                             std::uint64_t seed) {
  const MlpModel init = MlpModel::initialize(d.dim(), s.hidden, classes, s.activation, seed);
  TrainConfig cfg = s.train;
  cfg.seed = seed;
  return train(init, d, cfg);
}

// Probabilities clamped to [1e-12, 1] before the log.
inline double clamped_log(double p) { return std::log(std::clamp(p, kProbabilityClamp, 1.0)); }

}  // namespace internal

// Both arms of inner round (t1, t2) train from the seed derived from
// (master_seed, t1, t2), so they share initialization, batches and noise.
inline AuditReport estimate_delta(const AuditConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  cfg.validate();
  const Dataset& d = cfg.base;
  const int classes = std::max(2, d.num_classes());
  const Index N = d.size();

  std::vector<std::pair<Dataset, Index>> adjacent;
  for (Index t1 = 0; t1 < cfg.T1; ++t1) adjacent.push_back(internal::outer_adjacent(cfg, t1));

  struct Inner {
    Index count = 0;
    bool valid = true;
    double worst_loss = -std::numeric_limits<double>::infinity();
    double final_loss = -std::numeric_limits<double>::infinity();
  };
  std::vector<Inner> inner(static_cast<std::size_t>(cfg.T1 * cfg.T2));
  parallel_for(inner.size(), [&](std::size_t k) {
    const Index t1 = static_cast<Index>(k) / cfg.T2;
    const Index t2 = static_cast<Index>(k) % cfg.T2;
    const std::uint64_t seed = derive_seed(cfg.master_seed, {static_cast<std::uint64_t>(t1),
                                                             static_cast<std::uint64_t>(t2)});
    const TrainResult a = internal::train_run(cfg.model, d, classes, seed);
    const TrainResult b = internal::train_run(cfg.model, adjacent[t1].first, classes, seed);
    Inner& out = inner[k];
    if (a.diverged || b.diverged) {
      out.valid = false;
      return;
    }
    out.worst_loss = std::max(a.worst_loss(), b.worst_loss());
    out.final_loss = std::max(loss_and_grad(a.model, d).loss,
                              loss_and_grad(b.model, adjacent[t1].first).loss);
    const Matrix pa = forward(a.model, d.features);
    const Matrix pb = forward(b.model, d.features);
    for (Index i = 0; i < N; ++i) {
      const int c = d.labels[i];
      if (internal::clamped_log(pa(i, c)) - internal::clamped_log(pb(i, c)) > cfg.epsilon) ++out.count;
    }
  });

  AuditReport r;
  r.worst_loss = -std::numeric_limits<double>::infinity();
  r.worst_final_train_loss = -std::numeric_limits<double>::infinity();
  for (Index t1 = 0; t1 < cfg.T1; ++t1) {
    Index count = 0;
    Index valid = 0;
    for (Index t2 = 0; t2 < cfg.T2; ++t2) {
      const Inner& x = inner[t1 * cfg.T2 + t2];
      if (!x.valid) {
        ++r.excluded_runs;
        continue;
      }
      ++valid;
      count += x.count;
      r.worst_loss = std::max(r.worst_loss, x.worst_loss);
      r.worst_final_train_loss = std::max(r.worst_final_train_loss, x.final_loss);
    }
    r.counts.push_back(count);
    r.valid_inner.push_back(valid);
    r.adjacency_index.push_back(adjacent[t1].second);
    r.total_comparisons += valid * N;
    r.delta_per_outer.push_back(valid == 0 ? 0.0
                                           : static_cast<double>(count) /
                                                 static_cast<double>(valid * N));
  }
  r.delta = *std::max_element(r.delta_per_outer.begin(), r.delta_per_outer.end());
  r.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

struct MembershipResult {
  std::vector<double> loss_d;        // loss on the target, model trained on D
  std::vector<double> loss_dprime;   // loss on the target, model trained on D'
  double mean_gap = 0.0;
  double worst_loss = 0.0;
  Index excluded_runs = 0;

  nlohmann::json summary_json() const {
    return {{"runs", loss_d.size()},
            {"mean_gap", mean_gap},
            {"worst_loss", worst_loss},
            {"excluded_runs", excluded_runs}};
  }

  // Columns run,arm,loss_on_target with arm D or Dprime.
  void write_csv(std::ostream& out) const {
    write_csv_header(out, {"run", "arm", "loss_on_target"});
    for (std::size_t r = 0; r < loss_d.size(); ++r) {
      out << r << ",D," << format_double(loss_d[r]) << '\n';
      out << r << ",Dprime," << format_double(loss_dprime[r]) << '\n';
    }
  }
};

// R paired trainings on D and D minus the target (or D itself when
// remove_target is false).
inline MembershipResult membership_experiment(const Dataset& base, Index target, Index runs,
                                              const ModelSettings& settings, std::uint64_t seed,
                                              bool remove_target = true) {
  const std::string op = "membership_experiment";
  base.validate(op);
  if (runs < 2) throw InvalidArgument(op, "runs must be at least 2");
  if (target < 0 || target >= base.size()) throw IndexOutOfRange(op, "target index out of range");
  const Dataset dprime = remove_target ? make_adjacent(base, target, Removal{}) : base;
  settings.train.validate(dprime.size());
  const int classes = std::max(2, base.num_classes());
  const Matrix x = base.features.row(target);
  const std::vector<int> y{base.labels[target]};

  struct Run {
    double loss_d, loss_dprime, worst;
    bool valid;
  };
  std::vector<Run> out(static_cast<std::size_t>(runs));
  parallel_for(out.size(), [&](std::size_t r) {
    const std::uint64_t s = derive_seed(seed, {static_cast<std::uint64_t>(r)});
    const TrainResult a = internal::train_run(settings, base, classes, s);
    const TrainResult b = internal::train_run(settings, dprime, classes, s);
    out[r] = {per_example_loss(a.model, x, y)(0), per_example_loss(b.model, x, y)(0),
              std::max(a.worst_loss(), b.worst_loss()), !a.diverged && !b.diverged};
  });
  MembershipResult m;
  m.worst_loss = -std::numeric_limits<double>::infinity();
  for (const Run& r : out) {
    if (!r.valid) {
      ++m.excluded_runs;
      continue;
    }
    m.loss_d.push_back(r.loss_d);
    m.loss_dprime.push_back(r.loss_dprime);
    m.worst_loss = std::max(m.worst_loss, r.worst);
  }
  if (m.loss_d.empty()) throw InvalidArgument(op, "every run diverged");
  double sa = 0.0;
  double sb = 0.0;
  for (std::size_t i = 0; i < m.loss_d.size(); ++i) {
    sa += m.loss_d[i];
    sb += m.loss_dprime[i];
  }
  m.mean_gap = std::abs(sa - sb) / static_cast<double>(m.loss_d.size());
  return m;
}

}  // namespace aniso

#endif  // ANISO_DP_ESTIMATOR_HPP_
