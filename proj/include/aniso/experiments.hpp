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

// Experiment configs (JSON) and the runner behind the `aniso` command line.
//
// A config is {schema_version, experiment: {type, ...}, output_dir, seed}.
// Parsing collects every problem it finds as (path, message) pairs; a config
// with no problems becomes a Plan that can be described (validate) or
// executed (run).

#ifndef ANISO_EXPERIMENTS_HPP_
#define ANISO_EXPERIMENTS_HPP_

#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "aniso/cov_optimizer.hpp"
#include "aniso/csv.hpp"
#include "aniso/dp_estimator.hpp"
#include "aniso/errors.hpp"
#include "aniso/kl_bounds.hpp"
#include "aniso/matrix.hpp"
#include "aniso/ou.hpp"
#include "aniso/privacy.hpp"
#include "aniso/sde.hpp"
#include "aniso/toy_models.hpp"

#ifndef ANISO_VERSION
#define ANISO_VERSION "0.0.0"
#endif

namespace aniso::cli {

using nlohmann::json;
namespace fs = std::filesystem;

inline constexpr int kSchemaVersion = 1;

struct Issue {
  std::string path;
  std::string message;
};

// Typed, path-aware access to one JSON object. Every key read is marked as
// known; finish() reports the rest.
class Node {
 public:
  Node(const json& j, std::string path, std::vector<Issue>* issues)
      : j_(j), path_(std::move(path)), issues_(issues) {
    if (!j_.is_object()) fail(path_, "must be an object");
  }

  const std::string& path() const { return path_; }
  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return j_.is_object() && j_.contains(key); }
  void fail(const std::string& path, const std::string& message) const {
    issues_->push_back({path, message});
  }
  std::vector<Issue>* issues() const { return issues_; }

  template <typename T>
  T req(const std::string& key) {
    seen_.insert(key);
    if (!has(key)) {
      fail(at(key), "required key is missing");
      return T{};
    }
    return convert<T>(j_.at(key), at(key)).value_or(T{});
  }

  template <typename T>
  T opt(const std::string& key, T fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    return convert<T>(j_.at(key), at(key)).value_or(fallback);
  }

  std::optional<Node> child(const std::string& key, bool required = true) {
    seen_.insert(key);
    if (!has(key)) {
      if (required) fail(at(key), "required key is missing");
      return std::nullopt;
    }
    if (!j_.at(key).is_object()) {
      fail(at(key), "must be an object");
      return std::nullopt;
    }
    return Node(j_.at(key), at(key), issues_);
  }

  void finish() const {
    if (!j_.is_object()) return;
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) fail(at(key), "unknown key");
    }
  }

 private:
  template <typename T>
  std::optional<T> convert(const json& v, const std::string& path) const;

  const json& j_;
  std::string path_;
  std::vector<Issue>* issues_;
  std::set<std::string> seen_;
};

template <>
inline std::optional<double> Node::convert<double>(const json& v, const std::string& path) const {
  if (v.is_number()) return v.get<double>();
  if (v.is_string() && (v == "inf" || v == "infinity")) return kInfiniteTime;
  fail(path, "must be a number");
  return std::nullopt;
}

template <>
inline std::optional<Index> Node::convert<Index>(const json& v, const std::string& path) const {
  if (v.is_number_integer()) return v.get<Index>();
  fail(path, "must be an integer");
  return std::nullopt;
}

template <>
inline std::optional<std::uint64_t> Node::convert<std::uint64_t>(const json& v,
                                                                 const std::string& path) const {
  if (v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    return v.get<std::uint64_t>();
  }
  fail(path, "must be a nonnegative integer");
  return std::nullopt;
}

template <>
inline std::optional<bool> Node::convert<bool>(const json& v, const std::string& path) const {
  if (v.is_boolean()) return v.get<bool>();
  fail(path, "must be a boolean");
  return std::nullopt;
}

template <>
inline std::optional<std::string> Node::convert<std::string>(const json& v,
                                                             const std::string& path) const {
  if (v.is_string()) return v.get<std::string>();
  fail(path, "must be a string");
  return std::nullopt;
}

template <>
inline std::optional<std::vector<double>> Node::convert<std::vector<double>>(
    const json& v, const std::string& path) const {
  if (!v.is_array()) {
    fail(path, "must be an array of numbers");
    return std::nullopt;
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    auto x = convert<double>(v[i], path + "[" + std::to_string(i) + "]");
    if (!x) return std::nullopt;
    out.push_back(*x);
  }
  return out;
}

template <>
inline std::optional<Vector> Node::convert<Vector>(const json& v, const std::string& path) const {
  auto xs = convert<std::vector<double>>(v, path);
  if (!xs) return std::nullopt;
  if (xs->empty()) {
    fail(path, "must not be empty");
    return std::nullopt;
  }
  return Eigen::Map<const Vector>(xs->data(), static_cast<Index>(xs->size()));
}

template <>
inline std::optional<Matrix> Node::convert<Matrix>(const json& v, const std::string& path) const {
  if (!v.is_array() || v.empty()) {
    fail(path, "must be a non-empty array of rows");
    return std::nullopt;
  }
  std::vector<Vector> rows;
  for (std::size_t i = 0; i < v.size(); ++i) {
    auto r = convert<Vector>(v[i], path + "[" + std::to_string(i) + "]");
    if (!r) return std::nullopt;
    if (!rows.empty() && r->size() != rows.front().size()) {
      fail(path, "rows must have equal length");
      return std::nullopt;
    }
    rows.push_back(*r);
  }
  Matrix m(static_cast<Index>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Index>(i)) = rows[i].transpose();
  return m;
}

// Files written by a plan, relative to output_dir.
using Writer = std::function<std::vector<std::string>(const fs::path&)>;

struct Plan {
  std::string type;
  std::uint64_t seed = 0;
  fs::path output_dir;
  json derived = json::object();
  Writer execute;
};

namespace internal {

inline json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline json to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) rows.push_back(to_json(Vector(m.row(i).transpose())));
  return rows;
}

inline json state_json(const GaussianState& s) {
  return {{"time", std::isinf(s.time) ? json("inf") : json(s.time)},
          {"mean", to_json(s.mean)},
          {"cov", to_json(s.cov.matrix())}};
}

inline void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out = open_output(path.string());
  out << content;
  if (!out) throw InvalidArgument("write_file", "failed writing " + path.string());
}

template <typename Fn>
std::string render(Fn&& fn) {
  std::ostringstream out;
  fn(out);
  return out.str();
}

// Runs fn; any library error becomes an issue at `path`.
template <typename Fn>
bool checked(Node& n, const std::string& path, Fn&& fn) {
  try {
    fn();
    return true;
  } catch (const Error& e) {
    n.fail(path, e.what());
    return false;
  }
}

inline void require_positive(Node& n, const std::string& key, double v) {
  if (!(v > 0.0)) n.fail(n.at(key), "must be positive");
}

inline void require_positive(Node& n, const std::string& key, Index v) {
  if (v < 1) n.fail(n.at(key), "must be a positive integer");
}

inline std::optional<SpdMatrix> read_spd(Node& n, const std::string& key, bool relaxed = false,
                                         bool required = true) {
  if (!required && !n.has(key)) {
    n.opt<Matrix>(key, Matrix());
    return std::nullopt;
  }
  const Matrix m = n.req<Matrix>(key);
  if (m.size() == 0) return std::nullopt;
  std::optional<SpdMatrix> out;
  checked(n, n.at(key), [&] { out = relaxed ? SpdMatrix::psd_relaxed(m) : SpdMatrix(m); });
  return out;
}

inline SimConfig read_sim(Node& n, std::uint64_t seed) {
  const std::size_t before = n.issues()->size();
  SimConfig c;
  c.step = n.req<double>("step");
  c.horizon = n.req<double>("horizon");
  c.paths = n.req<Index>("paths");
  c.record_stride = n.opt<Index>("record_stride", 1);
  c.seed = seed;
  if (n.issues()->size() == before) checked(n, n.path(), [&] { c.validate(); });
  return c;
}

// Problems are counted so that parsers only build objects from clean input.
class IssueMark {
 public:
  explicit IssueMark(const Node& n) : issues_(n.issues()), start_(issues_->size()) {}
  bool clean() const { return issues_->size() == start_; }

 private:
  std::vector<Issue>* issues_;
  std::size_t start_;
};

// B, b, sigma and x0 under the given key prefix (e.g. "" or "_prime").
inline std::optional<QuadraticProblem> read_problem(Node& n, bool with_v0) {
  const IssueMark mark(n);
  QuadraticProblem p;
  p.B = n.req<Matrix>("B");
  p.b = n.req<Vector>("b");
  auto sigma = read_spd(n, "sigma");
  p.x0 = n.req<Vector>("x0");
  if (with_v0) p.v0 = read_spd(n, "v0", /*relaxed=*/true, /*required=*/false);
  if (!mark.clean() || !sigma) return std::nullopt;
  p.sigma = *sigma;
  if (!checked(n, n.path(), [&] { p.validate(); })) return std::nullopt;
  return p;
}

inline std::vector<double> read_times(Node& n, const std::string& key, std::vector<double> fallback) {
  const auto times = n.opt<std::vector<double>>(key, std::move(fallback));
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] >= 0.0)) n.fail(n.at(key) + "[" + std::to_string(i) + "]", "must be >= 0");
  }
  return times;
}

inline std::optional<AxisRange> read_range(Node& n, const std::string& key) {
  const auto r = n.req<std::vector<double>>(key);
  if (r.empty() && !n.has(key)) return std::nullopt;
  if (r.size() != 2 || !(r[0] > 0.0) || !(r[1] >= r[0])) {
    n.fail(n.at(key), "must be [lo, hi] with 0 < lo <= hi");
    return std::nullopt;
  }
  return AxisRange{r[0], r[1]};
}

inline std::optional<Dataset> read_dataset(Node& parent, std::uint64_t seed, const fs::path& base_dir) {
  auto n = parent.child("dataset");
  if (!n) return std::nullopt;
  const IssueMark mark(*n);
  const auto kind = n->req<std::string>("kind");
  std::optional<Dataset> out;
  if (kind == "blobs") {
    const Index classes = n->req<Index>("classes");
    const Index per_class = n->req<Index>("per_class");
    const Index dim = n->req<Index>("dim");
    const double separation = n->req<double>("separation");
    const std::uint64_t data_seed = n->opt<std::uint64_t>("seed", seed);
    if (mark.clean()) {
      checked(*n, n->path(), [&] {
        out = synth_blobs(static_cast<int>(classes), per_class, dim, separation, data_seed);
      });
    }
  } else if (kind == "csv") {
    const auto rel = n->req<std::string>("path");
    if (mark.clean()) {
      const fs::path path = base_dir / rel;
      std::ifstream in(path);
      if (!in) {
        n->fail(n->at("path"), "cannot open " + path.string());
      } else {
        checked(*n, n->at("path"), [&] { out = read_dataset_csv(in, path.stem().string()); });
      }
    }
  } else if (mark.clean()) {
    n->fail(n->at("kind"), "must be \"blobs\" or \"csv\"");
  }
  n->finish();
  return out;
}

inline ModelSettings read_model(Node& parent) {
  ModelSettings s;
  if (auto m = parent.child("model", /*required=*/false)) {
    s.hidden = m->opt<Index>("hidden", 10);
    require_positive(*m, "hidden", s.hidden);
    const auto act = m->opt<std::string>("activation", "relu");
    checked(*m, m->at("activation"), [&] { s.activation = parse_activation(act); });
    m->finish();
  }
  auto t = parent.child("train");
  if (!t) return s;
  const auto scheme = t->req<std::string>("scheme");
  if (scheme == "none") {
    s.train.scheme = NoNoise{};
    t->opt<double>("sigma2", 0.0);
  } else if (scheme == "isotropic" || scheme == "anisotropic") {
    const double sigma2 = t->req<double>("sigma2");
    if (!(sigma2 > 0.0)) t->fail(t->at("sigma2"), "must be positive");
    s.train.scheme = scheme == "isotropic" ? NoiseScheme{IsotropicPerLayer{sigma2}}
                                           : NoiseScheme{AnisotropicPerParam{sigma2}};
  } else if (t->has("scheme")) {
    t->fail(t->at("scheme"), "must be \"none\", \"isotropic\" or \"anisotropic\"");
  }
  s.train.lr = t->req<double>("lr");
  require_positive(*t, "lr", s.train.lr);
  s.train.iters = t->req<Index>("iters");
  require_positive(*t, "iters", s.train.iters);
  s.train.batch = t->req<Index>("batch");
  require_positive(*t, "batch", s.train.batch);
  const auto on = t->opt<std::string>("noise_on", "step");
  if (on == "step") {
    s.train.noise_on = NoiseOn::kStep;
  } else if (on == "full_gradient") {
    s.train.noise_on = NoiseOn::kFullGradient;
  } else {
    t->fail(t->at("noise_on"), "must be \"step\" or \"full_gradient\"");
  }
  t->finish();
  return s;
}

// Batch-size precondition of training, reported at experiment.train.batch.
inline void check_batch(Node& e, const ModelSettings& s, Index dataset_size) {
  if (s.train.batch > dataset_size) {
    e.fail(e.at("train.batch"), "batch " + std::to_string(s.train.batch) +
                                    " exceeds the training set size " +
                                    std::to_string(dataset_size) + " (requires batch <= N)");
  }
}

inline void parse_simulate(Node& e, Plan& plan, const fs::path&) {
  const IssueMark mark(e);
  const Matrix B = e.req<Matrix>("B");
  const Vector b = e.req<Vector>("b");
  const auto sigma = read_spd(e, "sigma", /*relaxed=*/true);
  const Vector x0 = e.req<Vector>("x0");
  const SimConfig sim = read_sim(e, plan.seed);
  if (!mark.clean()) return;
  if (B.cols() != x0.size() || B.rows() != b.size() || sigma->dim() != x0.size()) {
    e.fail(e.path(), "B must be m x d with b of length m, x0 of length d and sigma d x d");
    return;
  }
  const QuadraticDrift drift(B, b);
  const ConstantSpd cov{*sigma};
  plan.derived = json{{"steps", sim.steps()},
                  {"records", static_cast<Index>(aniso::internal::recorded_steps(sim).size())},
                  {"paths", sim.paths},
                  {"dim", x0.size()}};
  plan.execute = [=](const fs::path& dir) {
    const auto ens = simulate(drift, cov, x0, sim);
    write_file(dir / "trajectories.csv", render([&](std::ostream& o) { ens.write_csv(o); }));
    return std::vector<std::string>{"trajectories.csv"};
  };
}

inline CovarianceForm read_form(Node& e) {
  const auto form = e.opt<std::string>("form", "auto");
  if (form == "closed_form") return CovarianceForm::kClosedForm;
  if (form == "quadrature") return CovarianceForm::kQuadrature;
  if (form != "auto") e.fail(e.at("form"), "must be \"auto\", \"closed_form\" or \"quadrature\"");
  return CovarianceForm::kAuto;
}

inline void parse_ou_exact(Node& e, Plan& plan, const fs::path&) {
  const auto p = read_problem(e, /*with_v0=*/true);
  const auto times = read_times(e, "times", {});
  if (!e.has("times")) e.fail(e.at("times"), "required key is missing");
  const CovarianceForm form = read_form(e);
  const bool invariant = e.opt<bool>("invariant", true);
  if (!p) return;
  const bool reversible = check_reversibility(SpdMatrix(p->btb()), p->sigma);
  if (form == CovarianceForm::kClosedForm && !reversible) {
    e.fail(e.at("form"), "closed form requested but B^T B and sigma do not commute");
  }
  plan.derived = json{{"times", times.size()},
                  {"reversible", reversible},
                  {"covariance", (form == CovarianceForm::kQuadrature || !reversible) ? "quadrature"
                                                                                       : "closed_form"},
                  {"invariant", invariant}};
  plan.execute = [=](const fs::path& dir) {
    json states = json::array();
    json errors = json::array();
    for (double t : times) {
      states.push_back(state_json(std::isinf(t) ? invariant_state(*p, form) : exact_state(*p, t, form)));
      errors.push_back(error_to_opt(*p, t));
    }
    json out = {{"reversible", reversible}, {"states", states}, {"error_to_opt", errors}};
    if (invariant) out["invariant"] = state_json(invariant_state(*p, form));
    write_file(dir / "gaussian_state.json", out.dump(2) + "\n");
    return std::vector<std::string>{"gaussian_state.json"};
  };
}

inline void parse_kl_bound(Node& e, Plan& plan, const fs::path&) {
  const auto p = read_problem(e, /*with_v0=*/false);
  const IssueMark mark(e);
  const Vector b_prime = e.req<Vector>("b_prime");
  const Matrix B_prime = e.opt<Matrix>("B_prime", p ? p->B : Matrix());
  const auto sigma_prime = read_spd(e, "sigma_prime", false, /*required=*/false);
  const SimConfig sim = read_sim(e, plan.seed);
  if (!p || !mark.clean()) return;
  QuadraticProblem q = *p;
  q.B = B_prime;
  q.b = b_prime;
  if (sigma_prime) q.sigma = *sigma_prime;
  if (!checked(e, e.at("b_prime"), [&] { q.validate(); })) return;
  const bool same_noise = q.sigma.matrix() == p->sigma.matrix();
  plan.derived = json{{"bound", "mc_kl_bound"},
                  {"score", same_noise ? "not needed (equal covariances)" : "gaussian, exact law of D'"},
                  {"records", static_cast<Index>(aniso::internal::recorded_steps(sim).size())},
                  {"paths", sim.paths},
                  {"reference", "gaussian_kl of exact laws"}};
  const QuadraticProblem pp = *p;
  plan.execute = [=](const fs::path& dir) {
    const QuadraticDrift da(pp.B, pp.b);
    const QuadraticDrift db(q.B, q.b);
    const ConstantSpd ca{pp.sigma};
    const ConstantSpd cb{q.sigma};
    const auto ens = simulate(da, ca, pp.x0, sim);
    ScoreSpec score = AbsentScore{};
    if (!same_noise) score = TimeVaryingGaussianScore{[q](double t) { return exact_state(q, t); }};
    const auto curve = mc_kl_bound(ens, PhiField{da, db, ca, cb, score}, ca);
    write_file(dir / "kl_bound.csv", render([&](std::ostream& o) { write_bound_csv(o, curve); }));
    std::ostringstream exact;
    write_csv_header(exact, {"time", "exact_kl", "bound", "bound_std_error"});
    for (const auto& pt : curve) {
      write_csv_row(exact, {pt.time, gaussian_kl(exact_state(pp, pt.time), exact_state(q, pt.time)),
                            pt.bound, pt.std_error});
    }
    write_file(dir / "kl_exact.csv", exact.str());
    return std::vector<std::string>{"kl_bound.csv", "kl_exact.csv"};
  };
}

inline void parse_closed_bounds(Node& e, Plan& plan, const fs::path&) {
  RegularityParams r;
  r.kappa = e.req<double>("kappa");
  r.kappa_prime = e.req<double>("kappa_prime");
  r.L = e.req<double>("L");
  r.L_prime = e.req<double>("L_prime");
  r.sigma = e.req<double>("sigma");
  r.sigma_prime = e.req<double>("sigma_prime");
  r.C0 = e.req<double>("C0");
  r.xstar = e.opt<Vector>("xstar", Vector::Zero(1));
  r.xstar_prime = e.opt<Vector>("xstar_prime", Vector::Zero(r.xstar.size()));
  const auto times = read_times(e, "times", {0.0, kInfiniteTime});
  const IssueMark mark(e);
  const double M = e.opt<double>("M", r.sigma * r.sigma / (r.sigma_prime * r.sigma_prime));
  require_positive(e, "M", M);
  std::optional<std::pair<double, double>> convergence;
  if (auto c = e.child("convergence", /*required=*/false)) {
    const double tr = c->req<double>("trace_sigma");
    const double v0 = c->req<double>("v0");
    if (!(tr >= 0.0)) c->fail(c->at("trace_sigma"), "must be >= 0");
    if (!(v0 >= 0.0)) c->fail(c->at("v0"), "must be >= 0");
    convergence = {tr, v0};
    c->finish();
  }
  if (!mark.clean() || !checked(e, e.path(), [&] { r.validate(); })) return;
  plan.derived = json{{"bounds", {"klbound_closed", "klbound_closed_remark", "klbound_stationary",
                              "lsi_constant", "xi_bound"}},
                  {"times", times.size()},
                  {"convergence_bound", convergence.has_value()}};
  plan.execute = [=](const fs::path& dir) {
    const double rho = r.sigma * r.sigma * r.kappa / 2.0;
    json lsi = json::array();
    json xi = json::array();
    json conv = json::array();
    for (double t : times) {
      const json tj = std::isinf(t) ? json("inf") : json(t);
      lsi.push_back({{"time", tj}, {"value", std::isinf(t) ? 2.0 / rho : lsi_constant(t, rho, r.C0)}});
      xi.push_back({{"time", tj}, {"value", xi_bound(t, r, M)}});
      if (convergence) {
        conv.push_back({{"time", tj},
                        {"value", convergence_bound(t, r.kappa, convergence->first, convergence->second)}});
      }
    }
    json out = {{"klbound_closed", klbound_closed(r)},
                {"klbound_closed_remark", klbound_closed(r, true)},
                {"klbound_stationary", klbound_stationary(r)},
                {"rho", rho},
                {"M", M},
                {"lsi_constant", lsi},
                {"xi_bound", xi}};
    if (convergence) out["convergence_bound"] = conv;
    write_file(dir / "bounds.json", out.dump(2) + "\n");
    return std::vector<std::string>{"bounds.json"};
  };
}

inline void parse_optimize_cov(Node& e, Plan& plan, const fs::path&) {
  const IssueMark mark(e);
  const GradientGap gap{e.req<Vector>("s")};
  const auto zetas = e.req<std::vector<double>>("zeta");
  if (!mark.clean()) return;
  if (zetas.empty()) e.fail(e.at("zeta"), "must list at least one value");
  for (std::size_t i = 0; i < zetas.size(); ++i) {
    checked(e, e.at("zeta") + "[" + std::to_string(i) + "]", [&] { optimal_diag_cov(gap, zetas[i]); });
  }
  plan.derived = json{{"solutions", zetas.size()}, {"dim", gap.s.size()}};
  plan.execute = [=](const fs::path& dir) {
    std::ostringstream out;
    std::vector<std::string> header{"zeta"};
    for (Index i = 0; i < gap.s.size(); ++i) header.push_back("v" + std::to_string(i));
    header.insert(header.end(), {"kl_term", "isotropic_kl_term", "trace"});
    write_csv_header(out, header);
    for (double z : zetas) {
      const auto opt = optimal_diag_cov(gap, z);
      std::vector<double> row{z};
      for (Index i = 0; i < gap.s.size(); ++i) row.push_back(opt.diag_sigma(i));
      row.push_back(opt.kl_term);
      row.push_back(kl_term(gap, Vector::Constant(gap.s.size(), z / static_cast<double>(gap.s.size()))));
      row.push_back(opt.accuracy_loss);
      write_csv_row(out, row);
    }
    write_file(dir / "optimal_cov.csv", out.str());
    return std::vector<std::string>{"optimal_cov.csv"};
  };
}

inline void parse_grid_surface(Node& e, Plan& plan, const fs::path&) {
  const IssueMark mark(e);
  const GradientGap gap{e.req<Vector>("s")};
  const auto xr = read_range(e, "x_range");
  const auto yr = read_range(e, "y_range");
  const Index res = e.req<Index>("resolution");
  require_positive(e, "resolution", res);
  if (!mark.clean()) return;
  if (gap.s.size() != 2) {
    e.fail(e.at("s"), "must have two entries");
    return;
  }
  checked(e, e.at("s"), [&] { gap.validate("grid_surface"); });
  plan.derived = json{{"points", res * res}};
  plan.execute = [=](const fs::path& dir) {
    const auto grid = grid_surface(gap, *xr, *yr, res);
    write_file(dir / "grid_surface.csv", render([&](std::ostream& o) { write_grid_csv(o, grid); }));
    return std::vector<std::string>{"grid_surface.csv"};
  };
}

inline void parse_quad_tradeoff(Node& e, Plan& plan, const fs::path&) {
  const IssueMark mark(e);
  const double condition = e.req<double>("condition");
  const double shift = e.req<double>("shift");
  const double t = e.req<double>("t");
  const Vector xstar = e.opt<Vector>("xstar", Vector::Ones(2));
  const auto xr = read_range(e, "x_range");
  const auto yr = read_range(e, "y_range");
  const Index res = e.req<Index>("resolution");
  require_positive(e, "resolution", res);
  std::optional<std::array<double, 3>> sweep;
  if (auto s = e.child("sweep", /*required=*/false)) {
    sweep = {s->req<double>("lo"), s->req<double>("hi"), s->req<double>("base")};
    if (!((*sweep)[0] > 0.0 && (*sweep)[1] > (*sweep)[0] && (*sweep)[2] > 0.0)) {
      s->fail(s->path(), "needs 0 < lo < hi and base > 0");
    }
    s->finish();
  }
  if (!(t >= 0.0)) e.fail(e.at("t"), "must be >= 0");
  if (!mark.clean()) return;
  std::pair<QuadraticProblem, QuadraticProblem> pair;
  if (!checked(e, e.path(), [&] { pair = conditioned_pair(condition, xstar, shift); })) return;
  plan.derived = json{{"points", res * res}, {"time", t}, {"anisotropy_ratio", sweep.has_value()}};
  plan.execute = [=](const fs::path& dir) {
    const auto rows = quadratic_tradeoff(pair.first, pair.second, t, *xr, *yr, res);
    write_file(dir / "quad_tradeoff.csv", render([&](std::ostream& o) { write_tradeoff_csv(o, rows); }));
    std::vector<std::string> files{"quad_tradeoff.csv"};
    if (sweep) {
      const double ratio =
          kl_anisotropy_ratio(pair.first, pair.second, t, (*sweep)[0], (*sweep)[1], (*sweep)[2]);
      const json summary = {{"condition", condition}, {"anisotropy_ratio", ratio}};
      write_file(dir / "quad_tradeoff_summary.json", summary.dump(2) + "\n");
      files.push_back("quad_tradeoff_summary.json");
    }
    return files;
  };
}

inline void parse_dp_audit(Node& e, Plan& plan, const fs::path& base_dir) {
  const IssueMark mark(e);
  AuditConfig c;
  c.epsilon = e.req<double>("epsilon");
  require_positive(e, "epsilon", c.epsilon);
  c.T1 = e.req<Index>("T1");
  require_positive(e, "T1", c.T1);
  c.T2 = e.req<Index>("T2");
  require_positive(e, "T2", c.T2);
  const auto adjacency = e.opt<std::string>("adjacency", "replace");
  checked(e, e.at("adjacency"), [&] { c.adjacency = parse_adjacency(adjacency); });
  const auto data = read_dataset(e, plan.seed, base_dir);
  c.model = read_model(e);
  c.master_seed = plan.seed;
  if (!mark.clean() || !data) return;
  c.base = *data;
  check_batch(e, c.model, c.adjacency == AdjacencyMode::kRemove ? c.base.size() - 1 : c.base.size());
  if (!mark.clean() || !checked(e, e.path(), [&] { c.validate(); })) return;
  plan.derived = json{{"trainings", 2 * c.T1 * c.T2},
                  {"comparisons", c.T1 * c.T2 * c.base.size()},
                  {"dataset_size", c.base.size()},
                  {"noise", scheme_name(c.model.train.scheme)}};
  plan.execute = [=](const fs::path& dir) {
    const AuditReport r = estimate_delta(c);
    json out = r.to_json();
    out["epsilon"] = c.epsilon;
    write_file(dir / "audit_report.json", out.dump(2) + "\n");
    return std::vector<std::string>{"audit_report.json"};
  };
}

inline void parse_membership(Node& e, Plan& plan, const fs::path& base_dir) {
  const IssueMark mark(e);
  const Index target = e.req<Index>("target");
  const Index runs = e.req<Index>("runs");
  if (runs < 2 && e.has("runs")) e.fail(e.at("runs"), "must be at least 2");
  const bool remove = e.opt<bool>("remove_target", true);
  const auto data = read_dataset(e, plan.seed, base_dir);
  const ModelSettings model = read_model(e);
  if (!mark.clean() || !data) return;
  if (target < 0 || target >= data->size()) {
    e.fail(e.at("target"), "must index a row of the dataset");
    return;
  }
  check_batch(e, model, remove ? data->size() - 1 : data->size());
  if (!mark.clean()) return;
  const Dataset d = *data;
  const std::uint64_t seed = plan.seed;
  plan.derived = json{{"trainings", 2 * runs}, {"histogram_rows", 2 * runs},
                  {"noise", scheme_name(model.train.scheme)}};
  plan.execute = [=](const fs::path& dir) {
    const auto m = membership_experiment(d, target, runs, model, seed, remove);
    write_file(dir / "membership.csv", render([&](std::ostream& o) { m.write_csv(o); }));
    write_file(dir / "membership_summary.json", m.summary_json().dump(2) + "\n");
    return std::vector<std::string>{"membership.csv", "membership_summary.json"};
  };
}

inline void parse_privacy_translate(Node& e, Plan& plan, const fs::path&) {
  const IssueMark mark(e);
  ConcentrationParams cp;
  cp.kl = e.req<double>("kl");
  cp.C_t = e.req<double>("C_t");
  cp.lip = e.req<double>("lip");
  const auto eps = e.opt<std::vector<double>>("epsilon", {});
  const auto deltas = e.opt<std::vector<double>>("delta", {});
  if (!mark.clean() || !checked(e, e.path(), [&] { cp.validate("privacy-translate"); })) return;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!(deltas[i] > 0.0 && deltas[i] < 1.0)) {
      e.fail(e.at("delta") + "[" + std::to_string(i) + "]", "must lie in (0, 1)");
    }
  }
  plan.derived = json{{"membership_advantage", true}, {"delta_from_eps", eps.size()},
                  {"eps_from_delta", deltas.size()}};
  plan.execute = [=](const fs::path& dir) {
    json from_eps = json::array();
    for (double x : eps) from_eps.push_back({{"epsilon", x}, {"delta", delta_from_eps(x, cp)}});
    json from_delta = json::array();
    for (double d : deltas) from_delta.push_back({{"delta", d}, {"epsilon", eps_from_delta(d, cp)}});
    const json out = {{"kl", cp.kl},
                      {"membership_advantage", membership_advantage(cp.kl)},
                      {"delta_from_eps", from_eps},
                      {"eps_from_delta", from_delta}};
    write_file(dir / "privacy.json", out.dump(2) + "\n");
    return std::vector<std::string>{"privacy.json"};
  };
}

using Parser = void (*)(Node&, Plan&, const fs::path&);

inline const std::map<std::string, Parser>& parsers() {
  static const std::map<std::string, Parser> table = {
      {"simulate", parse_simulate},           {"ou-exact", parse_ou_exact},
      {"kl-bound", parse_kl_bound},           {"closed-bounds", parse_closed_bounds},
      {"optimize-cov", parse_optimize_cov},   {"grid-surface", parse_grid_surface},
      {"quad-tradeoff", parse_quad_tradeoff}, {"dp-audit", parse_dp_audit},
      {"membership", parse_membership},       {"privacy-translate", parse_privacy_translate}};
  return table;
}

}  // namespace internal

// Parses and validates a config; paths inside it are relative to base_dir.
inline std::optional<Plan> parse_config(const json& config, const fs::path& base_dir,
                                        std::vector<Issue>& issues) {
  Node root(config, "", &issues);
  if (!config.is_object()) return std::nullopt;
  Plan plan;
  const Index version = root.req<Index>("schema_version");
  if (root.has("schema_version") && version != kSchemaVersion) {
    root.fail("schema_version", "unsupported version (expected " + std::to_string(kSchemaVersion) + ")");
  }
  plan.seed = root.req<std::uint64_t>("seed");
  const auto out = root.req<std::string>("output_dir");
  if (root.has("output_dir") && out.empty()) root.fail("output_dir", "must not be empty");
  plan.output_dir = base_dir / out;
  if (auto e = root.child("experiment")) {
    plan.type = e->req<std::string>("type");
    const auto& table = internal::parsers();
    if (const auto it = table.find(plan.type); it != table.end()) {
      it->second(*e, plan, base_dir);
      e->finish();
    } else if (e->has("type")) {
      std::string names;
      for (const auto& [name, fn] : table) names += (names.empty() ? "" : ", ") + name;
      e->fail("experiment.type", "unknown experiment '" + plan.type + "' (one of " + names + ")");
    }
  }
  root.finish();
  if (!issues.empty() || !plan.execute) return std::nullopt;
  return plan;
}

// FNV-1a over the canonical (sorted-key, compact) serialization.
inline std::string config_hash(const json& config) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

inline json versions() {
  return {{"aniso", ANISO_VERSION},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                        "." + std::to_string(EIGEN_MINOR_VERSION)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"schema_version", kSchemaVersion}};
}

struct Outcome {
  int exit_code = 0;
  json report;
};

namespace internal {

inline json issues_json(const std::vector<Issue>& issues) {
  json out = json::array();
  for (const auto& i : issues) out.push_back({{"path", i.path}, {"message", i.message}});
  return out;
}

inline Outcome invalid(const std::vector<Issue>& issues) {
  return {1, {{"status", "invalid"}, {"errors", issues_json(issues)}}};
}

inline std::string utc_timestamp(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

inline std::optional<json> load(const fs::path& path, std::vector<Issue>& issues) {
  std::ifstream in(path);
  if (!in) {
    issues.push_back({"", "cannot open config " + path.string()});
    return std::nullopt;
  }
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    issues.push_back({"", std::string("malformed JSON: ") + e.what()});
    return std::nullopt;
  }
}

}  // namespace internal

// Dry run: schema and invariant checks plus the derived quantities.
inline Outcome validate_config_file(const fs::path& path) {
  std::vector<Issue> issues;
  const auto config = internal::load(path, issues);
  if (!config) return internal::invalid(issues);
  const auto plan = parse_config(*config, path.parent_path(), issues);
  if (!plan) return internal::invalid(issues);
  return {0,
          {{"status", "ok"},
           {"errors", json::array()},
           {"experiment", plan->type},
           {"output_dir", plan->output_dir.string()},
           {"config_hash", config_hash(*config)},
           {"derived", plan->derived}}};
}

// Runs a validated plan and writes the manifest next to its outputs.
inline Outcome execute_plan(const Plan& plan, const json& config) {
  const auto wall_start = std::chrono::system_clock::now();
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::string> outputs;
  try {
    fs::create_directories(plan.output_dir);
    outputs = plan.execute(plan.output_dir);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kNumerical) {
      return {2, {{"status", "numerical_failure"}, {"operation", e.op()}, {"message", e.what()}}};
    }
    return internal::invalid({{"experiment", e.what()}});
  } catch (const fs::filesystem_error& e) {
    return internal::invalid({{"output_dir", e.what()}});
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const json manifest = {{"config_hash", config_hash(config)},
                         {"experiment", plan.type},
                         {"seed", plan.seed},
                         {"versions", versions()},
                         {"outputs", outputs},
                         {"started_at", internal::utc_timestamp(wall_start)},
                         {"wall_clock_seconds", seconds}};
  try {
    internal::write_file(plan.output_dir / "manifest.json", manifest.dump(2) + "\n");
  } catch (const Error& e) {
    return internal::invalid({{"output_dir", e.what()}});
  }
  outputs.push_back("manifest.json");
  return {0, {{"status", "ok"}, {"experiment", plan.type}, {"output_dir", plan.output_dir.string()},
              {"outputs", outputs}}};
}

inline Outcome run_config_file(const fs::path& path) {
  std::vector<Issue> issues;
  const auto config = internal::load(path, issues);
  if (!config) return internal::invalid(issues);
  const auto plan = parse_config(*config, path.parent_path(), issues);
  if (!plan) return internal::invalid(issues);
  return execute_plan(*plan, *config);
}

}  // namespace aniso::cli

#endif  // ANISO_EXPERIMENTS_HPP_
