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

// Desk-scale classification substrate: datasets, a one-hidden-layer softmax
// MLP with backprop, and noisy (minibatch) gradient descent.

#ifndef ANISO_TOY_MODELS_HPP_
#define ANISO_TOY_MODELS_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "aniso/csv.hpp"
#include "aniso/errors.hpp"
#include "aniso/matrix.hpp"
#include "aniso/random.hpp"
#include "aniso/sde.hpp"

namespace aniso {

struct Dataset {
  Matrix features;  // N x m
  std::vector<int> labels;
  std::string name;

  Index size() const { return features.rows(); }
  Index dim() const { return features.cols(); }
  int num_classes() const {
    return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  }

  void validate(const std::string& op, int classes = 0) const {
    if (size() < 1) throw InvalidArgument(op, "dataset is empty");
    if (static_cast<Index>(labels.size()) != size()) {
      throw DimensionMismatch(op, "one label per feature row is required");
    }
    if (!features.allFinite()) throw InvalidArgument(op, "features must be finite");
    for (int c : labels) {
      if (c < 0 || (classes > 0 && c >= classes)) {
        throw InvalidArgument(op, "label " + std::to_string(c) + " out of range");
      }
    }
  }

  bool operator==(const Dataset& o) const {
    return features == o.features && labels == o.labels;
  }
};

struct DataPoint {
  Vector features;
  int label = 0;
};

struct Removal {};
struct Replacement {
  DataPoint point;
};
using Adjacency = std::variant<Removal, Replacement>;

// Drops or swaps row j; every other row is copied unchanged.
inline Dataset make_adjacent(const Dataset& d, Index j, const Adjacency& mode) {
  const std::string op = "make_adjacent";
  if (j < 0 || j >= d.size()) {
    throw IndexOutOfRange(op, "index " + std::to_string(j) + " outside [0, " +
                                  std::to_string(d.size()) + ")");
  }
  Dataset out;
  out.name = d.name + "'";
  if (const auto* r = std::get_if<Replacement>(&mode)) {
    if (r->point.features.size() != d.dim()) throw DimensionMismatch(op, "replacement has wrong dimension");
    out.features = d.features;
    out.labels = d.labels;
    out.features.row(j) = r->point.features.transpose();
    out.labels[j] = r->point.label;
    return out;
  }
  out.features.resize(d.size() - 1, d.dim());
  out.features.topRows(j) = d.features.topRows(j);
  out.features.bottomRows(d.size() - 1 - j) = d.features.bottomRows(d.size() - 1 - j);
  out.labels = d.labels;
  out.labels.erase(out.labels.begin() + j);
  return out;
}

// Gaussian clusters with identity covariance; class k has mean
// (separation / sqrt 2) e_k so every pair of means is `separation` apart.
// Rows are interleaved by class.
inline Dataset synth_blobs(int classes, Index per_class, Index dim, double separation,
                           std::uint64_t seed) {
  const std::string op = "synth_blobs";
  if (classes < 1 || per_class < 1 || dim < 1) throw InvalidArgument(op, "sizes must be positive");
  if (!(separation >= 0.0)) throw InvalidArgument(op, "separation must be >= 0");
  if (classes > dim) throw InvalidArgument(op, "need dim >= classes to place equidistant means");
  const Index n = classes * per_class;
  Dataset d;
  d.name = "blobs";
  d.features.resize(n, dim);
  d.labels.resize(static_cast<std::size_t>(n));
  const double offset = separation / std::sqrt(2.0);
  for (Index i = 0; i < n; ++i) {
    const int c = static_cast<int>(i % classes);
    d.labels[i] = c;
    for (Index j = 0; j < dim; ++j) {
      d.features(i, j) = standard_normal(seed, 0, static_cast<std::uint64_t>(i),
                                         static_cast<std::uint64_t>(j)) +
                         (j == c ? offset : 0.0);
    }
  }
  return d;
}

// Header f0,...,f{m-1},label.
inline void write_dataset_csv(std::ostream& out, const Dataset& d) {
  std::vector<std::string> header;
  for (Index j = 0; j < d.dim(); ++j) header.push_back("f" + std::to_string(j));
  header.push_back("label");
  write_csv_header(out, header);
  for (Index i = 0; i < d.size(); ++i) {
    for (Index j = 0; j < d.dim(); ++j) out << format_double(d.features(i, j)) << ',';
    out << d.labels[i] << '\n';
  }
}

inline Dataset read_dataset_csv(std::istream& in, const std::string& name = "csv") {
  const std::string op = "read_dataset_csv";
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument(op, "missing header row");
  const auto header = split(line);
  if (header.size() < 2 || header.back() != "label") {
    throw InvalidArgument(op, "header must be f0,...,f{m-1},label");
  }
  const Index m = static_cast<Index>(header.size()) - 1;
  std::vector<double> values;
  Dataset d;
  d.name = name;
  Index row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    if (static_cast<Index>(cells.size()) != m + 1) {
      throw InvalidArgument(op, "row " + std::to_string(row) + " has wrong number of cells");
    }
    try {
      for (Index j = 0; j < m; ++j) values.push_back(std::stod(cells[j]));
      d.labels.push_back(std::stoi(cells[m]));
    } catch (const std::exception&) {
      throw InvalidArgument(op, "row " + std::to_string(row) + " is not numeric");
    }
    ++row;
  }
  d.features.resize(row, m);
  for (Index i = 0; i < row; ++i) {
    for (Index j = 0; j < m; ++j) d.features(i, j) = values[i * m + j];
  }
  d.validate(op);
  return d;
}

enum class Activation { kReLU, kTanh };

inline std::string to_string(Activation a) { return a == Activation::kReLU ? "relu" : "tanh"; }

inline Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::kReLU;
  if (s == "tanh") return Activation::kTanh;
  throw InvalidArgument("parse_activation", "unknown activation '" + s + "'");
}

// Parameters are laid out as W1 (H x m, row-major), b1, W2 (K x H,
// row-major), b2. Layer 0 is W1 and b1.
struct MlpModel {
  Index inputs = 1;
  Index hidden = 1;
  Index classes = 2;
  Activation activation = Activation::kReLU;
  Vector params;
  std::uint64_t seed = 0;

  static Index param_count(Index m, Index h, Index k) { return (m + 1) * h + (h + 1) * k; }
  Index num_params() const { return param_count(inputs, hidden, classes); }

  // [begin, end) of a layer's parameters.
  std::pair<Index, Index> layer_range(int layer) const {
    const Index split = (inputs + 1) * hidden;
    return layer == 0 ? std::pair<Index, Index>{0, split}
                      : std::pair<Index, Index>{split, num_params()};
  }

  // Uniform on [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  static MlpModel initialize(Index m, Index h, Index k, Activation act, std::uint64_t seed) {
    if (m < 1 || h < 1 || k < 2) throw InvalidArgument("MlpModel", "need m, H >= 1 and K >= 2");
    MlpModel model{m, h, k, act, Vector(param_count(m, h, k)), seed};
    const Index split = (m + 1) * h;
    for (Index i = 0; i < model.params.size(); ++i) {
      const double fan_in = static_cast<double>(i < split ? m : h);
      const double u = uniform_open01(seed, 0, 0, static_cast<std::uint64_t>(i));
      model.params(i) = (2.0 * u - 1.0) / std::sqrt(fan_in);
    }
    return model;
  }
};

namespace internal {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct MlpView {
  Eigen::Map<const RowMajor> w1;
  Eigen::Map<const Vector> b1;
  Eigen::Map<const RowMajor> w2;
  Eigen::Map<const Vector> b2;

  explicit MlpView(const MlpModel& m)
      : w1(m.params.data(), m.hidden, m.inputs),
        b1(m.params.data() + m.hidden * m.inputs, m.hidden),
        w2(m.params.data() + (m.inputs + 1) * m.hidden, m.classes, m.hidden),
        b2(m.params.data() + (m.inputs + 1) * m.hidden + m.classes * m.hidden, m.classes) {}
};

struct ForwardPass {
  Matrix pre;     // n x H
  Matrix act;     // n x H
  Matrix logits;  // n x K
};

inline ForwardPass forward_pass(const MlpModel& model, const Matrix& x) {
  if (x.cols() != model.inputs) throw DimensionMismatch("forward", "feature width differs from model inputs");
  if (model.params.size() != model.num_params()) {
    throw DimensionMismatch("forward", "parameter vector has wrong length");
  }
  const MlpView v(model);
  ForwardPass f;
  f.pre = (x * v.w1.transpose()).rowwise() + v.b1.transpose();
  f.act = model.activation == Activation::kReLU ? Matrix(f.pre.cwiseMax(0.0))
                                                 : Matrix(f.pre.array().tanh().matrix());
  f.logits = (f.act * v.w2.transpose()).rowwise() + v.b2.transpose();
  return f;
}

// Row-wise log-softmax.
inline Matrix log_softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    const double lse = mx + std::log((logits.row(i).array() - mx).exp().sum());
    out.row(i) = logits.row(i).array() - lse;
  }
  return out;
}

inline void check_labels(const std::vector<int>& labels, Index rows, Index classes) {
  if (static_cast<Index>(labels.size()) != rows) throw DimensionMismatch("loss", "one label per row is required");
  for (int c : labels) {
    if (c < 0 || c >= classes) throw InvalidArgument("loss", "label out of range");
  }
}

// dL_i/dlogits for each row, and the backward pass to per-row parameter
// gradients accumulated with the given row weights.
inline Matrix logit_residual(const Matrix& log_probs, const std::vector<int>& labels) {
  Matrix r = log_probs.array().exp();
  for (Index i = 0; i < r.rows(); ++i) r(i, labels[i]) -= 1.0;
  return r;
}

inline Matrix hidden_residual(const MlpModel& model, const ForwardPass& f, const Matrix& dlogits) {
  const MlpView v(model);
  Matrix dact = dlogits * v.w2;  // n x H
  if (model.activation == Activation::kReLU) {
    return dact.array() * (f.pre.array() > 0.0).cast<double>();
  }
  return dact.array() * (1.0 - f.act.array().square());
}

}  // namespace internal

// Class probabilities, one row per input row.
inline Matrix forward(const MlpModel& model, const Matrix& x) {
  return internal::log_softmax(internal::forward_pass(model, x).logits).array().exp();
}

enum class Reduction { kMean, kSum };

struct LossGrad {
  double loss;
  Vector grad;
};

// Cross-entropy over the rows of x and its parameter gradient.
inline LossGrad loss_and_grad(const MlpModel& model, const Matrix& x, const std::vector<int>& labels,
                              Reduction reduction = Reduction::kMean) {
  internal::check_labels(labels, x.rows(), model.classes);
  const auto f = internal::forward_pass(model, x);
  const Matrix lp = internal::log_softmax(f.logits);
  const double scale = reduction == Reduction::kMean ? 1.0 / static_cast<double>(x.rows()) : 1.0;
  double loss = 0.0;
  for (Index i = 0; i < x.rows(); ++i) loss -= lp(i, labels[i]);
  const Matrix dlogits = internal::logit_residual(lp, labels) * scale;
  const Matrix dpre = internal::hidden_residual(model, f, dlogits);
  Vector g(model.num_params());
  const Index h = model.hidden;
  const Index m = model.inputs;
  const Index k = model.classes;
  Eigen::Map<internal::RowMajor>(g.data(), h, m) = dpre.transpose() * x;
  g.segment(h * m, h) = dpre.colwise().sum().transpose();
  Eigen::Map<internal::RowMajor>(g.data() + (m + 1) * h, k, h) = dlogits.transpose() * f.act;
  g.segment((m + 1) * h + k * h, k) = dlogits.colwise().sum().transpose();
  return {loss * scale, g};
}

inline LossGrad loss_and_grad(const MlpModel& model, const Dataset& d,
                              Reduction reduction = Reduction::kMean) {
  return loss_and_grad(model, d.features, d.labels, reduction);
}

// Row i is the gradient of the cross-entropy of example i alone.
inline Matrix per_example_gradients(const MlpModel& model, const Matrix& x,
                                    const std::vector<int>& labels) {
  internal::check_labels(labels, x.rows(), model.classes);
  const auto f = internal::forward_pass(model, x);
  const Matrix dlogits = internal::logit_residual(internal::log_softmax(f.logits), labels);
  const Matrix dpre = internal::hidden_residual(model, f, dlogits);
  const Index h = model.hidden;
  const Index m = model.inputs;
  const Index k = model.classes;
  Matrix out(x.rows(), model.num_params());
  for (Index i = 0; i < x.rows(); ++i) {
    Index o = 0;
    for (Index a = 0; a < h; ++a) {
      for (Index b = 0; b < m; ++b) out(i, o++) = dpre(i, a) * x(i, b);
    }
    for (Index a = 0; a < h; ++a) out(i, o++) = dpre(i, a);
    for (Index a = 0; a < k; ++a) {
      for (Index b = 0; b < h; ++b) out(i, o++) = dlogits(i, a) * f.act(i, b);
    }
    for (Index a = 0; a < k; ++a) out(i, o++) = dlogits(i, a);
  }
  return out;
}

// Per-example cross-entropy.
inline Vector per_example_loss(const MlpModel& model, const Matrix& x, const std::vector<int>& labels) {
  internal::check_labels(labels, x.rows(), model.classes);
  const Matrix lp = internal::log_softmax(internal::forward_pass(model, x).logits);
  Vector out(x.rows());
  for (Index i = 0; i < x.rows(); ++i) out(i) = -lp(i, labels[i]);
  return out;
}

// Drift -grad f(x, D) over the parameters of `shape`, f the summed loss.
inline DatasetGradientDrift dataset_gradient_drift(const MlpModel& shape, const Dataset& d) {
  return {[shape, d](const Vector& params) {
            MlpModel m = shape;
            m.params = params;
            return loss_and_grad(m, d, Reduction::kSum).grad;
          },
          d.name};
}

struct NoNoise {};
// Variance sigma2 * K_t in every coordinate of a layer, K_t the layer's
// largest absolute gradient entry at the current iterate.
struct IsotropicPerLayer {
  double sigma2 = 0.0;
};
// Variance sigma2 * |grad_i| per coordinate.
struct AnisotropicPerParam {
  double sigma2 = 0.0;
};
using NoiseScheme = std::variant<NoNoise, IsotropicPerLayer, AnisotropicPerParam>;

inline std::string scheme_name(const NoiseScheme& s) {
  if (std::holds_alternative<IsotropicPerLayer>(s)) return "isotropic";
  if (std::holds_alternative<AnisotropicPerParam>(s)) return "anisotropic";
  return "none";
}

// Diagonal of the injected noise covariance given the gradient.
inline Vector noise_variances(const NoiseScheme& scheme, const MlpModel& model, const Vector& grad) {
  Vector var = Vector::Zero(grad.size());
  if (const auto* iso = std::get_if<IsotropicPerLayer>(&scheme)) {
    for (int layer = 0; layer < 2; ++layer) {
      const auto [b, e] = model.layer_range(layer);
      const double k = grad.segment(b, e - b).cwiseAbs().maxCoeff();
      var.segment(b, e - b).setConstant(iso->sigma2 * k);
    }
  } else if (const auto* an = std::get_if<AnisotropicPerParam>(&scheme)) {
    var = an->sigma2 * grad.cwiseAbs();
  }
  return var;
}

enum class NoiseOn {
  kStep,          // covariance from the minibatch gradient of the step
  kFullGradient,  // covariance from the full-data gradient
};

struct TrainConfig {
  NoiseScheme scheme = NoNoise{};
  double lr = 0.1;
  Index iters = 100;
  Index batch = 1;
  std::uint64_t seed = 0;
  NoiseOn noise_on = NoiseOn::kStep;

  void validate(Index dataset_size) const {
    const std::string op = "train";
    if (!(lr > 0.0)) throw InvalidArgument(op, "lr must be positive");
    if (iters < 1) throw InvalidArgument(op, "iters must be positive");
    if (batch < 1) throw InvalidArgument(op, "batch must be positive");
    if (batch > dataset_size) {
      throw BatchLargerThanDataset(op, "batch " + std::to_string(batch) + " exceeds dataset size " +
                                           std::to_string(dataset_size));
    }
    const double s2 = std::visit(
        [](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, NoNoise>) {
            return 0.0;
          } else {
            return s.sigma2;
          }
        },
        scheme);
    if (!(s2 >= 0.0) || !std::isfinite(s2)) throw InvalidArgument(op, "sigma2 must be >= 0");
  }
};

struct IterationLog {
  double loss;                          // minibatch loss at the iterate before the step
  std::array<double, 2> max_abs_grad;   // per layer
};

struct TrainResult {
  MlpModel model;
  std::vector<IterationLog> log;
  bool diverged = false;

  double worst_loss() const {
    double w = -std::numeric_limits<double>::infinity();
    for (const auto& l : log) w = std::max(w, l.loss);
    return w;
  }
};

namespace internal {

inline constexpr std::uint64_t kBatchStream = 1;
inline constexpr std::uint64_t kNoiseStream = 2;

// First n entries of a seeded partial Fisher-Yates shuffle of [0, N).
inline std::vector<Index> sample_batch(Index N, Index n, std::uint64_t seed, Index iter) {
  std::vector<Index> perm(static_cast<std::size_t>(N));
  std::iota(perm.begin(), perm.end(), Index{0});
  for (Index k = 0; k < n; ++k) {
    const double u = uniform_open01(seed, kBatchStream, static_cast<std::uint64_t>(iter),
                                    static_cast<std::uint64_t>(k));
    const Index j = k + std::min(N - k - 1, static_cast<Index>(u * static_cast<double>(N - k)));
    std::swap(perm[k], perm[j]);
  }
  perm.resize(static_cast<std::size_t>(n));
  std::sort(perm.begin(), perm.end());
  return perm;
}

}  // namespace internal

// x_{t+1} = x_t - lr * grad + N(0, Sigma_t) with Sigma_t from the scheme. The
// seed drives batch selection and noise; initialization is the caller's.
// A non-finite loss stops training and sets `diverged`.
inline TrainResult train(const MlpModel& init, const Dataset& data, const TrainConfig& cfg) {
  data.validate("train", static_cast<int>(init.classes));
  cfg.validate(data.size());
  TrainResult result{init, {}, false};
  MlpModel& model = result.model;
  result.log.reserve(static_cast<std::size_t>(cfg.iters));
  const bool full_batch = cfg.batch == data.size();
  Matrix xb(cfg.batch, data.dim());
  std::vector<int> yb(static_cast<std::size_t>(cfg.batch));
  for (Index t = 0; t < cfg.iters; ++t) {
    LossGrad lg;
    if (full_batch) {
      lg = loss_and_grad(model, data);
    } else {
      const auto idx = internal::sample_batch(data.size(), cfg.batch, cfg.seed, t);
      for (Index k = 0; k < cfg.batch; ++k) {
        xb.row(k) = data.features.row(idx[k]);
        yb[k] = data.labels[idx[k]];
      }
      lg = loss_and_grad(model, xb, yb);
    }
    IterationLog entry{lg.loss, {}};
    for (int layer = 0; layer < 2; ++layer) {
      const auto [b, e] = model.layer_range(layer);
      entry.max_abs_grad[layer] = lg.grad.segment(b, e - b).cwiseAbs().maxCoeff();
    }
    result.log.push_back(entry);
    if (!std::isfinite(lg.loss) || !lg.grad.allFinite()) {
      result.diverged = true;
      break;
    }
    Vector sd;
    if (!std::holds_alternative<NoNoise>(cfg.scheme)) {
      const bool use_full = cfg.noise_on == NoiseOn::kFullGradient && !full_batch;
      sd = noise_variances(cfg.scheme, model, use_full ? loss_and_grad(model, data).grad : lg.grad)
               .cwiseSqrt();
    }
    model.params -= cfg.lr * lg.grad;
    for (Index i = 0; i < sd.size(); ++i) {
      model.params(i) += sd(i) * standard_normal(cfg.seed, internal::kNoiseStream,
                                                 static_cast<std::uint64_t>(t),
                                                 static_cast<std::uint64_t>(i));
    }
  }
  return result;
}

inline nlohmann::json checkpoint_json(const MlpModel& m) {
  return {{"layer_sizes", {m.inputs, m.hidden, m.classes}},
          {"activation", to_string(m.activation)},
          {"params", std::vector<double>(m.params.data(), m.params.data() + m.params.size())},
          {"seed", m.seed}};
}

inline MlpModel model_from_checkpoint(const nlohmann::json& j) {
  const std::string op = "model_from_checkpoint";
  try {
    const auto sizes = j.at("layer_sizes").get<std::vector<Index>>();
    if (sizes.size() != 3) throw InvalidArgument(op, "layer_sizes must have three entries");
    MlpModel m{sizes[0], sizes[1], sizes[2], parse_activation(j.at("activation").get<std::string>()),
               Vector(), j.at("seed").get<std::uint64_t>()};
    const auto p = j.at("params").get<std::vector<double>>();
    if (static_cast<Index>(p.size()) != m.num_params()) throw InvalidArgument(op, "params has wrong length");
    m.params = Eigen::Map<const Vector>(p.data(), static_cast<Index>(p.size()));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(op, e.what());
  }
}

}  // namespace aniso

#endif  // ANISO_TOY_MODELS_HPP_
