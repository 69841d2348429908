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

// Relative entropy to privacy-risk figures: membership-attack advantage via
// Pinsker, and (epsilon, delta) via log-Sobolev concentration.

#ifndef ANISO_PRIVACY_HPP_
#define ANISO_PRIVACY_HPP_

#include <algorithm>
#include <cmath>
#include <string>

#include "aniso/errors.hpp"

namespace aniso {

struct PrivacyBudget {
  double epsilon = 0.0;
  double delta = 1.0;
};

// lip is the Lipschitz constant of the privacy loss log(p_t / p'_t); it is
// always supplied by the caller.
struct ConcentrationParams {
  double C_t = 1.0;
  double lip = 1.0;
  double kl = 0.0;

  void validate(const std::string& op) const {
    if (!(C_t > 0.0) || !(lip > 0.0) || !std::isfinite(C_t) || !std::isfinite(lip)) {
      throw InvalidArgument(op, "C_t and lip must be positive");
    }
    if (!(kl >= 0.0) || !std::isfinite(kl)) throw InvalidArgument(op, "kl must be >= 0");
  }
};

// min(1, sqrt(kl / 2)).
inline double membership_advantage(double kl) {
  if (!(kl >= 0.0)) throw InvalidArgument("membership_advantage", "kl must be >= 0");
  return std::min(1.0, std::sqrt(kl / 2.0));
}

// exp(-r^2 / (C_t lip^2)).
inline double concentration_tail(double r, double C_t, double lip) {
  if (!(r > 0.0) || !(C_t > 0.0) || !(lip > 0.0)) {
    throw InvalidArgument("concentration_tail", "r, C_t and lip must be positive");
  }
  return std::exp(-r * r / (C_t * lip * lip));
}

// Vacuous delta = 1 when eps <= kl.
inline double delta_from_eps(double eps, const ConcentrationParams& cp) {
  cp.validate("delta_from_eps");
  if (std::isnan(eps)) throw InvalidArgument("delta_from_eps", "eps is NaN");
  if (eps <= cp.kl) return 1.0;
  const double r = eps - cp.kl;
  return std::exp(-r * r / (cp.C_t * cp.lip * cp.lip));
}

inline double eps_from_delta(double delta, const ConcentrationParams& cp) {
  cp.validate("eps_from_delta");
  if (!(delta > 0.0) || !(delta < 1.0)) {
    throw InvalidArgument("eps_from_delta", "delta must lie in (0, 1)");
  }
  return cp.kl + cp.lip * std::sqrt(-cp.C_t * std::log(delta));
}

}  // namespace aniso

#endif  // ANISO_PRIVACY_HPP_
