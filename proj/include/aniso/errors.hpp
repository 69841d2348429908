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

#ifndef ANISO_ERRORS_HPP_
#define ANISO_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace aniso {

// Validation errors map to CLI exit status 1, numerical failures to 2.
enum class ErrorKind { kInvalidArgument, kNumerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string op, const std::string& message)
      : std::runtime_error(op + ": " + message),
        kind_(kind),
        op_(std::move(op)) {}

  ErrorKind kind() const { return kind_; }
  // Name of the operation that raised the error.
  const std::string& op() const { return op_; }

 private:
  ErrorKind kind_;
  std::string op_;
};

#define ANISO_DEFINE_ERROR(Name, Kind)                         \
  class Name : public Error {                                  \
   public:                                                     \
    Name(std::string op, const std::string& message)           \
        : Error(ErrorKind::Kind, std::move(op), message) {}    \
  };

ANISO_DEFINE_ERROR(InvalidArgument, kInvalidArgument)
ANISO_DEFINE_ERROR(DimensionMismatch, kInvalidArgument)
ANISO_DEFINE_ERROR(NotSymmetric, kInvalidArgument)
ANISO_DEFINE_ERROR(IndexOutOfRange, kInvalidArgument)
ANISO_DEFINE_ERROR(BatchLargerThanDataset, kInvalidArgument)
ANISO_DEFINE_ERROR(ScoreRequired, kInvalidArgument)
ANISO_DEFINE_ERROR(DegenerateGap, kInvalidArgument)
ANISO_DEFINE_ERROR(NonPositiveVariance, kInvalidArgument)
ANISO_DEFINE_ERROR(NotPositiveDefinite, kNumerical)
ANISO_DEFINE_ERROR(NonCommuting, kNumerical)
ANISO_DEFINE_ERROR(CovarianceEvaluationFailed, kNumerical)
ANISO_DEFINE_ERROR(QuadratureNotConverged, kNumerical)

#undef ANISO_DEFINE_ERROR

}  // namespace aniso

#endif  // ANISO_ERRORS_HPP_
