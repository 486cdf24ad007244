#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gbc {

enum class ErrorKind {
  // input / validation
  ZeroVarianceGene,
  NonFiniteInput,
  EmptyResult,
  DimensionMismatch,
  InvalidParameter,
  InvalidDof,
  LengthMismatch,
  BothEmpty,
  SingleClassTruth,
  SingleCluster,
  EmptyTrace,
  ConstantPredictor,
  NoEvents,
  Parse,
  Io,
  Usage,
  // numerical
  AllWeightsNegInfinity,
  NotPositiveDefinite,
  NonConvergence,
  DegenerateRange,
  DegenerateClusterSizes,
};

std::string_view to_string(ErrorKind kind);

/// Broad class of an error, used to pick a process exit code.
enum class ErrorCategory { Usage = 1, Data = 2, Numerical = 3 };

ErrorCategory category_of(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  ErrorCategory category() const noexcept { return category_of(kind_); }

 private:
  ErrorKind kind_;
};

}  // namespace gbc
