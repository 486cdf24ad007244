#include "gbc/error.hpp"

namespace gbc {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ZeroVarianceGene: return "ZeroVarianceGene";
    case ErrorKind::NonFiniteInput: return "NonFiniteInput";
    case ErrorKind::EmptyResult: return "EmptyResult";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidParameter: return "InvalidParameter";
    case ErrorKind::InvalidDof: return "InvalidDof";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::BothEmpty: return "BothEmpty";
    case ErrorKind::SingleClassTruth: return "SingleClassTruth";
    case ErrorKind::SingleCluster: return "SingleCluster";
    case ErrorKind::EmptyTrace: return "EmptyTrace";
    case ErrorKind::ConstantPredictor: return "ConstantPredictor";
    case ErrorKind::NoEvents: return "NoEvents";
    case ErrorKind::Parse: return "ParseError";
    case ErrorKind::Io: return "IoError";
    case ErrorKind::Usage: return "UsageError";
    case ErrorKind::AllWeightsNegInfinity: return "AllWeightsNegInfinity";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::DegenerateRange: return "DegenerateRange";
    case ErrorKind::DegenerateClusterSizes: return "DegenerateClusterSizes";
  }
  return "UnknownError";
}

ErrorCategory category_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage:
      return ErrorCategory::Usage;
    case ErrorKind::AllWeightsNegInfinity:
    case ErrorKind::NotPositiveDefinite:
    case ErrorKind::NonConvergence:
    case ErrorKind::DegenerateRange:
    case ErrorKind::DegenerateClusterSizes:
      return ErrorCategory::Numerical;
    default:
      return ErrorCategory::Data;
  }
}

}  // namespace gbc
