#include "swqif/error.hpp"

namespace swqif {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::InconsistentSequence: return "InconsistentSequence";
    case ErrorCode::PeriodOutOfRange: return "PeriodOutOfRange";
    case ErrorCode::EmptyCluster: return "EmptyCluster";
    case ErrorCode::TooManyFolds: return "TooManyFolds";
    case ErrorCode::EmptyTraining: return "EmptyTraining";
    case ErrorCode::UnknownCluster: return "UnknownCluster";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::SingularDesign: return "SingularDesign";
    case ErrorCode::SingularC: return "SingularC";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::InsufficientDF: return "InsufficientDF";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

ErrorClass classify(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError:
    case ErrorCode::SchemaError:
    case ErrorCode::InconsistentSequence:
    case ErrorCode::ConfigError:
    case ErrorCode::IoError:
      return ErrorClass::Config;
    default:
      return ErrorClass::Estimation;
  }
}

}  // namespace swqif
