#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace swqif {

enum class ErrorCode {
  ParseError,
  SchemaError,
  InconsistentSequence,
  PeriodOutOfRange,
  EmptyCluster,
  TooManyFolds,
  EmptyTraining,
  UnknownCluster,
  DimensionMismatch,
  SingularDesign,
  SingularC,
  NonConvergence,
  InsufficientDF,
  ConfigError,
  IoError,
};

std::string_view error_code_name(ErrorCode code);

// Broad failure classes used by the C API and the CLI exit status.
enum class ErrorClass { Config, Estimation };

ErrorClass classify(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace swqif
