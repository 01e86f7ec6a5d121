#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stationfill {

enum class ErrorCode {
  EmptyInput,
  InvalidStamp,
  InvalidValue,
  ParameterMismatch,
  WrongInputCount,
  EmptyNetwork,
  OutOfIndex,
  EmptyDataset,
  DirtyTestPeriod,
  PeriodNotFound,
  NoCleanWindow,
  InvalidArgument,
  SingularSystem,
  CholeskyFailure,
  JacobianNonFinite,
  SchemaMismatch,
  LengthMismatch,
  GapTooLong,
  ParseError,
  IoError,
  ModelUnavailable,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; `code()` carries the failure kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace stationfill
