#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pixie {

enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  NonFinite,
  FormatError,
  MagicMismatch,
  IoError,
  SchemaError,
  ParseError,
  EvalError,
  SamplingExhausted,
  DegenerateStats,
  SingularMatrix,
  DomainExit,
  Divergence,
  EmptyMask,
};

std::string_view error_code_name(ErrorCode code);

// Base exception for everything the library rejects. The code is surfaced by
// the CLI in its error JSON.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace pixie
