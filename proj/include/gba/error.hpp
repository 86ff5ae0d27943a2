#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gba {

enum class ErrorCode {
  BehindCamera,
  NonPositiveDepth,
  InvalidCamera,
  InsufficientViews,
  DegenerateGeometry,
  CheiralityFailure,
  SingularNormalEquations,
  DegenerateCluster,
  InvalidBox,
  ConfigError,
  InvalidInput,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; `code()` lets callers branch
// without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace gba
