#pragma once

#include <stdexcept>
#include <string>

namespace qtube {

enum class ErrorCode {
  InvalidInput = 1,
  DegenerateSpectrum,
  Numerical,
  ContractViolation,
  Resolution,
  MustProject,
  Inconclusive,
  DegenerateFreeLine,
  Io,
};

/// Exception carrying a machine-readable code; the C API maps it to a status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorCode::InvalidInput, what);
}

}  // namespace qtube
