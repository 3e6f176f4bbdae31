#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace termctl {

/// Failure categories surfaced by the library. The CLI maps every code to
/// exit status 2 and echoes `code_name()` in its JSON error object.
enum class ErrorCode {
  Precondition,
  RegimeUnsupported,
  Degenerate,
  Unstable,
  TooFewBatches,
  PlanInfeasible,
  SingularSigma,
  NotTerminated,
  DensityViolation,
  TooFewCycles,
  Unknown,
  Io,
};

constexpr std::string_view code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::Precondition: return "PRECONDITION";
    case ErrorCode::RegimeUnsupported: return "REGIME_UNSUPPORTED";
    case ErrorCode::Degenerate: return "DEGENERATE";
    case ErrorCode::Unstable: return "UNSTABLE";
    case ErrorCode::TooFewBatches: return "TOO_FEW_BATCHES";
    case ErrorCode::PlanInfeasible: return "PLAN_INFEASIBLE";
    case ErrorCode::SingularSigma: return "SINGULAR_SIGMA";
    case ErrorCode::NotTerminated: return "NOT_TERMINATED";
    case ErrorCode::DensityViolation: return "DENSITY_VIOLATION";
    case ErrorCode::TooFewCycles: return "TOO_FEW_CYCLES";
    case ErrorCode::Unknown: return "UNKNOWN";
    case ErrorCode::Io: return "IO";
  }
  return "UNKNOWN";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(code_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool ok, ErrorCode code, const std::string& message) {
  if (!ok) throw Error(code, message);
}

}  // namespace termctl
