#pragma once

#include <stdexcept>
#include <string>

namespace ebsde {

/// Error codes for every failure mode the library reports.
enum class Errc {
  NonStochastic,
  NegativeEntry,
  DimensionMismatch,
  NotUniformlyErgodic,
  NotGammaControlled,
  NotGammaEquivalent,
  EmptyActionSet,
  NoCertificate,
  NonZeroMean,
  PathExplosion,
  RootSolveFailure,
  NoZeroBound,
  NoConvergence,
  DominanceNotVerified,
  PolicyKernelNotErgodic,
  ParseError,
  ValidationError,
  ComputeError,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace ebsde
