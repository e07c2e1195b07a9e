#pragma once

#include <stdexcept>
#include <string>

namespace gap {

// Base of every error raised by the library. The CLI maps ConfigError to
// exit code 2 and everything else to exit code 1.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept { return "Error"; }
};

#define GAP_DEFINE_ERROR(Name)                                     \
  class Name : public Error {                                      \
   public:                                                         \
    explicit Name(const std::string& what) : Error(what) {}        \
    const char* kind() const noexcept override { return #Name; }   \
  };

GAP_DEFINE_ERROR(ZeroPhotonError)
GAP_DEFINE_ERROR(IndexError)
GAP_DEFINE_ERROR(ShapeError)
GAP_DEFINE_ERROR(InvalidSignalError)
GAP_DEFINE_ERROR(InvalidProbabilityError)
GAP_DEFINE_ERROR(InvalidIntensityError)
GAP_DEFINE_ERROR(DegeneratePosteriorError)
GAP_DEFINE_ERROR(RangeError)
GAP_DEFINE_ERROR(EmptyRegionError)
GAP_DEFINE_ERROR(EmptyDatasetError)
GAP_DEFINE_ERROR(RegistryCoverageError)
GAP_DEFINE_ERROR(InvalidGroundTruthError)
GAP_DEFINE_ERROR(FormatError)
GAP_DEFINE_ERROR(ConfigError)

#undef GAP_DEFINE_ERROR

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, long long step)
      : Error(what), step_(step) {}
  const char* kind() const noexcept override { return "DivergenceError"; }
  long long step() const noexcept { return step_; }

 private:
  long long step_;
};

}  // namespace gap
