#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace wetplan {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
struct DomainError : Error {
  using Error::Error;
};

/// Requested DC output power exceeds the saturation plateau of the
/// harvesting curve; no input power can produce it.
struct SaturationError : Error {
  using Error::Error;
};

/// Channel vector with a zero entry: the constant-modulus constraint forces
/// full per-antenna power, so a per-entry phase alignment does not exist.
struct DegenerateChannelError : Error {
  using Error::Error;
};

/// Scenario/config validation failure. Messages name the offending field.
struct ConfigError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

/// Demands cannot be met within the deadline. Carries the minimum feasible
/// deadline in seconds.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, double threshold_s)
      : Error(what), threshold_s_(threshold_s) {}

  double threshold_s() const { return threshold_s_; }

 private:
  double threshold_s_;
};

/// An iterative solver failed to converge. Carries a textual residual
/// summary for diagnostics.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what, std::string residuals = {})
      : Error(what), residuals_(std::move(residuals)) {}

  const std::string& residuals() const { return residuals_; }

 private:
  std::string residuals_;
};

}  // namespace wetplan
