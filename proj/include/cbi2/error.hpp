#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace cbi2 {

enum class ErrorKind {
  NonFinite,
  Overflow,
  Singular,
  NonPositiveSpectrum,
  SeriesDivergence,
  StepTooLarge,
  NonErgodic,
  Config,
  ConfigParse,
  NotDiagonal,
  InsufficientData,
  SingularDesign,
  NonAdmissibleGamma,
  IllConditioned,
  SingularV,
  Io,
};

const char* to_string(ErrorKind kind) noexcept;

// Every failure raised by the library. `value()` carries the numeric
// diagnostic that goes with the kind (determinant, smallest singular
// value, offending eigenvalue), or NaN when there is none.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, double value = std::numeric_limits<double>::quiet_NaN());

  ErrorKind kind() const noexcept { return kind_; }
  double value() const noexcept { return value_; }

 private:
  ErrorKind kind_;
  double value_;
};

}  // namespace cbi2
