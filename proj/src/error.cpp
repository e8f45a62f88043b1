#include "cbi2/error.hpp"

namespace cbi2 {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::Overflow: return "Overflow";
    case ErrorKind::Singular: return "Singular";
    case ErrorKind::NonPositiveSpectrum: return "NonPositiveSpectrum";
    case ErrorKind::SeriesDivergence: return "SeriesDivergence";
    case ErrorKind::StepTooLarge: return "StepTooLarge";
    case ErrorKind::NonErgodic: return "NonErgodic";
    case ErrorKind::Config: return "ConfigError";
    case ErrorKind::ConfigParse: return "ConfigParse";
    case ErrorKind::NotDiagonal: return "NotDiagonal";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::SingularDesign: return "SingularDesign";
    case ErrorKind::NonAdmissibleGamma: return "NonAdmissibleGamma";
    case ErrorKind::IllConditioned: return "IllConditioned";
    case ErrorKind::SingularV: return "SingularV";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message, double value)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), value_(value) {}

}  // namespace cbi2
