#pragma once

#include <stdexcept>
#include <string>

namespace qwork {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonHermitianInput : Error {
  using Error::Error;
};
struct InvalidState : Error {
  using Error::Error;
};
struct DimensionMismatch : Error {
  using Error::Error;
};
struct LengthMismatch : Error {
  using Error::Error;
};
struct NotNormalized : Error {
  using Error::Error;
};
struct ImpossibleOutcome : Error {
  using Error::Error;
};
struct NonCommutingState : Error {
  using Error::Error;
};
struct NoConvergence : Error {
  using Error::Error;
};
struct QuadratureFailure : Error {
  using Error::Error;
};
struct RegimeViolation : Error {
  using Error::Error;
};

// Config loading: distinguishes unreadable/unparseable input from a parsed
// config that violates the schema. Both carry the offending field when known.
struct ParseError : Error {
  using Error::Error;
};
struct ValidationError : Error {
  explicit ValidationError(const std::string& field)
      : Error("invalid or missing config field: " + field), field(field) {}
  std::string field;
};

}  // namespace qwork
