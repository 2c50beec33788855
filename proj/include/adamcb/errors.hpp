#pragma once

#include <stdexcept>

namespace adamcb {

// Invalid user-supplied configuration or a violated operation precondition.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A caller broke an internal API contract (missing gradient norm,
// dimension mismatch, and the like).
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// An observed per-sample gradient norm exceeded the configured bound L.
struct BoundViolationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input data. Subclasses identify the failure mode so callers
// and tests can tell them apart.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IdxBadMagicError : ParseError {
  using ParseError::ParseError;
};
struct IdxTruncatedError : ParseError {
  using ParseError::ParseError;
};
struct IdxCountMismatchError : ParseError {
  using ParseError::ParseError;
};
struct CsvError : ParseError {
  using ParseError::ParseError;
};

}  // namespace adamcb
