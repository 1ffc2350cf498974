#pragma once

#include <stdexcept>

namespace sdr {

// Cholesky pivot fell below the floor: collinear features, caller should add
// a ridge term.
struct NotPositiveDefinite : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Iterative fit hit its iteration cap before meeting the tolerance.
struct DidNotConverge : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Treatment arm has too few units to fit the requested model.
struct ArmTooSmall : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Exhaustive enumeration refused (instance too big).
struct TooLarge : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operation requires oracle fields that only synthetic datasets carry.
struct MissingOracle : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace sdr
