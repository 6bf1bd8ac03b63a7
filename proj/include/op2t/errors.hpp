#pragma once

#include <stdexcept>
#include <string>

namespace op2t {

// Base class for all library errors so callers can catch one type at the
// boundary and map it to a diagnostic.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Row counts or vector lengths that must agree do not.
struct DimensionMismatch : Error {
  using Error::Error;
};

// A probability row is outside the simplex beyond tolerance. Carries the
// worst offending row and its deviation for diagnostics.
struct SimplexViolation : Error {
  long long row;
  double deviation;
  SimplexViolation(long long row_, double deviation_, const std::string& what_)
      : Error(what_), row(row_), deviation(deviation_) {}
};

// NaN or infinity where a finite value is required.
struct NonFinite : Error {
  long long row;
  long long col;
  NonFinite(long long row_, long long col_, const std::string& what_)
      : Error(what_), row(row_), col(col_) {}
};

// Targets or labels violate their declared domain.
struct ValidationError : Error {
  using Error::Error;
};

// A requested data partition would leave some part empty.
struct EmptyPartition : Error {
  using Error::Error;
};

// A rejection action exists but no rejection parameters were supplied.
struct MissingRejectionSpec : Error {
  using Error::Error;
};

// A classification operation was applied to regression data or vice versa.
struct KindMismatch : Error {
  using Error::Error;
};

// Fewer samples than the minimum leaf size, or a split would empty a leaf.
struct EmptyLeaf : Error {
  using Error::Error;
};

struct TooFewSamples : Error {
  using Error::Error;
};

// Exhaustive enumeration was asked for an instance above its guard rails.
struct InstanceTooLarge : Error {
  using Error::Error;
};

// Malformed serialized input. `field` names the offending key or cell.
struct ParseError : Error {
  std::string field;
  ParseError(std::string field_, const std::string& what_)
      : Error(what_), field(std::move(field_)) {}
};

struct IoError : Error {
  using Error::Error;
};

// AUC is undefined when only one class is present.
struct DegenerateAuc : Error {
  using Error::Error;
};

// Prescription combination is only defined for pairs of class trees.
struct UnsupportedArity : Error {
  using Error::Error;
};

// Drag-limit physics is undefined at zero drag.
struct ZeroDrag : Error {
  using Error::Error;
};

}  // namespace op2t
