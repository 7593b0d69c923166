#pragma once

#include <stdexcept>
#include <string>

namespace geoldp {

// Base class for everything thrown by this library on purpose.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// A geodesic-uniqueness precondition failed: the target lies at or beyond
// (injectivity radius - 1e-9) from the base point.  Operations never pick a
// branch silently.
class CutLocusError : public Error {
 public:
  using Error::Error;
};

// A point fell outside the domain of the requested chart.
class ChartDomainError : public Error {
 public:
  using Error::Error;
};

// A rate matrix is not a conservative generator (row sums, sign pattern).
class InvalidGeneratorError : public Error {
 public:
  using Error::Error;
};

// The generator is reducible, so no unique invariant measure exists.
class NoUniqueInvariantError : public Error {
 public:
  using Error::Error;
};

// An iterative solver failed to converge or hit a degeneracy guard.
class NumericalFailureError : public Error {
 public:
  explicit NumericalFailureError(const std::string& stage, const std::string& what)
      : Error(stage + ": " + what), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// Fewer usable data points than a fit requires.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

// A caller violated a documented precondition (bad dt, malformed input, ...).
class ContractViolationError : public Error {
 public:
  using Error::Error;
};

// Config file could not be parsed; carries 1-based line/column.
class ConfigParseError : public Error {
 public:
  ConfigParseError(const std::string& what, int line, int column)
      : Error(what), line_(line), column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

}  // namespace geoldp
