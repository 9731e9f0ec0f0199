#ifndef FELOGIT_ERRORS_HPP
#define FELOGIT_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace felogit {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input files: missing columns, wrong header, bad flags.
class SchemaError : public Error {
public:
  using Error::Error;
};

// Data that parses but violates the model contract (non-binary outcome,
// duplicate rows, T_i < 2, ...).
class ValidationError : public Error {
public:
  using Error::Error;
};

// The slope parameter is not identified from the data at hand.
class IdentificationError : public Error {
public:
  using Error::Error;
};

// Optimizer walked off or ran out of iterations; carries the last iterate.
class NonConvergenceError : public Error {
public:
  NonConvergenceError(const std::string& msg, std::vector<double> last)
      : Error(msg), last_iterate(std::move(last)) {}
  explicit NonConvergenceError(const std::string& msg) : Error(msg) {}
  std::vector<double> last_iterate;
};

// NaN/Inf propagated through a numeric kernel, or a quantity left its
// mathematically admissible range.
class NumericError : public Error {
public:
  using Error::Error;
};

// Argument outside the domain of a function (e.g. a vector that is not a
// valid moment sequence).
class DomainError : public Error {
public:
  using Error::Error;
};

// Nonparametric step could not be carried out (degenerate local design,
// empty stratum, ...).
class EstimationError : public Error {
public:
  using Error::Error;
};

}  // namespace felogit

#endif  // FELOGIT_ERRORS_HPP
