#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace smr {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed coefficient tables: bad indices, repeated modes, wrong n.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain of a formula (e.g. negative bath energy).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Caller violated an operation's precondition (run too short, too few levels, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file or configuration document.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure during time stepping. Carries the time and state at failure.
class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, double time, std::vector<double> state)
      : Error(what), time_(time), state_(std::move(state)) {}

  double time() const noexcept { return time_; }
  const std::vector<double>& state() const noexcept { return state_; }

 private:
  double time_;
  std::vector<double> state_;
};

}  // namespace smr
