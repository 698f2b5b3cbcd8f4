#pragma once

#include <stdexcept>
#include <string>

namespace univqm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unknown subsystem id, unknown basis label, malformed layout.
class LayoutError : public Error {
 public:
  using Error::Error;
};

/// Two layouts that were supposed to be disjoint share a subsystem id.
class LayoutConflictError : public LayoutError {
 public:
  using LayoutError::LayoutError;
};

/// Operands live on different layouts or have incompatible sizes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// A PointerScheme or DecisionScheme does not fit the layout it is used with.
class SchemeError : public Error {
 public:
  using Error::Error;
};

/// An operation was called on a state that violates its precondition
/// (e.g. an apparatus that is not in its ready state).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// A value failed a structural check (unitarity, Hermiticity, positivity...).
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// A numerical solver could not reach its tolerance.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double best_residual)
      : Error(what), best_residual_(best_residual) {}

  double best_residual() const noexcept { return best_residual_; }

 private:
  double best_residual_;
};

}  // namespace univqm
