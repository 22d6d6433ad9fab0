#pragma once

#include <stdexcept>
#include <string>

namespace martin {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A state lies outside the model domain, or a parameter lies outside the
/// region where an operation is defined.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A field produced a non-finite value.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// Malformed input: bad config field, empty grid, wrong dimension.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// A candidate function is not strictly positive where it must be.
class PositivityError : public Error {
 public:
  using Error::Error;
};

/// The operator L + lambda is not in the criticality class an operation needs.
class CriticalityError : public Error {
 public:
  using Error::Error;
};

/// Bracketing or bisection failed.
class SearchError : public Error {
 public:
  using Error::Error;
};

/// Adaptive quadrature did not converge; carries the best estimate.
class QuadratureError : public Error {
 public:
  QuadratureError(const std::string& what, double partial)
      : Error(what), partial_(partial) {}
  double partial() const noexcept { return partial_; }

 private:
  double partial_;
};

/// An improper integral defining a quantity diverges.
class DivergentIntegralError : public Error {
 public:
  using Error::Error;
};

/// A recovery directive cannot be realized by an admissible principal pair.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

}  // namespace martin
