#pragma once

#include <stdexcept>
#include <string>

namespace choquard {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* code() const noexcept { return "error"; }
};

/// An argument lies outside the mathematical domain of the operation
/// (alpha outside (0,3), non-positive grading, malformed profile, ...).
class DomainError : public Error {
 public:
  using Error::Error;
  const char* code() const noexcept override { return "domain_error"; }
};

/// The grid cannot resolve the requested feature (bubble scale, diagonal split).
class ResolutionError : public Error {
 public:
  using Error::Error;
  const char* code() const noexcept override { return "resolution_error"; }
};

/// -Laplace + a is not coercive on H^1_0 of the ball.
class CoercivityError : public Error {
 public:
  using Error::Error;
  const char* code() const noexcept override { return "coercivity_error"; }
};

/// An iterative procedure failed to converge or to bracket a root.
class ConvergenceError : public Error {
 public:
  using Error::Error;
  const char* code() const noexcept override { return "convergence_error"; }
};

}  // namespace choquard
