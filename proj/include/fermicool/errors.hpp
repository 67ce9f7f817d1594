#pragma once

#include <stdexcept>
#include <string>

namespace fermicool {

/// Base class for every error raised by the library. The CLI maps the
/// concrete subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// An overlap matrix (or any matrix required to be SPD) has a non-positive
/// eigenvalue.
class NotPositiveDefinite : public Error {
 public:
  NotPositiveDefinite(const std::string& what, double eigenvalue)
      : Error(what), eigenvalue_(eigenvalue) {}
  double eigenvalue() const noexcept { return eigenvalue_; }

 private:
  double eigenvalue_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line) : Error(what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// Requested electron count cannot be realised by the system.
class InfeasibleEnsemble : public Error {
 public:
  using Error::Error;
};

/// Numerical failure of a root find, matrix function or integrator.
class SolverAbort : public Error {
 public:
  using Error::Error;
};

/// The canonical Lagrange scalar is undefined because Tr[X + X^T] vanished.
class DegenerateTrace : public SolverAbort {
 public:
  using SolverAbort::SolverAbort;
};

class ScfNotConverged : public Error {
 public:
  ScfNotConverged(const std::string& what, double residual, int iterations)
      : Error(what), residual_(residual), iterations_(iterations) {}
  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

}  // namespace fermicool
