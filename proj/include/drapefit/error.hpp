#pragma once

#include <stdexcept>
#include <string>

namespace drapefit {

// Error taxonomy shared by all modules. The CLI maps UsageError to exit
// code 2 and everything else derived from Error to exit code 1.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// File exists but does not parse (carries the offending line number).
class MalformedFileError : public Error {
public:
  MalformedFileError(const std::string& path, int line, const std::string& what)
      : Error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

private:
  int line_;
};

// A structural invariant does not hold (names the offending element).
class ValidationError : public Error {
public:
  using Error::Error;
};

// A finite element collapsed below the evaluable threshold.
class SingularElementError : public Error {
public:
  using Error::Error;
};

// A vertex is at non-positive distance from a collider.
class PenetrationError : public Error {
public:
  using Error::Error;
};

// Newton failed to reach tolerance within the iteration budget.
class SolverError : public Error {
public:
  SolverError(const std::string& msg, double residual)
      : Error(msg), residual_(residual) {}
  double residual() const { return residual_; }

private:
  double residual_ = 0.0;
};

// Non-finite value encountered where finiteness is a precondition.
class NumericError : public Error {
public:
  using Error::Error;
};

// Weight inpainting found a mesh component with no Dirichlet data.
class UnconstrainedRegionError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

// Bad command line; distinct so the CLI can exit 2 instead of 1.
class UsageError : public Error {
public:
  using Error::Error;
};

} // namespace drapefit
