#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace hlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularSymbol : public Error {
 public:
  using Error::Error;
};

/// Raised when fewer than eight grid points cover one correlation length.
class UnderResolved : public Error {
 public:
  using Error::Error;
};

class InvalidSpectrum : public Error {
 public:
  using Error::Error;
};

class RhoUndefined : public Error {
 public:
  using Error::Error;
};

class IncompatibleInputs : public Error {
 public:
  using Error::Error;
};

class InsufficientEnsemble : public Error {
 public:
  using Error::Error;
};

class InsufficientSamples : public Error {
 public:
  using Error::Error;
};

class DegenerateFit : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Krylov iteration hit its iteration cap. Carries the true relative
/// residual recorded after every restart cycle.
class SolverStagnation : public Error {
 public:
  SolverStagnation(const std::string& what, std::vector<double> history)
      : Error(what), history_(std::move(history)) {}

  const std::vector<double>& residual_history() const noexcept { return history_; }

 private:
  std::vector<double> history_;
};

}  // namespace hlab
