#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stiffavg {

// Base of everything the library throws on a broken contract.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class ConfigurationError : public Error {
 public:
  using Error::Error;
};

class CapabilityError : public Error {
 public:
  using Error::Error;
};

class UnsupportedMode : public Error {
 public:
  using Error::Error;
};

class DegenerateFit : public Error {
 public:
  using Error::Error;
};

class OutOfDomain : public Error {
 public:
  using Error::Error;
};

/// Non-finite value met while integrating a characteristic.
class IntegrationFailure : public Error {
 public:
  IntegrationFailure(const std::string& what, double s) : Error(what), s_(s) {}
  double flow_time() const noexcept { return s_; }

 private:
  double s_;
};

/// A weight matrix Q (or P) that is not SPD at some quadrature node.
class WeightMatrixError : public Error {
 public:
  WeightMatrixError(const std::string& what, std::size_t node) : Error(what), node_(node) {}
  std::size_t node() const noexcept { return node_; }

 private:
  std::size_t node_;
};

/// Krylov solver that failed to reach its tolerance.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, int iterations) : Error(what), iterations_(iterations) {}
  int iterations() const noexcept { return iterations_; }

 private:
  int iterations_;
};

}  // namespace stiffavg
