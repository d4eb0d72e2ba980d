#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wsnest {

// Raised when a support block of a covariance matrix cannot be inverted
// reliably (reciprocal condition estimate below 1e-12 or failed factorization).
class SingularBlock : public std::runtime_error {
 public:
  explicit SingularBlock(const std::string& what) : std::runtime_error(what) {}
};

// The Lagrange-multiplier search could not bracket a root.
class BisectionFailure : public std::runtime_error {
 public:
  explicit BisectionFailure(const std::string& what) : std::runtime_error(what) {}
};

// Threshold iteration hit max_iter before the residual dropped below tol.
class NonConvergence : public std::runtime_error {
 public:
  NonConvergence(const std::string& what, std::size_t iterations, double residual)
      : std::runtime_error(what), iterations_(iterations), residual_(residual) {}

  std::size_t iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

 private:
  std::size_t iterations_;
  double residual_;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace wsnest
