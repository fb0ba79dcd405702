#pragma once

#include <stdexcept>
#include <string>

namespace fastgate {

// Numerical failure (non-convergence, instability). CLI maps this to exit code 3,
// std::invalid_argument to exit code 2.
class numerical_error : public std::runtime_error {
 public:
  explicit numerical_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Axial Hessian not positive definite: the requested chain is not a stable
// linear configuration.
class unstable_configuration : public numerical_error {
 public:
  explicit unstable_configuration(const std::string& msg) : numerical_error(msg) {}
};

// Fock-space truncation too small for the requested evolution.
class truncation_error : public numerical_error {
 public:
  truncation_error(const std::string& msg, int suggested_n_max)
      : numerical_error(msg), suggested_n_max(suggested_n_max) {}
  int suggested_n_max;
};

}  // namespace fastgate
