#pragma once

#include <stdexcept>
#include <string>

namespace sbpnet {

// Base for every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class SingularMatrixError : public Error {
 public:
  using Error::Error;
};

// A structural assumption of the heavy-traffic theory does not hold for the
// (network, policy) pair: A_H singular, R not a P-matrix, or rho_j >= 1.
class AssumptionFailure : public Error {
 public:
  enum class Kind { singular_high_block, not_p_matrix, p_matrix_indeterminate, unstable_load };

  AssumptionFailure(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

  const char* tag() const noexcept {
    switch (kind_) {
      case Kind::singular_high_block: return "singular_A_H";
      case Kind::not_p_matrix: return "R_not_P_matrix";
      case Kind::p_matrix_indeterminate: return "R_P_matrix_indeterminate";
      case Kind::unstable_load: return "rho_ge_1";
    }
    return "assumption_failure";
  }

 private:
  Kind kind_;
};

class DimensionTooLarge : public Error {
 public:
  using Error::Error;
};

class CombinatorialGuard : public Error {
 public:
  using Error::Error;
};

// Two routes to the same quantity disagree. Signals a wiring bug, not a user error.
class InternalConsistencyError : public Error {
 public:
  using Error::Error;
};

}  // namespace sbpnet
