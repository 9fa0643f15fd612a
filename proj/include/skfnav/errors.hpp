#pragma once

#include <stdexcept>
#include <string>

namespace skfnav {

/// Invalid or inconsistent user configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical breakdown inside a filter: non-PSD covariance, singular
/// innovation covariance, non-finite propagation.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Query outside the valid domain of a model (field hull, gimbal lock, pole).
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller broke a documented precondition.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace skfnav
