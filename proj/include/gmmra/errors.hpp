#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace gmmra {

// Base of everything this library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid arguments, mismatched lengths, out-of-range model parameters.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Input data contains NaN/Inf or is otherwise unusable.
class DataError : public Error {
 public:
  using Error::Error;
};

// Matrix is not SPD where SPD is required.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Requested model/moment combination is not implemented.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

// Weighting matrix cannot be formed without regularization.
class ConditioningError : public Error {
 public:
  ConditioningError(const std::string& what, double cond)
      : Error(what), condition_number(cond) {}
  double condition_number;
};

// NaN showed up in an objective or gradient. Carries the last finite iterate.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, std::vector<double> last_safe)
      : Error(what), last_safe_iterate(std::move(last_safe)) {}
  std::vector<double> last_safe_iterate;
};

// Every multi-start failed. Carries the best iterate seen.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> best, double best_objective)
      : Error(what), best_iterate(std::move(best)), best_objective(best_objective) {}
  std::vector<double> best_iterate;
  double best_objective;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace gmmra
