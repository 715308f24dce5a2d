// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <stdexcept>
#include <string>

namespace tcrm {

/// Invalid hyperparameter or configuration value.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Two collections that must agree in length do not.
class DimensionError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// Correlation requested for an identically-zero thinning vector.
class UndefinedCorrelationError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Normalization requested for a measure whose retained mass is zero.
class EmptyMeasureError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Linear-algebra or floating-point failure inside a sampler step.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A state invariant that the sampler guarantees was found broken.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Caller misuse: empty sample lists, empty held-out sets, and the like.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Unreadable or malformed input files.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

template <class Error>
inline void require(bool condition, const std::string& message) {
  if (!condition) throw Error(message);
}

inline void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": expected " + std::to_string(a) +
                         " entries, got " + std::to_string(b));
  }
}

}  // namespace detail
}  // namespace tcrm
