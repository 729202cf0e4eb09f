#pragma once

#include <stdexcept>
#include <string>

namespace vfluct {

// Argument outside the operation's domain (bad s/t ordering, empty sample, eps = 0, ...).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A series or quadrature failed to reach its tolerance.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A recursion produced NaN or overflowed.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Var(Y_t) <= 0: the Gaussian limit is degenerate.
class DegenerateLawError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid experiment configuration; message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace vfluct
