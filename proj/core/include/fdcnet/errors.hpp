#pragma once

#include <stdexcept>
#include <string>

namespace fdcnet {

// Tensor shapes or lengths that do not fit together.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Bad configuration value (unknown activation kind, r not dividing C, ...).
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Caller broke an operation's precondition.
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// A NaN or Inf reached a tensor.
struct NonFiniteError : std::domain_error {
  using std::domain_error::domain_error;
};

// Input has no usable spread: zero-RMS signal, single-class labels, B*T < 2.
struct DegenerateError : std::domain_error {
  using std::domain_error::domain_error;
};

// Binary or text file that does not match its declared layout.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace fdcnet
