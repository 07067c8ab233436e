#pragma once

#include <stdexcept>
#include <string>

namespace seqcls {

/// Invalid hyperparameters, flags, or structural configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Tensor shapes that do not fit the operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Bad caller-supplied data (label ids out of range, length mismatches).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Violated API contract, e.g. backward() on a non-scalar value.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A parameter whose value makes the reparameterization undefined.
class DegenerateParameterError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// NaN/Inf surfaced during training; the run must abort.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed container or checkpoint file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace seqcls
