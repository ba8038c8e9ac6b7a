#pragma once

#include <stdexcept>
#include <string>

#include "wagf/real.hpp"

WAGF_BEGIN_NAMESPACE

/// Operand shapes are incompatible with an operation's contract.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A NaN/Inf was produced, or a value left its admissible range.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or missing input data (CSV, PPM, raw tensors, labels).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or synthesis spec.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unreadable, truncated or incompatible checkpoint.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

WAGF_END_NAMESPACE
