#pragma once

#include <stdexcept>
#include <string>

namespace seqdn {

// Bad or unreadable user input: malformed files, unknown keys, missing paths.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite losses or divergence during training.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes incompatible with an operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace seqdn
