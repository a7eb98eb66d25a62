#pragma once

#include <stdexcept>
#include <string>

namespace omnisweep {

// Bad arguments, malformed files, violated preconditions. CLI exit code 1.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Solver failures: root finding, LM divergence. CLI exit code 2.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace omnisweep
