#pragma once

#include <stdexcept>
#include <string>

namespace predsens {

// Bad inputs: malformed files, inconsistent shapes, out-of-range options.
// The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failures that survive all recovery attempts, e.g. a target
// correlation matrix that stays indefinite after the full Tikhonov
// escalation. The CLI maps this to exit code 2.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace predsens
