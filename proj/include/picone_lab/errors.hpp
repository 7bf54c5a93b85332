#pragma once

#include <stdexcept>
#include <string>

namespace picone_lab {

/// Thrown when an argument violates an operation's precondition.
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// Thrown when an iterative or bracketing procedure cannot produce a result.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace picone_lab
