#pragma once

#include <stdexcept>
#include <string>

namespace permrl {

// Caller handed us something that violates an operation's precondition.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A request that cannot be satisfied, e.g. more distinct permutations than exist.
class Infeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed file content. The message names the line, field or byte offset.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Well-formed content that breaks a domain invariant (duplicate rows, bad shapes).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values showed up during optimization.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Run configuration rejected before any compute. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace permrl
