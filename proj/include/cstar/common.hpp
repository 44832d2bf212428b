#pragma once

#include <stdexcept>
#include <string>

namespace cstar {

inline constexpr const char* kVersion = "0.1.0";

// Error taxonomy mirrored by the CLI exit codes: validation -> 2,
// numeric -> 3, io -> 4.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cstar
