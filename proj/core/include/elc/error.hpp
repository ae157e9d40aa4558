#pragma once

#include <stdexcept>
#include <string>

namespace elc {

// Base of every recoverable failure raised by the library. The CLI maps the
// concrete subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

enum class ExitCode : int {
  kSuccess = 0,
  kConfig = 1,
  kData = 2,
  kNumeric = 3,
};

}  // namespace elc
