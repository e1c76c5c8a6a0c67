#pragma once

#include <stdexcept>

namespace scatter {

// Invalid parameters, malformed configs, inconsistent input data. CLI exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Filesystem failures and unreadable files. CLI exit code 3.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace scatter
