#pragma once

#include <stdexcept>
#include <string>

namespace kt {

// The three error categories map onto the CLI exit codes 1, 2 and 3.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace kt
