#pragma once

#include <stdexcept>
#include <string>

namespace faircl {

// Invalid configuration: bad model/strategy/experiment settings. CLI exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent data: manifests, labels, shapes of user input. CLI exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values during training. CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// API misuse, e.g. consuming a gradient tape twice.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace faircl
