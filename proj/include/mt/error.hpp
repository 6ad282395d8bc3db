#pragma once

#include <stdexcept>
#include <string>

namespace mt {

// Invalid configuration (bad file, bad hyperparameter, violated precondition
// the caller controls). Maps to CLI exit code 1.
struct config_error : std::runtime_error {
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// Failure while processing data or running a pipeline stage (missing file,
// malformed input, numerical abort). Maps to CLI exit code 2.
struct data_error : std::runtime_error {
  explicit data_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mt
