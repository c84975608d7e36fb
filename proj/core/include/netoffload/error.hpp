#pragma once

#include <stdexcept>
#include <string>

namespace netoffload {

// Malformed or inconsistent input (files, configs, parameters). The CLI maps
// this to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// A precondition violated by the caller at run time, e.g. a decreasing
// simulation clock fed to an estimator.
class PreconditionError : public std::logic_error {
 public:
  explicit PreconditionError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace netoffload
