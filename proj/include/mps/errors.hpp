#pragma once

#include <stdexcept>
#include <string>

namespace mps {

// Error taxonomy mirrors the CLI exit codes: usage problems (2... see
// cli.hpp) are raised before any work starts, data errors cover malformed
// or inconsistent inputs discovered while loading/validating, and numerical
// errors signal a non-finite loss or an otherwise unrecoverable failure of
// an optimization run.

class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mps
