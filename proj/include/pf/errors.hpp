#pragma once

#include <stdexcept>
#include <string>

namespace pf {

// Bad arguments or data that violate a documented contract. CLI exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Unreadable or malformed files (IDX, PFEMB1, bundles).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values during optimization. CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, int step, long iteration)
      : std::runtime_error(what), step_(step), iteration_(iteration) {}

  int step() const noexcept { return step_; }
  long iteration() const noexcept { return iteration_; }

 private:
  int step_;
  long iteration_;
};

}  // namespace pf
