#pragma once

#include <stdexcept>
#include <string>

namespace selfmvs {

// Violated precondition or invariant (bad dimensions, out-of-range index,
// inconsistent view set). The CLI maps this to exit code 1.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed file content. Maps to exit code 1.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing file, unreadable directory, short write. Maps to exit code 2.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Optimizer produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int iteration, const std::string& what)
      : std::runtime_error(what), iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

#define SELFMVS_CHECK(cond, msg)                      \
  do {                                                \
    if (!(cond)) throw ::selfmvs::ContractError(msg); \
  } while (0)

}  // namespace selfmvs
