#pragma once

#include <stdexcept>
#include <string>

namespace pupinet {

// Violated shape or dimension precondition (odd dims, mismatched operands, ...).
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or missing volume/checkpoint files.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration; the CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unrecoverable training condition (non-finite loss, missing or tampered
// supervisors); the CLI maps this to exit code 3.
class TrainingAbort : public std::runtime_error {
 public:
  TrainingAbort(const std::string& what, std::string term = {}, long step = -1)
      : std::runtime_error(what), term_(std::move(term)), step_(step) {}

  const std::string& term() const noexcept { return term_; }
  long step() const noexcept { return step_; }

 private:
  std::string term_;
  long step_;
};

}  // namespace pupinet
