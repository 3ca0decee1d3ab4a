#pragma once

#include <stdexcept>
#include <string>

namespace brainage {

// Caller broke an operation's shape or range contract.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A hyperparameter or argument value is outside its admissible range.
class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input is well-formed but statistically degenerate (zero variance, too few classes).
class DegenerateInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A required subset (e.g. a systematic-bias tail) is empty.
class InsufficientSamples : public std::runtime_error {
 public:
  InsufficientSamples(std::string which, const std::string& what)
      : std::runtime_error(what), which_(std::move(which)) {}
  const std::string& which() const noexcept { return which_; }

 private:
  std::string which_;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(int epoch, const std::string& what)
      : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

// Malformed experiment config or data file.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace brainage
