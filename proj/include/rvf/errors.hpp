#pragma once

#include <stdexcept>
#include <string>

namespace rvf {

// Invalid structural input: malformed transition matrix, bad chain shape,
// observation map that does not cover its range, and so on.
class TopologyError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A stated modelling assumption does not hold (e.g. reward bounds
// incompatible with the emphasis floor D). The message names the
// violated inequality.
class ConstraintError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Linear algebra failed (singular system, residual too large).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A value passed to an operator lies outside its admissible set.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Requested combination of options is not supported
// (e.g. lambda-return targets before the episode has completed).
class UnsupportedModeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Learning blew up: non-finite or absurdly large update quantities.
// Carries the step index at which the guard tripped.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, int step)
      : std::runtime_error(what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

// Experiment spec file problems: unknown key, bad value, missing schema.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed data handed to a writer (empty aggregate, ragged curves).
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rvf
