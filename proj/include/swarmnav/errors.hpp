#pragma once

#include <stdexcept>
#include <string>

namespace swarmnav {

// Caller broke a documented precondition (stale tape, stepping a finished
// episode, mismatched dimensions).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class DimensionError : public ContractViolation {
 public:
  using ContractViolation::ContractViolation;
};

// Invalid or unsatisfiable configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A loss or gradient went non-finite during an update.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace swarmnav
