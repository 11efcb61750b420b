// SPDX-License-Identifier: Apache-2.0
//
// Exception types shared by all eqnet modules. Argument errors use
// std::invalid_argument directly.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace eqnet {

/// A matrix (or a triangular factor) is numerically rank deficient.
class SingularMatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An object is used in a state that does not allow the operation
/// (stale tape, unfrozen teacher, wrong LLR domain).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A problem is too large for exhaustive enumeration.
class SizeError : public std::length_error {
 public:
  using std::length_error::length_error;
};

class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, std::size_t epoch)
      : std::runtime_error(what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}

  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

/// Too few distinct samples to fit the requested number of levels.
class DegenerateDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// SNR grid search saw probe estimates that contradict monotonicity.
class SearchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Missing artifacts, malformed config files, unreadable inputs.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace eqnet
