#pragma once

#include <stdexcept>
#include <string>

namespace skylane {

/// Input failed a precondition or schema check.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A referenced id (airport, airway, uav, ...) does not exist.
class LookupError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values reached the numerics.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SchedulingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace skylane
