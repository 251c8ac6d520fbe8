#pragma once

#include <stdexcept>
#include <string>

namespace adsm {

// Violated precondition of a library call (bad shape, out-of-range argument).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A computation produced NaN or Inf.
class NumericFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing, unreadable or malformed input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A persisted artifact was written by an incompatible version or config.
class IncompatibleError : public DataError {
 public:
  using DataError::DataError;
};

// A persisted artifact failed its integrity check.
class CorruptionError : public DataError {
 public:
  using DataError::DataError;
};

#define ADSM_REQUIRE(cond, msg)                                   \
  do {                                                            \
    if (!(cond)) throw ::adsm::ContractViolation(std::string(msg)); \
  } while (0)

}  // namespace adsm
