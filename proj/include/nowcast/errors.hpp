#pragma once

#include <stdexcept>
#include <string>

namespace nowcast {

// Bad flags, bad config keys, violated option invariants.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed files, misaligned frames, empty datasets, I/O failures.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A loss or model output went non-finite during training or inference.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nowcast
