#pragma once

#include <stdexcept>

namespace lungseg {

// Malformed or inconsistent input data: dimension mismatches, out-of-range
// scores, degenerate statistics.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A file could not be opened, decoded or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lungseg
