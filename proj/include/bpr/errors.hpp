#pragma once

#include <stdexcept>
#include <string>

namespace bpr {

// Bad input: wrong dimensions, malformed files, violated preconditions.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Filesystem or codec failure. Messages always carry the offending path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bpr
