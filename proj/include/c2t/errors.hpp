#pragma once

#include <stdexcept>
#include <string>

namespace c2t {

// Bad inputs, malformed files, schema mismatches. CLI maps this to exit code 2.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace c2t
