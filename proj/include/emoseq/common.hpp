#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

namespace emoseq {

// Invalid inputs, malformed files, incompatible shapes. CLI exit code 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values produced during training or inference. CLI exit code 2.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

inline bool all_finite(std::span<const float> xs) {
  for (float x : xs) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace emoseq
