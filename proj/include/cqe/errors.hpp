#pragma once

#include <stdexcept>
#include <string>

namespace cqe {

/// Bad input: inconsistent configuration, out-of-range indices, basis mismatch.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// A numerical procedure failed to produce a trustworthy result.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cqe
