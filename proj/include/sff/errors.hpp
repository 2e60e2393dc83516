#ifndef SFF_ERRORS_HPP
#define SFF_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace sff {

// Incompatible tensor shapes or dimension mismatches between components.
class ShapeError : public std::invalid_argument {
 public:
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

// Invalid configuration or arguments supplied by the caller.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// Malformed or missing input data (files, corpora, ground truth).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values or degenerate numerics during training/inference.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sff

#endif  // SFF_ERRORS_HPP
