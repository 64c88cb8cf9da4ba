#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vebm {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A NaN or Inf appeared at an op boundary.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// Langevin chain blew up. Carries the step that produced the bad state.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t step)
      : Error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents (bad magic, truncation, version mismatch).
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace vebm
