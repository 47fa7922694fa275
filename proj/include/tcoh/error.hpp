#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tcoh {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes or extents that do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

class SymmetryError : public Error {
 public:
  using Error::Error;
};

/// Cholesky hit a non-positive pivot. `pivot()` is the zero-based row index.
class FactorizationError : public Error {
 public:
  FactorizationError(std::size_t pivot, const std::string& what)
      : Error(what), pivot_(pivot) {}
  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

class SingularError : public Error {
 public:
  using Error::Error;
};

/// Statistics that are degenerate for the requested computation
/// (singular covariance, too-short segment, too few nonzero eigenvalues).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Argument outside its documented domain.
class ValueError : public Error {
 public:
  using Error::Error;
};

/// File or format problem; the message names the offending path.
class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A parameter became non-finite during training.
class DivergenceError : public Error {
 public:
  DivergenceError(int epoch, std::size_t frame, const std::string& what)
      : Error(what), epoch_(epoch), frame_(frame) {}
  int epoch() const noexcept { return epoch_; }
  std::size_t frame() const noexcept { return frame_; }

 private:
  int epoch_;
  std::size_t frame_;
};

}  // namespace tcoh
