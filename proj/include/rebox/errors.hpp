#pragma once

#include <stdexcept>
#include <string>

namespace rebox {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A box violates x2 > x1 / y2 > y1, or collapsed after clipping.
struct InvalidBoxError : Error {
  using Error::Error;
};

/// A regression output is not a box (nx2 <= nx1 or ny2 <= ny1).
struct DegeneratePredictionError : Error {
  using Error::Error;
};

/// Tensor or layer shape mismatch.
struct ShapeError : Error {
  using Error::Error;
};

/// Structured-file problem (checkpoint, dataset, scenes file).
struct FormatError : Error {
  enum class Kind { BadMagic, BadVersion, Truncated, BadCrc, Malformed };

  FormatError(Kind k, const std::string& msg) : Error(msg), kind(k) {}
  Kind kind;
};

/// Training loss became non-finite or exceeded the divergence cap.
struct DivergedError : Error {
  using Error::Error;
};

/// Config file rejected: syntax error, unknown key, or bad value.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace rebox
