#pragma once

#include <stdexcept>
#include <string>

namespace tea {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor/kernel geometry problems: rank mismatch, channel mismatch,
// zero-sized convolution output, and the like.
struct ShapeError : Error {
  using Error::Error;
};

// Bad configuration or argument values (negative strides, label out of
// range, unknown preset name, ...).
struct ValueError : Error {
  using Error::Error;
};

// Misuse of the autodiff tape: backward on a non-scalar, backward through
// a tape twice, loss not recorded on the tape handed in.
struct TapeError : Error {
  using Error::Error;
};

// File level problems. The three subclasses below are deliberately
// distinct types so callers (and tests) can tell corruption modes apart.
struct IoError : Error {
  using Error::Error;
};

struct BadMagicError : IoError {
  using IoError::IoError;
};

struct TruncatedFileError : IoError {
  using IoError::IoError;
};

struct VersionError : IoError {
  using IoError::IoError;
};

// Stored digest does not match recomputed digest, or a checkpoint was
// written for a different network spec.
struct DigestError : IoError {
  using IoError::IoError;
};

}  // namespace tea
