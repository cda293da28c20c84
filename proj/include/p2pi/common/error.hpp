#pragma once

#include <stdexcept>
#include <string>

namespace p2pi {

/// Base class for all toolkit errors. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad or missing configuration (CLI exit 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Filesystem / stream failure (CLI exit 3).
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file: wrong columns, bad cell, bad header.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Series content violates a data precondition (too short, all-NaN, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Two streams cannot be aligned in time.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument value (out-of-range index, even filter window, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Tensor or series width/shape mismatch.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value where finiteness is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint container violation (magic, version, shape, truncation).
class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// A fairness / consistency guard refused to proceed (CLI exit 6).
class GuardError : public Error {
 public:
  using Error::Error;
};

}  // namespace p2pi
