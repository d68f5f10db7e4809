#pragma once

#include <stdexcept>
#include <string>

namespace noiseforge {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Zero-area image or non-positive target dimension.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Non-finite pixel or value.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the calibrated domain (negative severity, s_q in (0,1), ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Mismatched mask/image shapes or class counts.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Metric or SNR undefined for the given input.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input; the message carries file and line.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Requested split cannot be realized with the available patients.
class InfeasibleSplitError : public Error {
 public:
  using Error::Error;
};

}  // namespace noiseforge
