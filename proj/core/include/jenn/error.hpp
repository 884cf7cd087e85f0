#pragma once

#include <stdexcept>
#include <string>

namespace jenn {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Vector/matrix dimensions disagree with the model they are used with.
class ShapeError : public Error {
  public:
    using Error::Error;
};

/// A computation produced a NaN or infinity.
class NumericalError : public Error {
  public:
    using Error::Error;
};

/// Invalid configuration values or an inconsistent combination of options.
class ConfigError : public Error {
  public:
    using Error::Error;
};

/// Base for every problem reading a container file.
class FormatError : public Error {
  public:
    using Error::Error;
};

class VersionError : public FormatError {
  public:
    using FormatError::FormatError;
};

class ChecksumError : public FormatError {
  public:
    using FormatError::FormatError;
};

class TruncatedError : public FormatError {
  public:
    using FormatError::FormatError;
};

/// The manifest parses but disagrees with itself or with the payload.
class ValidationError : public FormatError {
  public:
    using FormatError::FormatError;
};

} // namespace jenn
