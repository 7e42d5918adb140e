#pragma once

#include <stdexcept>
#include <string>

namespace prpm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or incomplete configuration (missing column, bad key, bad value).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data violates a precondition (single-class labels, empty arm, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Feature vector does not match the schema a model was trained on.
class SchemaMismatch : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read, or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace prpm
