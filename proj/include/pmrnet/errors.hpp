#pragma once

#include <stdexcept>
#include <string>

namespace pmrnet {

// All library failures derive from Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class RangeError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class DivisibilityError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class OddSizeError : public ShapeError {
 public:
  using ShapeError::ShapeError;
};

class NonBinaryError : public Error {
 public:
  using Error::Error;
};

class EmptyError : public Error {
 public:
  using Error::Error;
};

// AUC is undefined when the ground truth holds a single class.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

class MissingMaskError : public Error {
 public:
  using Error::Error;
};

class DecodeError : public Error {
 public:
  using Error::Error;
};

class UnknownVariantError : public Error {
 public:
  using Error::Error;
};

class NaNLossError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace pmrnet
