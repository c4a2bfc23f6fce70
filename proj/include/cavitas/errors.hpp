#pragma once

#include <stdexcept>
#include <string>

namespace cavitas {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class UnitError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Raised when a configuration value violates an invariant. `field()` names the offending key.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& rule)
      : Error(field + ": " + rule), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class UnknownKey : public Error {
 public:
  explicit UnknownKey(const std::string& key) : Error("unknown configuration key: " + key) {}
};

class UnsupportedPolarization : public Error {
 public:
  explicit UnsupportedPolarization(double theta)
      : Error("polarization angle " + std::to_string(theta) + " rad not supported (only 0)") {}
};

class StabilityError : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

class InsufficientPoints : public Error {
 public:
  using Error::Error;
};

class DegenerateFit : public Error {
 public:
  using Error::Error;
};

class NonFiniteModel : public Error {
 public:
  using Error::Error;
};

}  // namespace cavitas
