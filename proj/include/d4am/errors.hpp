#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace d4am {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or network specification.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Vector/matrix dimensions do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed data: out-of-range label, zero-power signal, ...
class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A classifier did not reach its accuracy floor within its step budget.
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value detected while training; carries the offending step.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, std::int64_t step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::int64_t step() const noexcept { return step_; }

 private:
  std::int64_t step_;
};

}  // namespace d4am
