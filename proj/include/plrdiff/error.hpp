#pragma once

#include <stdexcept>
#include <string>

namespace plrdiff {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Tensor/matrix dimensions do not agree.
class ShapeError : public Error {
public:
  using Error::Error;
};

/// A scalar parameter is outside its valid range.
class ParameterError : public Error {
public:
  using Error::Error;
};

/// The predictor lacks a capability the caller asked for (e.g. vjp).
class CapabilityError : public Error {
public:
  using Error::Error;
};

/// A sampling chain produced non-finite values.
class DivergenceError : public Error {
public:
  DivergenceError(const std::string &what, int step) : Error(what), step_(step) {}
  int step() const noexcept { return step_; }

private:
  int step_;
};

/// Denoiser training produced a non-finite loss.
class TrainingError : public Error {
public:
  TrainingError(const std::string &what, long step) : Error(what), step_(step) {}
  long step() const noexcept { return step_; }

private:
  long step_;
};

/// File could not be read, parsed or written.
class IoError : public Error {
public:
  using Error::Error;
};

/// User configuration is invalid. `field` names the offending key.
class ConfigError : public Error {
public:
  ConfigError(const std::string &field, const std::string &what)
    : Error(field + ": " + what), field_(field) {}
  const std::string &field() const noexcept { return field_; }

private:
  std::string field_;
};

} // namespace plrdiff
