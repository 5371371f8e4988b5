#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mog {

// Base of every error raised by the library. Each subclass maps to one
// failure family so callers (and the CLI exit-code table) can branch on type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class ContractError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class FileError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class UndefinedConversionError : public Error {
 public:
  using Error::Error;
};

class DegenerateMappingError : public Error {
 public:
  using Error::Error;
};

class TrainingDivergedError : public NumericError {
 public:
  TrainingDivergedError(std::size_t step, const std::string& what)
      : NumericError(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace mog
