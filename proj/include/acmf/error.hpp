#pragma once

#include <stdexcept>
#include <string>

namespace acmf {

// Base of every error the library raises. The CLI maps the subclasses onto
// exit codes: ConfigError -> 2, FormatError -> 3, NumericalError -> 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

enum class FormatErrorKind { kBadMagic, kVersionMismatch, kShapeMismatch, kTruncated, kMalformed, kIo };

class FormatError : public Error {
 public:
  FormatError(FormatErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
  FormatErrorKind kind() const noexcept { return kind_; }

 private:
  FormatErrorKind kind_;
};

}  // namespace acmf
