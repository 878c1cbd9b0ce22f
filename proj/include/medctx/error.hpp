#pragma once

#include <stdexcept>
#include <string>

namespace medctx {

// Root of every error the library throws. Subclasses name the failure kind so
// callers (notably the CLI) can map them to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed standoff line; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class RangeError : public Error {
  using Error::Error;
};
class IntegrityError : public Error {
  using Error::Error;
};
class SchemaError : public Error {
  using Error::Error;
};
class ConflictError : public Error {
  using Error::Error;
};
class DataError : public Error {
  using Error::Error;
};
class CapacityError : public Error {
  using Error::Error;
};
class ConfigError : public Error {
  using Error::Error;
};
class LengthError : public Error {
  using Error::Error;
};
class IndexError : public Error {
  using Error::Error;
};
class InputError : public Error {
  using Error::Error;
};
class KeyError : public Error {
  using Error::Error;
};
class SizeError : public Error {
  using Error::Error;
};
class CorruptionError : public Error {
  using Error::Error;
};
class CompatibilityError : public Error {
  using Error::Error;
};

// Non-finite loss. origin names the offending example (doc id and sentence span).
class NumericError : public Error {
 public:
  NumericError(const std::string& origin, const std::string& what)
      : Error(what + " (example " + origin + ")"), origin_(origin) {}
  const std::string& origin() const noexcept { return origin_; }

 private:
  std::string origin_;
};

}  // namespace medctx
