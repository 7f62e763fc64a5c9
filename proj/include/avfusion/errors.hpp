#pragma once

#include <stdexcept>
#include <string>

namespace avf {

// Base of every error raised by the library. The CLI maps the category to an
// exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand dimensions do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Zero vector, empty list, all-null input and friends.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// Train-mode batch norm needs at least two rows.
class DegenerateBatchError : public Error {
 public:
  using Error::Error;
};

// Caches, gradient lists or optimizer state that do not belong together.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class LabelError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

enum class ParseErrorKind { BadMagic, Version, Truncated, Dimension, Malformed };

class ParseError : public Error {
 public:
  ParseError(ParseErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
  ParseErrorKind kind() const noexcept { return kind_; }

 private:
  ParseErrorKind kind_;
};

// Checkpoint holds a different head than the caller asked for.
class HeadKindError : public Error {
 public:
  using Error::Error;
};

}  // namespace avf
