#pragma once

#include <stdexcept>
#include <string>

namespace sfmseg {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed file content (wrong field count, unparsable number, bad header).
class ParseError : public Error {
 public:
  using Error::Error;
};

// The same key appears twice where uniqueness is required.
class DuplicateKeyError : public Error {
 public:
  using Error::Error;
};

// Cross-reference integrity failure (dangling or mismatched links).
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

// Structural problem in a detections / predictions document.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Operands have incompatible shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A value violates a documented range or ordering constraint.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A scene description cannot be realized.
class GenerationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace sfmseg
