#pragma once

#include <stdexcept>
#include <string>

namespace mind {

/// Bad user input: malformed files, unknown references, missing fields.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public InputError {
 public:
  using InputError::InputError;
};

class SchemaError : public InputError {
 public:
  using InputError::InputError;
};

class ReferenceError : public InputError {
 public:
  using InputError::InputError;
};

/// An entity is too far from every lane to attach to the map.
class NoLaneError : public InputError {
 public:
  using InputError::InputError;
};

/// A configured search or memory budget was exceeded.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mind
