#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace aqa {

// Base class for all library errors. tools/ maps the subtypes to exit codes.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor rank/dimension mismatch; the message names the offending shapes.
struct ShapeError : Error {
  using Error::Error;
};

// Invalid configuration value (unknown mode, kernel larger than input, ...).
struct ConfigError : Error {
  using Error::Error;
};

// A file or record is structurally wrong (bad magic, wrong field count).
struct SchemaError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

// NaN loss, undefined correlation, log of a nonpositive value.
struct NumericError : Error {
  using Error::Error;
};

struct CheckpointError : Error {
  using Error::Error;
};

// Input too short or too degenerate to process (single frame, zero torso).
struct DegenerateInputError : Error {
  using Error::Error;
};

// Malformed text record; byte_offset points at the earliest unparseable byte.
struct ParseError : Error {
  std::size_t byte_offset;
  ParseError(const std::string& msg, std::size_t offset)
      : Error(msg), byte_offset(offset) {}
};

}  // namespace aqa
