#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace augsplice {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Density requested on a block with no indices.
class DegenerateBlock : public Error {
 public:
  using Error::Error;
};

/// Two blocks or a block and a key disagree on the number of modes.
class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

/// A removal block is not contained entry-wise in the block it is removed from.
class NotASubblock : public Error {
 public:
  using Error::Error;
};

class PreconditionViolated : public Error {
 public:
  using Error::Error;
};

/// A slice was handed to the engine out of time order.
class OutOfOrderSlice : public Error {
 public:
  using Error::Error;
};

/// A tuple's time bin precedes the engine frontier.
class TimeRegression : public Error {
 public:
  using Error::Error;
};

class InvalidValue : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Injection target needs more distinct cells than the block volume holds.
class DensityInfeasible : public Error {
 public:
  using Error::Error;
};

enum class ParseErrorKind { MalformedLine, BadTimestamp, NegativeValue };

const char* to_string(ParseErrorKind kind);

/// Ingestion failure tied to a 1-based input line.
class ParseError : public Error {
 public:
  ParseError(ParseErrorKind kind, std::uint64_t line, const std::string& detail);

  ParseErrorKind kind() const { return kind_; }
  std::uint64_t line() const { return line_; }

 private:
  ParseErrorKind kind_;
  std::uint64_t line_;
};

}  // namespace augsplice
