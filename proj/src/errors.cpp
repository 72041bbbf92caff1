#include "augsplice/errors.hpp"

namespace augsplice {

const char* to_string(ParseErrorKind kind) {
  switch (kind) {
    case ParseErrorKind::MalformedLine:
      return "MalformedLine";
    case ParseErrorKind::BadTimestamp:
      return "BadTimestamp";
    case ParseErrorKind::NegativeValue:
      return "NegativeValue";
  }
  return "Unknown";
}

ParseError::ParseError(ParseErrorKind kind, std::uint64_t line, const std::string& detail)
    : Error("line " + std::to_string(line) + ": " + to_string(kind) + ": " + detail),
      kind_(kind),
      line_(line) {}

}  // namespace augsplice
