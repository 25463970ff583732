#pragma once

#include <stdexcept>
#include <string>

namespace edna {

/// Base error for the whole engine. Message text carries the full context
/// (paths, keys, line/column) so callers rarely need to catch subtypes.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Config text could not be parsed. Carries 1-based line/column.
class ParseError : public Error {
public:
  ParseError(const std::string& what, int line, int column)
      : Error(what + " (line " + std::to_string(line) + ", column " +
              std::to_string(column) + ")"),
        line(line),
        column(column) {}

  int line;
  int column;
};

/// Stored bytes failed an integrity check (digest mismatch, truncation,
/// bad magic).
class CorruptRecordError : public Error {
public:
  using Error::Error;
};

} // namespace edna
