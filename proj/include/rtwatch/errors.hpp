#pragma once

#include <stdexcept>
#include <string>

namespace rtwatch {

// Bad or insufficient input data. Maps to CLI exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An upstream CSV no longer carries a column the parser needs.
class SchemaDriftError : public DataError {
 public:
  explicit SchemaDriftError(const std::string& column)
      : DataError("schema drift: missing column '" + column + "'"), column_(column) {}

  const std::string& column() const { return column_; }

 private:
  std::string column_;
};

// Network or cache failure. Maps to CLI exit code 2.
class SourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid command-line usage or configuration. Maps to CLI exit code 64.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rtwatch
