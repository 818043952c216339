#pragma once

#include <cstddef>
#include <initializer_list>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace rtwatch::csv {

// Streaming RFC 4180 reader: quoted fields, doubled quotes, embedded
// newlines, CRLF or LF line ends, optional UTF-8 BOM.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  // Reads the next record into `fields`. Returns false at end of input.
  bool next(std::vector<std::string>& fields);

  std::size_t records_read() const { return records_; }

 private:
  std::istream& in_;
  std::size_t records_ = 0;
  bool first_ = true;
};

// Column lookup over a header record. Unknown extra columns are ignored.
class Header {
 public:
  Header() = default;
  explicit Header(std::vector<std::string> names);

  std::optional<std::size_t> find(std::string_view name) const;
  // First alias present in the header.
  std::optional<std::size_t> find_any(std::initializer_list<std::string_view> aliases) const;
  // Throws SchemaDriftError naming `name` when absent.
  std::size_t require(std::string_view name) const;
  std::size_t require_any(std::initializer_list<std::string_view> aliases) const;

  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
};

std::string_view trim(std::string_view s);

// Strict numeric parse of a whole (trimmed) cell; nullopt for blank or garbage.
std::optional<double> parse_double(std::string_view cell);

// Quotes a field when it contains a delimiter, quote or newline.
std::string escape(std::string_view field);

// Fixed-point formatting with trailing zeros kept, locale-independent.
std::string format_fixed(double value, int decimals);

}  // namespace rtwatch::csv
