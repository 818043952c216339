#include "rtwatch/csv.hpp"

#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "rtwatch/errors.hpp"

namespace rtwatch::csv {

bool Reader::next(std::vector<std::string>& fields) {
  fields.clear();
  std::string field;
  bool in_quotes = false;
  bool any = false;
  bool quoted_field = false;

  if (first_) {
    first_ = false;
    if (in_.peek() == 0xEF) {
      char bom[3];
      in_.read(bom, 3);
      if (!(static_cast<unsigned char>(bom[0]) == 0xEF && static_cast<unsigned char>(bom[1]) == 0xBB &&
            static_cast<unsigned char>(bom[2]) == 0xBF)) {
        field.append(bom, static_cast<std::size_t>(in_.gcount()));
        any = true;
      }
    }
  }

  int ch;
  while ((ch = in_.get()) != std::char_traits<char>::eof()) {
    any = true;
    char c = static_cast<char>(ch);
    if (in_quotes) {
      if (c == '"') {
        if (in_.peek() == '"') {
          in_.get();
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && field.empty() && !quoted_field) {
      in_quotes = true;
      quoted_field = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      quoted_field = false;
    } else if (c == '\r') {
      if (in_.peek() == '\n') in_.get();
      break;
    } else if (c == '\n') {
      break;
    } else {
      field.push_back(c);
    }
  }
  if (!any) return false;
  fields.push_back(std::move(field));
  ++records_;
  return true;
}

Header::Header(std::vector<std::string> names) : names_(std::move(names)) {
  for (std::size_t i = 0; i < names_.size(); ++i) index_.emplace(std::string(trim(names_[i])), i);
}

std::optional<std::size_t> Header::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> Header::find_any(std::initializer_list<std::string_view> aliases) const {
  for (auto a : aliases)
    if (auto i = find(a)) return i;
  return std::nullopt;
}

std::size_t Header::require(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw SchemaDriftError(std::string(name));
}

std::size_t Header::require_any(std::initializer_list<std::string_view> aliases) const {
  if (auto i = find_any(aliases)) return *i;
  throw SchemaDriftError(std::string(*aliases.begin()));
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_double(std::string_view cell) {
  cell = trim(cell);
  if (cell.empty()) return std::nullopt;
  if (cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string format_fixed(double value, int decimals) {
  std::string s = fmt::format("{:.{}f}", value, decimals);
  // Avoid "-0.000" which would make otherwise identical outputs differ.
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

}  // namespace rtwatch::csv
