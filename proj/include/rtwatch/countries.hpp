#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace rtwatch {

struct CountryCodes {
  std::string_view alpha3;
  std::string_view alpha2;
  std::string_view name;
};

// ISO 3166-1 lookup by alpha-3 or alpha-2 code (case-insensitive).
std::optional<CountryCodes> find_country(std::string_view code);

// Lowercase, trim, and collapse internal whitespace for name matching.
std::string normalize_name(std::string_view name);

}  // namespace rtwatch
