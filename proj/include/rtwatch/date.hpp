#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace rtwatch {

// Calendar day stored as days since 1970-01-01.
class Date {
 public:
  constexpr Date() = default;
  constexpr explicit Date(std::int32_t days_since_epoch) : days_(days_since_epoch) {}
  Date(int year, unsigned month, unsigned day);

  static Date from_sys_days(std::chrono::sys_days d) {
    return Date(static_cast<std::int32_t>(d.time_since_epoch().count()));
  }
  std::chrono::sys_days to_sys_days() const { return std::chrono::sys_days(std::chrono::days(days_)); }

  constexpr std::int32_t days_since_epoch() const { return days_; }

  // Accepts YYYY-MM-DD.
  static std::optional<Date> parse_iso(std::string_view text);
  // Accepts YYYYMMDD (OxCGRT).
  static std::optional<Date> parse_compact(std::string_view text);
  // YYYY-MM-DD, YYYYMMDD or YYYY-MM (first of month).
  static std::optional<Date> parse_any(std::string_view text);
  // Throws DataError on malformed input.
  static Date from_iso(std::string_view text);

  std::string iso() const;

  constexpr Date operator+(std::int32_t n) const { return Date(days_ + n); }
  constexpr Date operator-(std::int32_t n) const { return Date(days_ - n); }
  constexpr std::int32_t operator-(Date other) const { return days_ - other.days_; }
  constexpr Date& operator++() {
    ++days_;
    return *this;
  }

  constexpr auto operator<=>(const Date&) const = default;

 private:
  std::int32_t days_ = 0;
};

}  // namespace rtwatch
