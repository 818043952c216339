#include "rtwatch/date.hpp"

#include <charconv>

#include "rtwatch/errors.hpp"

namespace rtwatch {

namespace {

std::optional<int> parse_digits(std::string_view text) {
  if (text.empty()) return std::nullopt;
  for (char c : text)
    if (c < '0' || c > '9') return std::nullopt;
  int value = 0;
  std::from_chars(text.data(), text.data() + text.size(), value);
  return value;
}

std::optional<Date> make(std::optional<int> y, std::optional<int> m, std::optional<int> d) {
  if (!y || !m || !d) return std::nullopt;
  std::chrono::year_month_day ymd{std::chrono::year(*y), std::chrono::month(static_cast<unsigned>(*m)),
                                  std::chrono::day(static_cast<unsigned>(*d))};
  if (!ymd.ok()) return std::nullopt;
  return Date::from_sys_days(std::chrono::sys_days(ymd));
}

}  // namespace

Date::Date(int year, unsigned month, unsigned day) {
  auto d = make(year, static_cast<int>(month), static_cast<int>(day));
  if (!d) throw DataError("invalid calendar date");
  days_ = d->days_since_epoch();
}

std::optional<Date> Date::parse_iso(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  return make(parse_digits(text.substr(0, 4)), parse_digits(text.substr(5, 2)), parse_digits(text.substr(8, 2)));
}

std::optional<Date> Date::parse_compact(std::string_view text) {
  if (text.size() != 8) return std::nullopt;
  return make(parse_digits(text.substr(0, 4)), parse_digits(text.substr(4, 2)), parse_digits(text.substr(6, 2)));
}

std::optional<Date> Date::parse_any(std::string_view text) {
  if (auto d = parse_iso(text)) return d;
  if (auto d = parse_compact(text)) return d;
  if (text.size() == 7 && text[4] == '-') return make(parse_digits(text.substr(0, 4)), parse_digits(text.substr(5, 2)), 1);
  return std::nullopt;
}

Date Date::from_iso(std::string_view text) {
  auto d = parse_iso(text);
  if (!d) throw DataError("invalid ISO date '" + std::string(text) + "'");
  return *d;
}

std::string Date::iso() const {
  std::chrono::year_month_day ymd{to_sys_days()};
  char buf[16];
  int y = static_cast<int>(ymd.year());
  unsigned m = static_cast<unsigned>(ymd.month());
  unsigned d = static_cast<unsigned>(ymd.day());
  buf[0] = static_cast<char>('0' + (y / 1000) % 10);
  buf[1] = static_cast<char>('0' + (y / 100) % 10);
  buf[2] = static_cast<char>('0' + (y / 10) % 10);
  buf[3] = static_cast<char>('0' + y % 10);
  buf[4] = '-';
  buf[5] = static_cast<char>('0' + m / 10);
  buf[6] = static_cast<char>('0' + m % 10);
  buf[7] = '-';
  buf[8] = static_cast<char>('0' + d / 10);
  buf[9] = static_cast<char>('0' + d % 10);
  return std::string(buf, 10);
}

}  // namespace rtwatch
