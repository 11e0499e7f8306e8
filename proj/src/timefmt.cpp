#include "relsynth/timefmt.hpp"

#include <cmath>
#include <cstdio>

namespace relsynth::timefmt {

// Howard Hinnant's civil calendar algorithms.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

CivilDate civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  return {y + (m <= 2), m, d};
}

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Reads exactly n digits.
std::optional<unsigned> fixed_digits(std::string_view s, std::size_t pos, std::size_t n) {
  if (pos + n > s.size()) return std::nullopt;
  unsigned v = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_digit(s[pos + i])) return std::nullopt;
    v = v * 10 + static_cast<unsigned>(s[pos + i] - '0');
  }
  return v;
}

}  // namespace

std::optional<double> parse_time_of_day(std::string_view s) {
  std::size_t hour_len = 0;
  while (hour_len < s.size() && is_digit(s[hour_len])) ++hour_len;
  if (hour_len < 1 || hour_len > 2) return std::nullopt;
  const unsigned hour = *fixed_digits(s, 0, hour_len);
  if (hour > 23) return std::nullopt;
  std::size_t pos = hour_len;
  if (pos >= s.size() || s[pos] != ':') return std::nullopt;
  const auto minute = fixed_digits(s, pos + 1, 2);
  if (!minute || *minute > 59) return std::nullopt;
  pos += 3;
  unsigned second = 0;
  if (pos < s.size()) {
    if (s[pos] != ':') return std::nullopt;
    const auto sec = fixed_digits(s, pos + 1, 2);
    if (!sec || *sec > 59 || pos + 3 != s.size()) return std::nullopt;
    second = *sec;
  }
  return hour * 3600.0 + *minute * 60.0 + second;
}

std::optional<double> parse_datetime(std::string_view s) {
  const auto year = fixed_digits(s, 0, 4);
  if (!year || s.size() < 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  const auto month = fixed_digits(s, 5, 2);
  const auto day = fixed_digits(s, 8, 2);
  if (!month || !day || *month < 1 || *month > 12 || *day < 1 || *day > 31) return std::nullopt;
  const double days = static_cast<double>(days_from_civil(*year, *month, *day));
  if (s.size() == 10) return days * kSecondsPerDay;
  if (s[10] != ' ' && s[10] != 'T') return std::nullopt;
  const auto tod = parse_time_of_day(s.substr(11));
  if (!tod) return std::nullopt;
  return days * kSecondsPerDay + *tod;
}

std::string format_date(std::int64_t days) {
  const auto c = civil_from_days(days);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04lld-%02u-%02u", static_cast<long long>(c.year), c.month, c.day);
  return buf;
}

std::string format_clock(double seconds_of_day) {
  const auto total_minutes = static_cast<long long>(std::floor(seconds_of_day / 60.0));
  const long long hour = (total_minutes / 60) % 24;
  const long long minute = total_minutes % 60;
  char buf[16];
  std::snprintf(buf, sizeof buf, "%lld:%02lld", hour, minute);
  return buf;
}

std::string format_datetime(double seconds) {
  const auto days = static_cast<std::int64_t>(std::floor(seconds / kSecondsPerDay));
  return format_date(days) + " " + format_clock(seconds - static_cast<double>(days) * kSecondsPerDay);
}

}  // namespace relsynth::timefmt
