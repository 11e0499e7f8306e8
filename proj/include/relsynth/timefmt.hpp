#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

// Calendar and clock helpers. Datetimes are seconds since 1970-01-01 00:00 (no
// time zones); times of day are seconds since midnight.
namespace relsynth::timefmt {

constexpr double kSecondsPerDay = 86400.0;

/// Days since epoch for a proleptic Gregorian date (any day-of-month is accepted
/// and rolls over arithmetically).
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d);

struct CivilDate {
  std::int64_t year;
  unsigned month;
  unsigned day;
};
CivilDate civil_from_days(std::int64_t days);

/// "YYYY-MM-DD", optionally followed by ' ' or 'T' and "H:MM" or "H:MM:SS".
std::optional<double> parse_datetime(std::string_view text);

/// "H:MM" or "H:MM:SS" with hour 0-23 (one or two digits).
std::optional<double> parse_time_of_day(std::string_view text);

/// "YYYY-MM-DD".
std::string format_date(std::int64_t days);

/// "H:MM", hour without leading zero ("4:00", "10:30").
std::string format_clock(double seconds_of_day);

/// "YYYY-MM-DD H:MM".
std::string format_datetime(double seconds);

}  // namespace relsynth::timefmt
