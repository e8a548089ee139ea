#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace trackline {

// All simulation time is virtual UTC, kept as integer microseconds since the
// Unix epoch. Nothing in the library ever consults the wall clock.
using SimTime = std::int64_t;
using SimDuration = std::int64_t;

constexpr SimDuration kMicrosecond = 1;
constexpr SimDuration kMillisecond = 1000;
constexpr SimDuration kSecond = 1'000'000;

/// Convert fractional seconds to a duration, rounding to the nearest microsecond.
SimDuration duration_from_seconds(double seconds);

double seconds_from_duration(SimDuration d);

struct CivilTime {
  int year = 1970;
  int month = 1;  // 1..12
  int day = 1;    // 1..31
  int hour = 0;
  int minute = 0;
  int second = 0;
  int millisecond = 0;
};

CivilTime civil_from_time(SimTime t);
SimTime time_from_civil(const CivilTime& c);

/// "2010-03-01T08:00:05.000Z" (millisecond precision, always UTC).
std::string format_iso8601(SimTime t);

/// Strict parse of the format produced by format_iso8601; the fractional
/// part is optional. Throws Error on anything else.
SimTime parse_iso8601(std::string_view text);

/// "080005.000" — NMEA time-of-day field.
std::string format_hhmmss_sss(SimTime t);

/// "010310" — NMEA RMC date field (day, month, two-digit year).
std::string format_ddmmyy(SimTime t);

/// "08:00:05" — used in SMS reply texts.
std::string format_hhmmss_colon(SimTime t);

}  // namespace trackline
