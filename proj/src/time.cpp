#include "trackline/time.hpp"

#include <cmath>
#include <cstdio>

#include "trackline/error.hpp"

namespace trackline {

namespace {

// Civil <-> day-count conversions for a proleptic Gregorian calendar
// (Howard Hinnant's chrono-compatible algorithms).
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                       static_cast<unsigned>(d) - 1u;
  const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460u + doe / 36524u - doe / 146096u) / 365u;
  const std::int64_t yr = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365u * yoe + yoe / 4u - yoe / 100u);
  const unsigned mp = (5u * doy + 2u) / 153u;
  d = static_cast<int>(doy - (153u * mp + 2u) / 5u + 1u);
  m = static_cast<int>(mp < 10 ? mp + 3 : mp - 9);
  y = static_cast<int>(yr + (m <= 2));
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b) != 0 && ((a < 0) != (b < 0))) --q;
  return q;
}

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (c < '0' || c > '9') return false;
  return true;
}

int to_int(std::string_view s) {
  int v = 0;
  for (char c : s) v = v * 10 + (c - '0');
  return v;
}

}  // namespace

SimDuration duration_from_seconds(double seconds) {
  return static_cast<SimDuration>(std::llround(seconds * 1e6));
}

double seconds_from_duration(SimDuration d) { return static_cast<double>(d) / 1e6; }

CivilTime civil_from_time(SimTime t) {
  const std::int64_t us_per_day = 86'400 * kSecond;
  std::int64_t days = floor_div(t, us_per_day);
  std::int64_t us_of_day = t - days * us_per_day;
  CivilTime c;
  civil_from_days(days, c.year, c.month, c.day);
  c.hour = static_cast<int>(us_of_day / (3'600 * kSecond));
  us_of_day %= 3'600 * kSecond;
  c.minute = static_cast<int>(us_of_day / (60 * kSecond));
  us_of_day %= 60 * kSecond;
  c.second = static_cast<int>(us_of_day / kSecond);
  c.millisecond = static_cast<int>((us_of_day % kSecond) / kMillisecond);
  return c;
}

SimTime time_from_civil(const CivilTime& c) {
  std::int64_t days = days_from_civil(c.year, c.month, c.day);
  return ((days * 24 + c.hour) * 60 + c.minute) * 60 * kSecond + c.second * kSecond +
         static_cast<SimTime>(c.millisecond) * kMillisecond;
}

std::string format_iso8601(SimTime t) {
  CivilTime c = civil_from_time(t);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", c.year, c.month,
                c.day, c.hour, c.minute, c.second, c.millisecond);
  return buf;
}

SimTime parse_iso8601(std::string_view s) {
  // YYYY-MM-DDThh:mm:ss[.mmm]Z
  auto fail = [&] { throw Error("bad ISO-8601 timestamp: '" + std::string(s) + "'"); };
  if (s.size() < 20) fail();
  if (s[4] != '-' || s[7] != '-' || s[10] != 'T' || s[13] != ':' || s[16] != ':') fail();
  CivilTime c;
  if (!all_digits(s.substr(0, 4)) || !all_digits(s.substr(5, 2)) ||
      !all_digits(s.substr(8, 2)) || !all_digits(s.substr(11, 2)) ||
      !all_digits(s.substr(14, 2)) || !all_digits(s.substr(17, 2)))
    fail();
  c.year = to_int(s.substr(0, 4));
  c.month = to_int(s.substr(5, 2));
  c.day = to_int(s.substr(8, 2));
  c.hour = to_int(s.substr(11, 2));
  c.minute = to_int(s.substr(14, 2));
  c.second = to_int(s.substr(17, 2));
  std::size_t pos = 19;
  if (s[pos] == '.') {
    if (s.size() < pos + 5 || !all_digits(s.substr(pos + 1, 3))) fail();
    c.millisecond = to_int(s.substr(pos + 1, 3));
    pos += 4;
  }
  if (pos + 1 != s.size() || s[pos] != 'Z') fail();
  if (c.month < 1 || c.month > 12 || c.day < 1 || c.day > 31 || c.hour > 23 ||
      c.minute > 59 || c.second > 59)
    fail();
  return time_from_civil(c);
}

std::string format_hhmmss_sss(SimTime t) {
  CivilTime c = civil_from_time(t);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d%02d%02d.%03d", c.hour, c.minute, c.second,
                c.millisecond);
  return buf;
}

std::string format_ddmmyy(SimTime t) {
  CivilTime c = civil_from_time(t);
  char buf[8];
  std::snprintf(buf, sizeof buf, "%02d%02d%02d", c.day, c.month, c.year % 100);
  return buf;
}

std::string format_hhmmss_colon(SimTime t) {
  CivilTime c = civil_from_time(t);
  char buf[12];
  std::snprintf(buf, sizeof buf, "%02d:%02d:%02d", c.hour, c.minute, c.second);
  return buf;
}

}  // namespace trackline
