#include "trackline/nmea.hpp"

#include <cmath>
#include <cstdio>

namespace trackline::nmea {

namespace {

using geodesy::GeoPoint;

// Degrees -> "(d)ddmm.mmmm" with the minutes rounded to 1e-4 arcminute and
// carried into the degrees on a round to 60.
std::string format_coordinate(double abs_deg, int deg_digits) {
  int deg = static_cast<int>(abs_deg);
  double minutes = (abs_deg - deg) * 60.0;
  minutes = std::round(minutes * 1e4) / 1e4;
  if (minutes >= 60.0) {
    minutes = 0.0;
    deg += 1;
  }
  char buf[24];
  std::snprintf(buf, sizeof buf, "%0*d%07.4f", deg_digits, deg, minutes);
  return buf;
}

std::string join_sentence(const std::string& address,
                          const std::vector<std::string>& fields) {
  std::string payload = address;
  for (const auto& f : fields) {
    payload += ',';
    payload += f;
  }
  char tail[8];
  std::snprintf(tail, sizeof tail, "*%02X\r\n", checksum(payload));
  return "$" + payload + tail;
}

bool is_hex(char c) {
  return (c >= '0' && c <= '9') || (c >= 'A' && c <= 'F') || (c >= 'a' && c <= 'f');
}

int hex_val(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return c - 'a' + 10;
}

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (c < '0' || c > '9') return false;
  return true;
}

double parse_double_field(std::string_view s, const char* what) {
  std::string tmp(s);
  char* end = nullptr;
  double v = std::strtod(tmp.c_str(), &end);
  if (end != tmp.c_str() + tmp.size() || tmp.empty() || !std::isfinite(v))
    throw NmeaError(NmeaError::Kind::Field,
                    std::string("bad ") + what + " field: '" + tmp + "'");
  return v;
}

int parse_int_field(std::string_view s, const char* what) {
  if (!all_digits(s))
    throw NmeaError(NmeaError::Kind::Field,
                    std::string("bad ") + what + " field: '" + std::string(s) + "'");
  int v = 0;
  for (char c : s) {
    v = v * 10 + (c - '0');
    if (v > 1'000'000)
      throw NmeaError(NmeaError::Kind::Field, std::string(what) + " field out of range");
  }
  return v;
}

// "hhmmss.sss" + "ddmmyy" -> UTC microseconds.
SimTime time_from_fields(std::string_view tod, std::string_view date) {
  if (tod.size() < 6 || !all_digits(tod.substr(0, 6)))
    throw NmeaError(NmeaError::Kind::Field, "bad time field: '" + std::string(tod) + "'");
  int ms = 0;
  if (tod.size() > 6) {
    if (tod[6] != '.' || tod.size() > 10 || !all_digits(tod.substr(7)))
      throw NmeaError(NmeaError::Kind::Field,
                      "bad time field: '" + std::string(tod) + "'");
    std::string frac(tod.substr(7));
    while (frac.size() < 3) frac += '0';
    ms = (frac[0] - '0') * 100 + (frac[1] - '0') * 10 + (frac[2] - '0');
  }
  if (date.size() != 6 || !all_digits(date))
    throw NmeaError(NmeaError::Kind::Field, "bad date field: '" + std::string(date) + "'");
  CivilTime c;
  c.hour = (tod[0] - '0') * 10 + (tod[1] - '0');
  c.minute = (tod[2] - '0') * 10 + (tod[3] - '0');
  c.second = (tod[4] - '0') * 10 + (tod[5] - '0');
  c.millisecond = ms;
  c.day = (date[0] - '0') * 10 + (date[1] - '0');
  c.month = (date[2] - '0') * 10 + (date[3] - '0');
  c.year = 2000 + (date[4] - '0') * 10 + (date[5] - '0');
  if (c.hour > 23 || c.minute > 59 || c.second > 59 || c.month < 1 || c.month > 12 ||
      c.day < 1 || c.day > 31)
    throw NmeaError(NmeaError::Kind::Range, "time/date fields out of range");
  return time_from_civil(c);
}

const std::string& field_at(const NmeaSentence& s, std::size_t i, const char* what) {
  if (i >= s.fields.size())
    throw NmeaError(NmeaError::Kind::Field,
                    std::string("sentence too short, missing ") + what);
  return s.fields[i];
}

}  // namespace

std::uint8_t checksum(std::string_view payload) {
  std::uint8_t cs = 0;
  for (char c : payload) cs ^= static_cast<std::uint8_t>(c);
  return cs;
}

std::string encode_gga(const GpsFix& fix) {
  char small[24];
  std::vector<std::string> f(14);
  f[0] = format_hhmmss_sss(fix.time);
  bool have_pos = fix.quality != FixQuality::NoFix;
  if (have_pos) {
    f[1] = format_coordinate(std::abs(fix.point.lat_deg), 2);
    f[2] = fix.point.lat_deg < 0 ? "S" : "N";
    f[3] = format_coordinate(std::abs(fix.point.lon_deg), 3);
    f[4] = fix.point.lon_deg < 0 ? "W" : "E";
  }
  f[5] = fix.quality == FixQuality::Dgps ? "2" : (fix.quality == FixQuality::Gps ? "1" : "0");
  std::snprintf(small, sizeof small, "%02d", fix.num_sats);
  f[6] = small;
  if (have_pos) {
    f[7] = "1.0";  // HDOP, not modeled
    std::snprintf(small, sizeof small, "%.1f", fix.point.alt_m);
    f[8] = small;
    f[10] = "0.0";  // geoid separation, not modeled
  }
  f[9] = "M";
  f[11] = "M";
  // f[12], f[13]: DGPS age and station id, always empty
  return join_sentence("GPGGA", f);
}

std::string encode_rmc(const GpsFix& fix) {
  char small[24];
  std::vector<std::string> f(12);
  bool have_pos = fix.quality != FixQuality::NoFix;
  f[0] = format_hhmmss_sss(fix.time);
  f[1] = have_pos ? "A" : "V";
  if (have_pos) {
    f[2] = format_coordinate(std::abs(fix.point.lat_deg), 2);
    f[3] = fix.point.lat_deg < 0 ? "S" : "N";
    f[4] = format_coordinate(std::abs(fix.point.lon_deg), 3);
    f[5] = fix.point.lon_deg < 0 ? "W" : "E";
    std::snprintf(small, sizeof small, "%05.1f", fix.speed_knots);
    f[6] = small;
    std::snprintf(small, sizeof small, "%05.1f", fix.course_deg);
    f[7] = small;
  }
  f[8] = format_ddmmyy(fix.time);
  // f[9], f[10]: magnetic variation, not modeled
  f[11] = have_pos ? "A" : "N";
  return join_sentence("GPRMC", f);
}

NmeaSentence parse(std::string_view line) {
  // Strip at most one trailing line terminator.
  if (line.size() >= 2 && line.substr(line.size() - 2) == "\r\n")
    line.remove_suffix(2);
  else if (!line.empty() && (line.back() == '\n' || line.back() == '\r'))
    line.remove_suffix(1);

  if (line.empty() || line[0] != '$')
    throw NmeaError(NmeaError::Kind::Framing, "missing '$' start delimiter");
  for (char c : line) {
    auto b = static_cast<unsigned char>(c);
    if (b < 0x20 || b > 0x7E)
      throw NmeaError(NmeaError::Kind::Framing, "non-ASCII or control byte in sentence");
  }
  std::size_t star = line.rfind('*');
  if (star == std::string_view::npos)
    throw NmeaError(NmeaError::Kind::Framing, "missing '*' checksum delimiter");
  if (line.size() != star + 3 || !is_hex(line[star + 1]) || !is_hex(line[star + 2]))
    throw NmeaError(NmeaError::Kind::Framing, "malformed checksum suffix");

  std::string_view payload = line.substr(1, star - 1);
  int stated = hex_val(line[star + 1]) * 16 + hex_val(line[star + 2]);
  int actual = checksum(payload);
  if (stated != actual)
    throw NmeaError(NmeaError::Kind::Checksum, "checksum mismatch", stated, actual);
  if (payload.find('$') != std::string_view::npos ||
      payload.find('*') != std::string_view::npos)
    throw NmeaError(NmeaError::Kind::Framing, "delimiter byte inside payload");

  std::size_t comma = payload.find(',');
  std::string_view address = payload.substr(0, comma);
  if (address.size() != 5)
    throw NmeaError(NmeaError::Kind::Framing, "address field must be 5 characters");
  for (char c : address)
    if (!((c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9')))
      throw NmeaError(NmeaError::Kind::Framing, "non-alphanumeric address field");

  NmeaSentence s;
  s.talker = std::string(address.substr(0, 2));
  s.kind = std::string(address.substr(2, 3));
  s.checksum = static_cast<std::uint8_t>(actual);
  if (comma != std::string_view::npos) {
    std::string_view rest = payload.substr(comma + 1);
    while (true) {
      std::size_t next = rest.find(',');
      s.fields.emplace_back(rest.substr(0, next));
      if (next == std::string_view::npos) break;
      rest.remove_prefix(next + 1);
    }
  }
  return s;
}

double parse_coordinate(std::string_view field, std::string_view hemi) {
  if (hemi.size() != 1 || (hemi[0] != 'N' && hemi[0] != 'S' && hemi[0] != 'E' && hemi[0] != 'W'))
    throw NmeaError(NmeaError::Kind::Field,
                    "bad hemisphere: '" + std::string(hemi) + "'");
  std::size_t dot = field.find('.');
  std::string_view intpart = dot == std::string_view::npos ? field : field.substr(0, dot);
  std::string_view frac = dot == std::string_view::npos ? "" : field.substr(dot + 1);
  if (intpart.size() < 3 || !all_digits(intpart) || (dot != std::string_view::npos && !all_digits(frac)))
    throw NmeaError(NmeaError::Kind::Field,
                    "bad coordinate field: '" + std::string(field) + "'");

  std::string_view deg_part = intpart.substr(0, intpart.size() - 2);
  double degrees = parse_double_field(deg_part, "coordinate degrees");
  std::string minutes_text = std::string(intpart.substr(intpart.size() - 2));
  if (dot != std::string_view::npos) {
    minutes_text += '.';
    minutes_text += frac;
  }
  double minutes = parse_double_field(minutes_text, "coordinate minutes");
  if (minutes >= 60.0)
    throw NmeaError(NmeaError::Kind::Range,
                    "coordinate minutes >= 60: '" + std::string(field) + "'");

  double value = degrees + minutes / 60.0;
  bool is_lat = hemi[0] == 'N' || hemi[0] == 'S';
  if (value > (is_lat ? 90.0 : 180.0))
    throw NmeaError(NmeaError::Kind::Range,
                    "coordinate out of range: '" + std::string(field) + "'");
  if (hemi[0] == 'S' || hemi[0] == 'W') value = -value;
  return value;
}

GpsFix extract_fix(const NmeaSentence& gga, const NmeaSentence& rmc) {
  if (gga.kind != "GGA" || rmc.kind != "RMC")
    throw NmeaError(NmeaError::Kind::Field,
                    "extract_fix needs a GGA and an RMC sentence, got " + gga.kind +
                        " and " + rmc.kind);
  const std::string& gga_tod = field_at(gga, 0, "GGA time");
  const std::string& rmc_tod = field_at(rmc, 0, "RMC time");
  if (gga_tod != rmc_tod)
    throw NmeaError(NmeaError::Kind::Pairing,
                    "GGA/RMC time mismatch: '" + gga_tod + "' vs '" + rmc_tod + "'");

  GpsFix fix;
  fix.time = time_from_fields(gga_tod, field_at(rmc, 8, "RMC date"));

  const std::string& q = field_at(gga, 5, "GGA quality");
  if (q == "0" || q.empty())
    fix.quality = FixQuality::NoFix;
  else if (q == "1")
    fix.quality = FixQuality::Gps;
  else if (q == "2")
    fix.quality = FixQuality::Dgps;
  else
    throw NmeaError(NmeaError::Kind::Field, "unsupported GGA quality: '" + q + "'");

  fix.num_sats = parse_int_field(field_at(gga, 6, "GGA satellite count"), "satellite count");
  if (fix.num_sats > 24)
    throw NmeaError(NmeaError::Kind::Range,
                    "satellite count above constellation size: " +
                        std::to_string(fix.num_sats));

  if (fix.quality != FixQuality::NoFix) {
    fix.point.lat_deg =
        parse_coordinate(field_at(gga, 1, "GGA latitude"), field_at(gga, 2, "GGA N/S"));
    fix.point.lon_deg =
        parse_coordinate(field_at(gga, 3, "GGA longitude"), field_at(gga, 4, "GGA E/W"));
    if (fix.point.lon_deg == -180.0) fix.point.lon_deg = 180.0;  // keep (-180, 180]
    const std::string& alt = field_at(gga, 8, "GGA altitude");
    fix.point.alt_m = alt.empty() ? 0.0 : parse_double_field(alt, "altitude");
    const std::string& spd = field_at(rmc, 6, "RMC speed");
    fix.speed_knots = spd.empty() ? 0.0 : parse_double_field(spd, "speed");
    if (fix.speed_knots < 0.0)
      throw NmeaError(NmeaError::Kind::Range, "negative speed");
    const std::string& crs = field_at(rmc, 7, "RMC course");
    fix.course_deg = crs.empty() ? 0.0 : parse_double_field(crs, "course");
    if (fix.course_deg >= 360.0) fix.course_deg -= 360.0;
    if (fix.course_deg < 0.0)
      throw NmeaError(NmeaError::Kind::Range, "negative course");
  }
  return fix;
}

FixValidity validity(const GpsFix& fix) {
  if (fix.quality == FixQuality::NoFix) return {false, "no fix"};
  if (fix.num_sats < 4) return {false, "insufficient satellites"};
  return {true, ""};
}

void FixAssembler::feed(std::string_view bytes) {
  buf_.append(bytes);
  std::size_t start = 0;
  while (true) {
    std::size_t nl = buf_.find('\n', start);
    if (nl == std::string::npos) break;
    std::string line = buf_.substr(start, nl - start + 1);
    start = nl + 1;
    if (line.find_first_not_of("\r\n") == std::string::npos) continue;
    try {
      NmeaSentence s = parse(line);
      if (s.kind == "GGA") {
        if (pending_gga_) ++discarded_;  // unpaired previous GGA
        pending_gga_ = std::move(s);
      } else if (s.kind == "RMC" && pending_gga_) {
        ready_.push_back(extract_fix(*pending_gga_, s));
        pending_gga_.reset();
      } else {
        ++discarded_;
      }
    } catch (const NmeaError&) {
      ++discarded_;
      pending_gga_.reset();
    }
  }
  buf_.erase(0, start);
}

std::optional<GpsFix> FixAssembler::next_fix() {
  if (ready_.empty()) return std::nullopt;
  GpsFix f = ready_.front();
  ready_.pop_front();
  return f;
}

}  // namespace trackline::nmea
