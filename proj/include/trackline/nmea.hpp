#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "trackline/geodesy.hpp"
#include "trackline/time.hpp"

namespace trackline::nmea {

enum class FixQuality { NoFix, Gps, Dgps };

/// One merged GPS sample. When quality is NoFix the position, speed and
/// course fields carry no information and are left zeroed.
struct GpsFix {
  SimTime time = 0;  // UTC, millisecond resolution
  geodesy::GeoPoint point;
  FixQuality quality = FixQuality::NoFix;
  int num_sats = 0;  // <= 24
  double speed_knots = 0.0;
  double course_deg = 0.0;  // [0, 360)
};

struct FixValidity {
  bool valid = false;
  std::string reason;  // empty when valid, machine-readable otherwise
};

/// A framed, checksum-verified sentence (payload between '$' and '*').
struct NmeaSentence {
  std::string talker;               // e.g. "GP"
  std::string kind;                 // e.g. "GGA"
  std::vector<std::string> fields;  // everything after the address, split on ','
  std::uint8_t checksum = 0;
};

class NmeaError : public Error {
 public:
  enum class Kind { Framing, Checksum, Field, Pairing, Range };

  NmeaError(Kind kind, const std::string& msg, int expected = -1, int actual = -1)
      : Error(msg), kind(kind), expected_checksum(expected), actual_checksum(actual) {}

  Kind kind;
  int expected_checksum;  // set for Kind::Checksum
  int actual_checksum;
};

/// XOR fold of the payload bytes.
std::uint8_t checksum(std::string_view payload);

/// "$GPGGA,...*CS\r\n". Position fields are empty and quality is 0 for NoFix.
std::string encode_gga(const GpsFix& fix);

/// "$GPRMC,...*CS\r\n" with status, speed in knots, course and date.
std::string encode_rmc(const GpsFix& fix);

/// Parse one line into a frame, verifying the checksum. Total over arbitrary
/// bytes: every malformed input raises NmeaError, nothing ever aborts.
NmeaSentence parse(std::string_view line);

/// NMEA (d)ddmm.mmmm + hemisphere to signed decimal degrees.
double parse_coordinate(std::string_view field, std::string_view hemi);

/// Merge a GGA and an RMC sentence carrying the same time-of-day field into
/// one fix (position/quality/satellites from GGA, speed/course/date from RMC).
GpsFix extract_fix(const NmeaSentence& gga, const NmeaSentence& rmc);

/// Valid iff quality is not NoFix and at least 4 satellites were used.
FixValidity validity(const GpsFix& fix);

/// Incremental byte-stream reader that pairs GGA+RMC lines into fixes.
/// Lines that fail to parse, unknown sentence kinds, and unpaired sentences
/// are counted and skipped.
class FixAssembler {
 public:
  void feed(std::string_view bytes);
  std::optional<GpsFix> next_fix();
  long discarded() const { return discarded_; }

 private:
  std::string buf_;
  std::optional<NmeaSentence> pending_gga_;
  std::deque<GpsFix> ready_;
  long discarded_ = 0;
};

}  // namespace trackline::nmea
