#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "trackline/nmea.hpp"

using namespace trackline;
using namespace trackline::nmea;

namespace {

GpsFix random_fix(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> lat(-89.9, 89.9), lon(-179.9, 179.9),
      alt(-200.0, 8000.0), knots(0.0, 200.0), course(0.0, 359.99), u(0.0, 1.0);
  std::uniform_int_distribution<int> sats(4, 24), ms(0, 999),
      day_s(0, 86'399);
  GpsFix f;
  CivilTime c;
  c.year = 2010 + static_cast<int>(u(rng) * 30);
  c.month = 1 + static_cast<int>(u(rng) * 12);
  c.day = 1 + static_cast<int>(u(rng) * 28);
  f.time = time_from_civil(c) + day_s(rng) * kSecond + ms(rng) * kMillisecond;
  f.point = {lat(rng), lon(rng), alt(rng)};
  f.quality = u(rng) < 0.15 ? FixQuality::Dgps : FixQuality::Gps;
  f.num_sats = sats(rng);
  f.speed_knots = knots(rng);
  f.course_deg = course(rng);
  return f;
}

}  // namespace

TEST_CASE("checksum is an XOR fold") {
  CHECK(checksum("") == 0x00);
  CHECK(checksum("GPGGA") == 0x56);  // 'G'^'P'^'G'^'G'^'A'

  // XOR self-inverse: any payload XORed against itself cancels out.
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> ch(0x20, 0x7E);
  for (int i = 0; i < 50; ++i) {
    std::string p;
    for (int k = 0; k < 17; ++k) p += static_cast<char>(ch(rng));
    CHECK((checksum(p) ^ checksum(p)) == 0x00);
    CHECK(checksum(p + p) == 0x00);
  }
}

TEST_CASE("GGA encoding of a known fix") {
  GpsFix f;
  f.time = parse_iso8601("2011-06-05T12:35:19.000Z");
  f.point = {48.1173, 11.516667, 545.4};
  f.quality = FixQuality::Gps;
  f.num_sats = 8;
  std::string line = encode_gga(f);
  CHECK(line.find("4807.0380,N") != std::string::npos);
  CHECK(line.find("01131.0000,E") != std::string::npos);
  CHECK(line.find("123519.000") != std::string::npos);
  CHECK(line.rfind("$GPGGA,", 0) == 0);
  CHECK(line.size() <= 82);
  CHECK(line.substr(line.size() - 2) == "\r\n");

  NmeaSentence s = parse(line);
  CHECK(s.kind == "GGA");
  CHECK(s.talker == "GP");
  CHECK(s.fields.size() == 14);
}

TEST_CASE("no-fix GGA encodes empty position and quality 0") {
  GpsFix f;
  f.time = parse_iso8601("2011-06-05T12:35:19.000Z");
  f.quality = FixQuality::NoFix;
  f.num_sats = 0;
  std::string line = encode_gga(f);
  NmeaSentence s = parse(line);
  CHECK(s.fields[1].empty());
  CHECK(s.fields[3].empty());
  CHECK(s.fields[5] == "0");

  // Pairs back into a NoFix sample.
  GpsFix back = extract_fix(s, parse(encode_rmc(f)));
  CHECK(back.quality == FixQuality::NoFix);
  CHECK(back.time == f.time);
}

TEST_CASE("encoded checksums verify under the checksum op") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 200; ++i) {
    GpsFix f = random_fix(rng);
    for (std::string line : {encode_gga(f), encode_rmc(f)}) {
      std::size_t star = line.rfind('*');
      std::string payload = line.substr(1, star - 1);
      char hex[4];
      std::snprintf(hex, sizeof hex, "%02X", checksum(payload));
      CHECK(line.substr(star + 1, 2) == hex);
    }
  }
}

TEST_CASE("parse rejects framing, checksum, and charset faults") {
  CHECK_THROWS_AS(parse("garbage"), NmeaError);
  CHECK_THROWS_AS(parse(""), NmeaError);
  CHECK_THROWS_AS(parse("$GPGGA,no,star"), NmeaError);
  CHECK_THROWS_AS(parse("$GPGGA,x*ZZ"), NmeaError);
  CHECK_THROWS_AS(parse("$GPG\x80GA,x*33"), NmeaError);

  GpsFix f;
  f.time = 0;
  f.quality = FixQuality::Gps;
  f.num_sats = 5;
  f.point = {10, 20, 30};
  std::string line = encode_gga(f);

  // Perturb the final checksum hex digit.
  std::string bad = line;
  std::size_t cs_pos = bad.rfind('*') + 2;
  bad[cs_pos] = bad[cs_pos] == '0' ? '1' : '0';
  try {
    parse(bad);
    FAIL("expected checksum failure");
  } catch (const NmeaError& e) {
    CHECK(e.kind == NmeaError::Kind::Checksum);
    CHECK(e.expected_checksum >= 0);
    CHECK(e.actual_checksum >= 0);
    CHECK(e.expected_checksum != e.actual_checksum);
  }
}

TEST_CASE("any single-character payload mutation is rejected") {
  GpsFix f;
  f.time = parse_iso8601("2012-03-01T08:00:05.000Z");
  f.point = {20.2961, 85.8245, 45.0};
  f.quality = FixQuality::Gps;
  f.num_sats = 7;
  f.speed_knots = 12.3;
  f.course_deg = 78.0;
  std::string line = encode_gga(f);
  std::size_t star = line.rfind('*');

  long mutations = 0;
  for (std::size_t i = 1; i < star; ++i) {
    for (int c = 0x20; c <= 0x7E; ++c) {
      if (static_cast<char>(c) == line[i]) continue;
      std::string mutated = line;
      mutated[i] = static_cast<char>(c);
      CHECK_THROWS_AS(parse(mutated), NmeaError);
      ++mutations;
    }
  }
  CHECK(mutations > 1000);
}

TEST_CASE("parse coordinate") {
  CHECK(parse_coordinate("0000.0000", "N") == 0.0);
  CHECK(parse_coordinate("4807.0380", "N") == doctest::Approx(48.1173).epsilon(1e-9));
  CHECK(parse_coordinate("4807.0380", "S") == doctest::Approx(-48.1173).epsilon(1e-9));
  CHECK(parse_coordinate("01131.0000", "E") == doctest::Approx(11.516667).epsilon(1e-6));

  // Exact sign symmetry.
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> deg(0, 89), mins(0, 59), frac(0, 9999);
  for (int i = 0; i < 100; ++i) {
    char field[16];
    std::snprintf(field, sizeof field, "%02d%02d.%04d", deg(rng), mins(rng), frac(rng));
    CHECK(parse_coordinate(field, "N") == -parse_coordinate(field, "S"));
  }

  CHECK_THROWS_AS(parse_coordinate("4861.0000", "N"), NmeaError);  // minutes >= 60
  CHECK_THROWS_AS(parse_coordinate("48ab.0000", "N"), NmeaError);
  CHECK_THROWS_AS(parse_coordinate("4807.0380", "Q"), NmeaError);
  CHECK_THROWS_AS(parse_coordinate("9130.0000", "N"), NmeaError);  // > 90 deg lat
}

TEST_CASE("extract_fix pairing rules") {
  GpsFix f;
  f.time = parse_iso8601("2012-03-01T08:00:05.000Z");
  f.point = {20.2961, 85.8245, 45.0};
  f.quality = FixQuality::Gps;
  f.num_sats = 7;
  NmeaSentence gga = parse(encode_gga(f));
  NmeaSentence rmc = parse(encode_rmc(f));

  CHECK_THROWS_AS(extract_fix(rmc, gga), NmeaError);  // wrong kinds

  GpsFix other = f;
  other.time += kSecond;
  NmeaSentence rmc_late = parse(encode_rmc(other));
  try {
    extract_fix(gga, rmc_late);
    FAIL("expected pairing error");
  } catch (const NmeaError& e) {
    CHECK(e.kind == NmeaError::Kind::Pairing);
  }

  // 3 satellites extract fine but the fix is invalid.
  GpsFix sparse = f;
  sparse.num_sats = 3;
  GpsFix got = extract_fix(parse(encode_gga(sparse)), parse(encode_rmc(sparse)));
  CHECK(got.num_sats == 3);
  FixValidity v = validity(got);
  CHECK_FALSE(v.valid);
  CHECK(v.reason == "insufficient satellites");
}

TEST_CASE("validity rules") {
  GpsFix f;
  f.quality = FixQuality::Gps;
  f.num_sats = 7;
  CHECK(validity(f).valid);

  f.quality = FixQuality::NoFix;
  CHECK_FALSE(validity(f).valid);
  CHECK(validity(f).reason == "no fix");

  f.quality = FixQuality::Gps;
  f.num_sats = 3;
  CHECK_FALSE(validity(f).valid);
  CHECK(validity(f).reason == "insufficient satellites");
}

TEST_CASE("round trip: 1000 random fixes within quantization") {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 1000; ++i) {
    GpsFix f = random_fix(rng);
    CHECK(encode_gga(f).size() <= 82);
    CHECK(encode_rmc(f).size() <= 82);
    GpsFix back = extract_fix(parse(encode_gga(f)), parse(encode_rmc(f)));
    CHECK(back.time == f.time);
    CHECK(std::abs(back.point.lat_deg - f.point.lat_deg) <= 1e-4 / 60.0);
    CHECK(std::abs(back.point.lon_deg - f.point.lon_deg) <= 1e-4 / 60.0);
    CHECK(std::abs(back.point.alt_m - f.point.alt_m) <= 0.05 + 1e-9);
    CHECK(back.quality == f.quality);
    CHECK(back.num_sats == f.num_sats);
    CHECK(std::abs(back.speed_knots - f.speed_knots) <= 0.05 + 1e-9);
    CHECK(std::abs(back.course_deg - f.course_deg) <= 0.05 + 1e-9);
  }
}

TEST_CASE("parse survives arbitrary byte fuzz") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> len(0, 120), byte(0, 255), mode(0, 3);
  GpsFix f;
  f.quality = FixQuality::Gps;
  f.num_sats = 9;
  f.point = {1, 2, 3};
  std::string valid = encode_gga(f);

  long parsed = 0, rejected = 0;
  for (int i = 0; i < 100'000; ++i) {
    std::string line;
    int m = mode(rng);
    if (m == 0) {
      int n = len(rng);
      for (int k = 0; k < n; ++k) line += static_cast<char>(byte(rng));
    } else if (m == 1) {
      line = "$";
      int n = len(rng);
      for (int k = 0; k < n; ++k) line += static_cast<char>(byte(rng));
    } else {
      // valid sentence with a random slice corrupted
      line = valid;
      std::size_t at = static_cast<std::size_t>(len(rng)) % line.size();
      line[at] = static_cast<char>(byte(rng));
    }
    try {
      parse(line);
      ++parsed;
    } catch (const NmeaError&) {
      ++rejected;
    }
  }
  CHECK(parsed + rejected == 100'000);
}

TEST_CASE("fix assembler pairs streams and skips junk") {
  GpsFix f1, f2;
  f1.time = parse_iso8601("2012-03-01T08:00:05.000Z");
  f1.quality = FixQuality::Gps;
  f1.num_sats = 6;
  f1.point = {20.0, 85.0, 10.0};
  f2 = f1;
  f2.time += kSecond;

  FixAssembler fa;
  std::string stream = encode_gga(f1) + encode_rmc(f1) + "noise\r\n" + encode_gga(f2) +
                       encode_rmc(f2);
  // Feed in awkward chunks.
  for (std::size_t i = 0; i < stream.size(); i += 7)
    fa.feed(stream.substr(i, 7));

  auto a = fa.next_fix();
  auto b = fa.next_fix();
  REQUIRE(a.has_value());
  REQUIRE(b.has_value());
  CHECK(a->time == f1.time);
  CHECK(b->time == f2.time);
  CHECK_FALSE(fa.next_fix().has_value());
  CHECK(fa.discarded() == 1);
}
