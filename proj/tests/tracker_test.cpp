#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "trackline/cli.hpp"
#include "trackline/tracker.hpp"

using namespace trackline;
using namespace trackline::tracker;

namespace {

const SimTime kBase = parse_iso8601("2010-03-01T08:00:00.000Z");

nmea::GpsFix fix_at(SimTime t, double lat = 20.2961, double lon = 85.8245) {
  nmea::GpsFix f;
  f.time = t;
  f.point = {lat, lon, 45.0};
  f.quality = nmea::FixQuality::Gps;
  f.num_sats = 7;
  f.speed_knots = 10.0;
  f.course_deg = 90.0;
  return f;
}

Track sample_track(int n) {
  Track t;
  t.vehicle_id = "vh-7";
  t.started_at = kBase;
  for (int i = 0; i < n; ++i) {
    nmea::GpsFix f = fix_at(kBase + i * kSecond, 20.2961 + i * 1e-4, 85.8245 + i * 1e-4);
    record_fix(t, f, nmea::validity(f));
  }
  return t;
}

cli::Scenario base_scenario() {
  cli::Scenario sc;
  sc.name = "test";
  sc.seed = 7;
  sc.start_time = kBase;
  sc.duration = 60 * kSecond;
  sc.route = geodesy::Route{{{kBase, {20.2961, 85.8245, 45.0}},
                             {kBase + 120 * kSecond, {20.3100, 85.8350, 45.0}}}};
  sc.server.msisdn = "917700000001";
  sc.server.authorized = {"917700000002"};
  sc.server.mode = MonitorMode::ContinuousPath;
  sc.phone_msisdn = "917700000002";
  return sc;
}

}  // namespace

TEST_CASE("record_fix keeps timestamps strictly increasing") {
  Track t;
  nmea::GpsFix f = fix_at(kBase);
  CHECK(record_fix(t, f, nmea::validity(f)));
  CHECK(t.samples.size() == 1);

  CHECK_FALSE(record_fix(t, f, nmea::validity(f)));  // repeated timestamp
  CHECK(t.dropped == 1);
  CHECK(t.samples.size() == 1);

  Track big;
  for (int i = 0; i < 1000; ++i) {
    nmea::GpsFix g = fix_at(kBase + i * kSecond);
    record_fix(big, g, nmea::validity(g));
  }
  CHECK(big.samples.size() == 1000);
  CHECK(big.dropped == 0);
  for (std::size_t i = 1; i < big.samples.size(); ++i)
    CHECK(big.samples[i].fix.time > big.samples[i - 1].fix.time);
}

TEST_CASE("export/import round trip") {
  Track t = sample_track(25);
  nmea::GpsFix bad = fix_at(kBase + 100 * kSecond);
  bad.quality = nmea::FixQuality::NoFix;
  bad.point = {};
  record_fix(t, bad, nmea::validity(bad));

  std::ostringstream out;
  CHECK(export_track(t, out) == 26);

  std::istringstream in(out.str());
  Track back = import_track(in);
  CHECK(back.vehicle_id == t.vehicle_id);
  CHECK(back.started_at == t.started_at);
  REQUIRE(back.samples.size() == t.samples.size());
  CHECK_FALSE(back.samples.back().valid);

  // Serialization is idempotent: a second round trip is byte-identical.
  std::ostringstream out2;
  export_track(back, out2);
  CHECK(out2.str() == out.str());
}

TEST_CASE("export of an empty track writes headers only") {
  Track t;
  std::ostringstream out;
  CHECK(export_track(t, out) == 0);
  std::istringstream in(out.str());
  Track back = import_track(in);
  CHECK(back.samples.empty());
}

TEST_CASE("import rejects malformed input with the line number") {
  Track t = sample_track(3);
  std::ostringstream out;
  export_track(t, out);
  std::string text = out.str();

  // Truncate the last record mid-field.
  std::string truncated = text.substr(0, text.rfind(" sats="));
  std::istringstream in1(truncated + "\n");
  try {
    import_track(in1);
    FAIL("expected ImportError");
  } catch (const ImportError& e) {
    CHECK(e.line_number == 6);  // 3 header lines + 3rd record
  }

  // Unknown trailing field.
  std::string extended = text;
  extended.insert(extended.size() - 1, " extra=1");
  std::istringstream in2(extended);
  CHECK_THROWS_AS(import_track(in2), ImportError);

  std::istringstream in3("not a track\n");
  CHECK_THROWS_AS(import_track(in3), ImportError);
}

TEST_CASE("render: ascii grid marks") {
  Track one = sample_track(1);
  std::string grid = render_track(one, RenderStyle::AsciiGrid);
  std::vector<std::string> rows;
  std::istringstream ss(grid);
  std::string row;
  while (std::getline(ss, row)) rows.push_back(row);
  REQUIRE(rows.size() == 20);
  CHECK(rows[9][30] == '*');  // single point lands at the grid center

  // A straight east-west track stays confined to one row.
  Track ew;
  for (int i = 0; i < 30; ++i) {
    nmea::GpsFix f = fix_at(kBase + i * kSecond, 20.2961, 85.8245 + i * 1e-4);
    record_fix(ew, f, nmea::validity(f));
  }
  std::string grid2 = render_track(ew, RenderStyle::AsciiGrid);
  std::istringstream ss2(grid2);
  int rows_with_marks = 0;
  while (std::getline(ss2, row))
    if (row.find('*') != std::string::npos) ++rows_with_marks;
  CHECK(rows_with_marks == 1);
}

TEST_CASE("render: plot data rows match valid sample count") {
  Track t = sample_track(12);
  nmea::GpsFix bad = fix_at(kBase + 100 * kSecond);
  bad.quality = nmea::FixQuality::NoFix;
  record_fix(t, bad, nmea::validity(bad));

  std::string plot = render_track(t, RenderStyle::PlotData);
  int lines = 0;
  for (char c : plot)
    if (c == '\n') ++lines;
  CHECK(lines == 12);
}

TEST_CASE("parse_command is exact match only") {
  CHECK(parse_command("SPEED") == CommandVerb::Speed);
  CHECK(parse_command("LOC") == CommandVerb::Loc);
  CHECK_FALSE(parse_command("speed").has_value());
  CHECK_FALSE(parse_command("LOC ").has_value());
  CHECK_FALSE(parse_command("").has_value());
  CHECK_FALSE(parse_command("HELLO").has_value());
}

TEST_CASE("answer_query formats") {
  ServerConfig cfg;
  cfg.authorized = {"917700000002"};
  CommandRequest speed{"917700000002", CommandVerb::Speed, kBase + 10 * kSecond};
  CommandRequest loc{"917700000002", CommandVerb::Loc, kBase + 10 * kSecond};

  nmea::GpsFix f = fix_at(kBase + 10 * kSecond, 20.296100, 85.824500);
  f.speed_knots = 60.0;

  std::string sp = answer_query(cfg, speed, f, kBase + 10 * kSecond);
  CHECK(sp == "SPEED 111.1 KMPH AT 08:00:10Z");  // 60 knots * 1.852

  std::string lc = answer_query(cfg, loc, f, kBase + 10 * kSecond);
  CHECK(lc == "LOC 20.296100 85.824500 ALT 45.0M AT 08:00:10Z");

  // Stale or missing fixes answer NO FIX rather than staying silent.
  CHECK(answer_query(cfg, loc, f, kBase + 16 * kSecond) == "NO FIX");
  CHECK(answer_query(cfg, loc, std::nullopt, kBase + 10 * kSecond) == "NO FIX");
  nmea::GpsFix invalid = f;
  invalid.quality = nmea::FixQuality::NoFix;
  CHECK(answer_query(cfg, loc, invalid, kBase + 10 * kSecond) == "NO FIX");
}

TEST_CASE("server: continuous 60 s noiseless run records one valid sample per second") {
  cli::SimWorld world(base_scenario());
  tracker::RunSummary s = world.run();
  CHECK(s.error.empty());
  CHECK(s.fixes_recorded == 60);
  CHECK(world.server().track().samples.size() == 60);
  for (const auto& sample : world.server().track().samples) CHECK(sample.valid);
  CHECK(s.queries_served == 0);
}

TEST_CASE("server: ondemand records only fixes read to serve a query") {
  cli::Scenario sc = base_scenario();
  sc.server.mode = MonitorMode::OnDemand;
  sc.schedule = {{kBase + 20 * kSecond, CommandVerb::Loc}};
  cli::SimWorld world(sc);
  tracker::RunSummary s = world.run();
  CHECK(s.error.empty());
  CHECK(s.queries_served == 1);
  REQUIRE(world.server().track().samples.size() == 1);
  SimTime t = world.server().track().samples[0].fix.time;
  CHECK(t >= kBase + 20 * kSecond);
  CHECK(t <= kBase + 24 * kSecond);
  REQUIRE(world.phone().inbox().size() == 1);
  CHECK(world.phone().inbox()[0].msg.text.rfind("LOC ", 0) == 0);
}

TEST_CASE("server: ondemand with zero queries records nothing") {
  cli::Scenario sc = base_scenario();
  sc.server.mode = MonitorMode::OnDemand;
  cli::SimWorld world(sc);
  world.run();
  CHECK(world.server().track().samples.empty());
}

TEST_CASE("server: unauthorized and unrecognized senders get no reply") {
  cli::Scenario sc = base_scenario();
  sc.schedule = {{kBase + 10 * kSecond, CommandVerb::Speed}};
  cli::SimWorld world(sc);

  // A stranger sends a valid verb; the authorized phone sends junk.
  simnet::PhoneSim stranger(world.clock(), world.network(), "917700000099");
  stranger.schedule_send(kBase + 20 * kSecond, "917700000001", "LOC");
  world.phone().schedule_send(kBase + 30 * kSecond, "917700000001", "speed");
  world.phone().schedule_send(kBase + 40 * kSecond, "917700000001", "HELLO");

  tracker::RunSummary s = world.run();
  CHECK(s.queries_served == 1);
  CHECK(s.queries_rejected == 3);
  CHECK(stranger.inbox().empty());
  REQUIRE(world.phone().inbox().size() == 1);
  CHECK(world.phone().inbox()[0].msg.text.rfind("SPEED ", 0) == 0);
}

TEST_CASE("server: every authorized recognized query gets exactly one reply") {
  cli::Scenario sc = base_scenario();
  sc.schedule = {{kBase + 10 * kSecond, CommandVerb::Speed},
                 {kBase + 20 * kSecond, CommandVerb::Loc},
                 {kBase + 35 * kSecond, CommandVerb::Speed}};
  cli::SimWorld world(sc);
  tracker::RunSummary s = world.run();
  CHECK(s.queries_served == 3);
  CHECK(s.queries_rejected == 0);
  CHECK(world.phone().inbox().size() == 3);
}

TEST_CASE("server: a LOC reply reports a fix fresh at read completion") {
  cli::Scenario sc = base_scenario();
  sc.schedule = {{kBase + 17 * kSecond, CommandVerb::Loc}};
  cli::SimWorld world(sc);
  world.run();
  REQUIRE(world.phone().inbox().size() == 1);
  // Reply text carries the fix time; the query landed at +18 s (1 s SMS
  // latency), so the serving fix must be from +18 s or later.
  std::string text = world.phone().inbox()[0].msg.text;
  std::size_t at = text.rfind("AT ");
  REQUIRE(at != std::string::npos);
  std::string hms = text.substr(at + 3, 8);
  CHECK(hms >= "08:00:18");
  CHECK(hms <= "08:00:21");
}

TEST_CASE("server: dead modem ends the run with an error cause") {
  cli::Scenario sc = base_scenario();
  sc.modem_script = "silent";
  cli::SimWorld world(sc);
  tracker::RunSummary s = world.run();
  CHECK_FALSE(s.error.empty());
  CHECK(s.fixes_recorded == 0);
}

TEST_CASE("server: gsm channel dying mid-run still yields a summary") {
  cli::Scenario sc = base_scenario();
  sc.schedule = {{kBase + 20 * kSecond, CommandVerb::Speed}};
  cli::SimWorld world(sc);
  world.clock().schedule(kBase + 15 * kSecond, [&] { world.gsm_link().close(); });
  tracker::RunSummary s = world.run();
  CHECK(s.error == "gsm channel closed");
  CHECK(s.queries_served == 0);
}

TEST_CASE("server property: randomized scripts get exactly one reply per good query") {
  std::mt19937_64 rng(2024);
  for (int round = 0; round < 6; ++round) {
    cli::Scenario sc = base_scenario();
    sc.seed = 100 + round;
    int legit = static_cast<int>(rng() % 6);
    for (int i = 0; i < legit; ++i)
      sc.schedule.push_back({kBase + static_cast<SimTime>(5 + rng() % 45) * kSecond,
                             rng() % 2 ? CommandVerb::Speed : CommandVerb::Loc});
    cli::SimWorld world(sc);

    const char* junk_texts[] = {"speed", "SPEEDY", "loc please", "HELLO"};
    int junk = static_cast<int>(rng() % 4);
    for (int i = 0; i < junk; ++i)
      world.phone().schedule_send(kBase + static_cast<SimTime>(5 + rng() % 45) * kSecond,
                                  sc.server.msisdn, junk_texts[rng() % 4]);

    simnet::PhoneSim stranger(world.clock(), world.network(), "917700000099");
    int stranger_sends = static_cast<int>(rng() % 3);
    for (int i = 0; i < stranger_sends; ++i)
      stranger.schedule_send(kBase + static_cast<SimTime>(5 + rng() % 45) * kSecond,
                             sc.server.msisdn, rng() % 2 ? "SPEED" : "LOC");

    tracker::RunSummary s = world.run();
    CHECK(s.error.empty());
    CHECK(s.queries_served == legit);
    CHECK(s.queries_rejected == junk + stranger_sends);
    CHECK(static_cast<int>(world.phone().inbox().size()) == legit);
    CHECK(stranger.inbox().empty());
  }
}

TEST_CASE("server: gps channel closing ends the run with an error cause") {
  cli::Scenario sc = base_scenario();
  cli::SimWorld world(sc);
  world.clock().schedule(kBase + 10 * kSecond, [&] { world.gps_link().close(); });
  tracker::RunSummary s = world.run();
  CHECK(s.error == "gps channel closed");
  CHECK(s.fixes_recorded < 60);
}

TEST_CASE("track_error rejects a track with no valid samples") {
  cli::Scenario sc = base_scenario();
  Track empty;
  CHECK_THROWS_AS(track_error(empty, sc.route), Error);
}
