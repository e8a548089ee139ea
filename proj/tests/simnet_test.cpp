#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "trackline/simnet.hpp"

using namespace trackline;
using namespace trackline::simnet;

namespace {

// NMEA dates carry a two-digit year pinned to 2000-2099, so fixtures live in
// a realistic era rather than at the epoch.
const SimTime kBase = parse_iso8601("2010-03-01T08:00:00.000Z");

Route demo_route(SimTime t0, SimTime t1) {
  return Route{{{t0, {20.2961, 85.8245, 45.0}}, {t1, {20.3200, 85.8400, 52.0}}}};
}

}  // namespace

TEST_CASE("clock fires nothing when idle") {
  VirtualClock clock;
  CHECK(clock.advance_until(10 * kSecond) == 0);
  CHECK(clock.now() == 10 * kSecond);
  CHECK_FALSE(clock.next_event_time().has_value());
}

TEST_CASE("clock fires equal-time events in scheduling order") {
  VirtualClock clock;
  std::vector<int> order;
  clock.schedule(2 * kSecond, [&] { order.push_back(3); });
  clock.schedule(1 * kSecond, [&] { order.push_back(1); });
  clock.schedule(1 * kSecond, [&] { order.push_back(2); });
  CHECK(clock.advance_until(2 * kSecond) == 3);
  CHECK(order == std::vector<int>{1, 2, 3});
  CHECK_THROWS_AS(clock.advance_until(1 * kSecond), PreconditionError);
}

TEST_CASE("clock clamps past scheduling to now") {
  VirtualClock clock;
  clock.advance_until(5 * kSecond);
  bool fired = false;
  clock.schedule(1 * kSecond, [&] { fired = true; });
  clock.advance_until(5 * kSecond + 1);
  CHECK(fired);
}

TEST_CASE("handlers may schedule follow-up events inside one advance") {
  VirtualClock clock;
  std::vector<SimTime> at;
  clock.schedule(kSecond, [&] {
    at.push_back(clock.now());
    clock.schedule(clock.now() + kSecond, [&] { at.push_back(clock.now()); });
  });
  CHECK(clock.advance_until(3 * kSecond) == 2);
  CHECK(at == std::vector<SimTime>{kSecond, 2 * kSecond});
}

TEST_CASE("channel delivers in order and paces to the line rate") {
  VirtualClock clock;
  ByteChannel link(clock, 4800, "gps");
  std::vector<SimTime> deliveries;
  link.b().set_on_data([&] { deliveries.push_back(clock.now()); });

  std::string burst(2000, 'x');
  link.a().write(burst);
  clock.advance_until(10 * kSecond);
  CHECK(link.b().read_available() == burst);
  REQUIRE(deliveries.size() == burst.size());

  // 8N1 framing: never more than rate/10 + 1 bytes in any simulated second.
  const std::size_t cap = 4800 / 10 + 1;
  for (std::size_t i = 0; i < deliveries.size(); ++i) {
    std::size_t j = i;
    while (j < deliveries.size() && deliveries[j] < deliveries[i] + kSecond) ++j;
    CHECK(j - i <= cap);
  }
  // Throughput should also be close to the full rate while saturated.
  CHECK(deliveries.back() - deliveries.front() >=
        duration_from_seconds(1999.0 * 10 / 4800));
}

TEST_CASE("channel pacing restarts cleanly after idle gaps") {
  VirtualClock clock;
  ByteChannel link(clock, 9600, "gsm");
  link.a().write("hello");
  clock.advance_until(kSecond);
  CHECK(link.b().read_available() == "hello");
  link.a().write("again");
  clock.advance_until(2 * kSecond);
  CHECK(link.b().read_available() == "again");
  CHECK(link.b().rx_trace() == "helloagain");
}

TEST_CASE("closed channel refuses writes and wakes waiters") {
  VirtualClock clock;
  ByteChannel link(clock, 9600, "gsm");
  link.close();
  CHECK_THROWS_AS(link.a().write("x"), ChannelClosed);
  CHECK_FALSE(link.b().wait_readable(kSecond));
  CHECK_FALSE(link.b().is_open());
}

TEST_CASE("identical writes replay to identical delivery traces") {
  auto run_once = [] {
    VirtualClock clock;
    ByteChannel link(clock, 4800, "gps");
    std::vector<SimTime> at;
    link.b().set_on_data([&] { at.push_back(clock.now()); });
    link.a().write("abcdef");
    clock.advance_until(kSecond);
    link.a().write("ghij");
    clock.advance_until(3 * kSecond);
    return std::make_pair(link.b().rx_trace(), at);
  };
  CHECK(run_once() == run_once());
}

TEST_CASE("gps device: noiseless ticks reproduce the route") {
  VirtualClock clock;
  ByteChannel link(clock, 4800, "gps");
  SimTime t0 = kBase, t1 = kBase + 120 * kSecond;
  GpsDeviceConfig cfg{demo_route(t0, t1), NoiseModel{0.0, 0.0, 9}, 7, t0, t1};
  GpsDevice dev(clock, link.a(), cfg);

  nmea::FixAssembler fa;
  for (SimTime t : {kBase, kBase + 30 * kSecond, kBase + 120 * kSecond}) {
    auto lines = dev.tick_lines(t);
    REQUIRE(lines.size() == 2);
    for (const auto& l : lines) fa.feed(l);
    auto fix = fa.next_fix();
    REQUIRE(fix.has_value());
    CHECK(fix->time == t);
    CHECK(fix->quality == nmea::FixQuality::Gps);
    CHECK(fix->num_sats == 7);
    geodesy::GeoPoint truth = route_position_at(cfg.route, t);
    CHECK(geodesy::haversine_distance_m(fix->point, truth) < 0.25);
    double speed_kmh = geodesy::knots_to_kmh(fix->speed_knots);
    CHECK(std::abs(speed_kmh - geodesy::route_speed_kmh_at(cfg.route, t)) < 0.2);
  }

  // Outside the span the receiver stays alive but reports no solution.
  auto lines = dev.tick_lines(kBase + 121 * kSecond);
  auto gga = nmea::parse(lines[0]);
  CHECK(gga.fields[5] == "0");
}

TEST_CASE("gps device: total dropout degrades every tick to no-fix") {
  VirtualClock clock;
  ByteChannel link(clock, 4800, "gps");
  GpsDeviceConfig cfg{demo_route(kBase, kBase + 60 * kSecond), NoiseModel{0.0, 1.0, 1},
                      7, kBase, kBase + 60 * kSecond};
  GpsDevice dev(clock, link.a(), cfg);
  for (SimTime t = kBase; t <= kBase + 60 * kSecond; t += kSecond) {
    auto gga = nmea::parse(dev.tick_lines(t)[0]);
    CHECK(gga.fields[5] == "0");
  }
}

TEST_CASE("gps device: one GGA+RMC pair per second while in span") {
  VirtualClock clock;
  ByteChannel link(clock, 4800, "gps");
  SimTime last = kBase + 59 * kSecond;
  GpsDeviceConfig cfg{demo_route(kBase, kBase + 300 * kSecond), NoiseModel{0.0, 0.3, 5},
                      7, kBase, last};
  GpsDevice dev(clock, link.a(), cfg);
  dev.start();
  clock.advance_until(kBase + 70 * kSecond);

  nmea::FixAssembler fa;
  fa.feed(link.b().read_available());
  long count = 0;
  SimTime expect = kBase;
  while (auto fix = fa.next_fix()) {
    CHECK(fix->time == expect);  // dropout replaces the pair, never removes it
    expect += kSecond;
    ++count;
  }
  CHECK(count == 60);
  CHECK(dev.ticks_emitted() == 60);
  CHECK(fa.discarded() == 0);
}

TEST_CASE("gps device: seeded noise lands near its sigma") {
  VirtualClock clock;
  ByteChannel link(clock, 4800, "gps");
  SimTime t1 = kBase + 1100 * kSecond;
  Route route{{{kBase, {20.2961, 85.8245, 45.0}}, {t1, {20.3500, 85.8700, 45.0}}}};
  GpsDeviceConfig cfg{route, NoiseModel{5.0, 0.0, 1234}, 7, kBase, t1};
  GpsDevice dev(clock, link.a(), cfg);

  std::vector<geodesy::TimedPoint> recorded;
  nmea::FixAssembler fa;
  for (SimTime t = kBase; t < kBase + 1000 * kSecond; t += kSecond) {
    for (const auto& l : dev.tick_lines(t)) fa.feed(l);
    auto fix = fa.next_fix();
    REQUIRE(fix.has_value());
    recorded.push_back({fix->time, fix->point});
  }
  auto stats = geodesy::track_error(recorded, route);
  CHECK(stats.rmse_m > 4.0);
  CHECK(stats.rmse_m < 6.0);
}

TEST_CASE("sms network: latency, FIFO, and undeliverable") {
  VirtualClock clock;
  SmsNetwork net(clock, kSecond);
  std::vector<std::pair<SimTime, std::string>> got;
  net.attach("917700000001", [&](const atproto::SmsMessage& m) {
    got.emplace_back(clock.now(), m.text);
  });

  clock.advance_until(10 * kSecond);
  net.send(atproto::SmsMessage::make("917700000002", "917700000001", "LOC", clock.now()));
  net.send(atproto::SmsMessage::make("917700000002", "917700000001", "SPEED", clock.now()));
  clock.advance_until(20 * kSecond);

  REQUIRE(got.size() == 2);
  CHECK(got[0].first == 11 * kSecond);  // exactly one second later, virtual
  CHECK(got[0].second == "LOC");
  CHECK(got[1].second == "SPEED");

  CHECK_THROWS_AS(
      net.send(atproto::SmsMessage::make("917700000002", "919999999999", "X", clock.now())),
      UndeliverableError);
  CHECK(net.transcript().size() == 3);
  CHECK_FALSE(net.transcript()[2].deliverable);
}

TEST_CASE("modem device: healthy init exchange and unknown command") {
  VirtualClock clock;
  ByteChannel link(clock, 9600, "gsm");
  ModemDevice modem(clock, link.b(), nullptr, "917700000001");

  auto exchange = [&](std::string_view cmd) {
    link.a().write(std::string(cmd) + "\r");
    clock.advance_until(clock.now() + kSecond);
    return link.a().read_available();
  };

  CHECK(exchange("AT") == "OK\r\n");
  CHECK(exchange("AT+CMGF=1") == "+CPIN: READY\r\nOK\r\n");
  CHECK(exchange("AT+CREG?") == "+CREG: 0,1\r\nOK\r\n");
  CHECK(exchange("AT+XYZ") == "ERROR\r\n");
  CHECK(modem.unknown_commands() == std::vector<std::string>{"AT+XYZ"});
}

TEST_CASE("modem device: script steps override, then fall through") {
  VirtualClock clock;
  ByteChannel link(clock, 9600, "gsm");
  ModemDevice modem(clock, link.b(), nullptr, "917700000001",
                    modem_script_by_name("creg_poll:2"));

  auto exchange = [&](std::string_view cmd) {
    link.a().write(std::string(cmd) + "\r");
    clock.advance_until(clock.now() + kSecond);
    return link.a().read_available();
  };

  CHECK(exchange("AT") == "OK\r\n");  // non-matching falls through to healthy
  CHECK(exchange("AT+CREG?") == "+CREG: 0,2\r\nOK\r\n");
  CHECK(exchange("AT+CREG?") == "+CREG: 0,2\r\nOK\r\n");
  CHECK(exchange("AT+CREG?") == "+CREG: 0,1\r\nOK\r\n");  // script exhausted
}

TEST_CASE("modem device: unsolicited CMTI on mid-idle delivery") {
  VirtualClock clock;
  SmsNetwork net(clock, kSecond);
  ByteChannel link(clock, 9600, "gsm");
  ModemDevice modem(clock, link.b(), &net, "917700000001");
  PhoneSim phone(clock, net, "917700000002");

  phone.schedule_send(5 * kSecond, "917700000001", "LOC");
  clock.advance_until(10 * kSecond);
  std::string bytes = link.a().read_available();
  CHECK(bytes == "+CMTI: \"SM\",1\r\n");
}

TEST_CASE("unknown modem script name is rejected") {
  CHECK_THROWS_AS(modem_script_by_name("bogus"), Error);
  CHECK_THROWS_AS(modem_script_by_name("at_fail:x"), Error);
  CHECK(modem_script_by_name("healthy").empty());
  CHECK(modem_script_by_name("at_fail:3").size() == 3);
}
