#pragma once

#include <string>
#include <vector>

#include "trackline/geodesy.hpp"
#include "trackline/simnet.hpp"
#include "trackline/tracker.hpp"

namespace trackline::cli {

class ScenarioError : public Error {
 public:
  ScenarioError(std::string file, int line, const std::string& msg)
      : Error(file + ":" + std::to_string(line) + ": " + msg),
        file(std::move(file)),
        line_number(line) {}
  std::string file;
  int line_number;
};

struct PhoneAction {
  SimTime at = 0;  // absolute virtual time
  tracker::CommandVerb verb = tracker::CommandVerb::Speed;
};

/// Everything needed to reproduce one run: world layout, timings, and the one
/// seed all randomness derives from.
struct Scenario {
  std::string name = "unnamed";
  std::uint64_t seed = 0;
  SimTime start_time = 0;
  SimDuration duration = 0;
  geodesy::Route route;
  simnet::NoiseModel noise;  // seed is filled from the scenario seed
  int gps_baud = 4800;
  int gsm_baud = 9600;
  int gps_sats = 7;
  std::string modem_script = "healthy";
  SimDuration sms_latency = 1 * kSecond;
  SimDuration at_timeout = 2 * kSecond;
  int at_max_restarts = 5;
  tracker::ServerConfig server;
  std::string phone_msisdn;
  std::vector<PhoneAction> schedule;
};

/// Parse and validate a scenario file. Line-oriented "key value..." pairs
/// plus "route"/"schedule" blocks; see the shipped scenarios for the schema.
/// Every violation throws ScenarioError with the offending line. The
/// TRACKLINE_SEED_OVERRIDE environment variable, when set, replaces the seed.
Scenario load_scenario(const std::string& path);

/// Same parser over in-memory text (file name only labels diagnostics).
Scenario parse_scenario(const std::string& text, const std::string& file_label);

}  // namespace trackline::cli
