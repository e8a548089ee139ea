#include "trackline/scenario.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace trackline::cli {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

double parse_num(const std::string& s, const std::string& file, int line,
                 const char* what) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v))
    throw ScenarioError(file, line, std::string("bad ") + what + ": '" + s + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& s, const std::string& file, int line,
                        const char* what) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
    throw ScenarioError(file, line, std::string("bad ") + what + ": '" + s + "'");
  return std::strtoull(s.c_str(), nullptr, 10);
}

}  // namespace

Scenario parse_scenario(const std::string& text, const std::string& file) {
  Scenario sc;
  bool seen_seed = false, seen_duration = false, seen_start = false, seen_mode = false;
  bool seen_server_msisdn = false, seen_phone = false;
  std::vector<std::pair<int, std::vector<std::string>>> route_lines, schedule_lines;

  enum class Block { None, Route, Schedule };
  Block block = Block::None;

  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    std::size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    auto tok = split_ws(raw);
    if (tok.empty()) continue;

    if (block != Block::None) {
      if (tok[0] == "end") {
        block = Block::None;
        continue;
      }
      if (block == Block::Route) {
        if (tok[0] != "wp" || tok.size() != 5)
          throw ScenarioError(file, line_no, "route lines must be 'wp <t_s> <lat> <lon> <alt>'");
        route_lines.emplace_back(line_no, tok);
      } else {
        if (tok[0] != "at" || tok.size() != 3)
          throw ScenarioError(file, line_no, "schedule lines must be 'at <t_s> SPEED|LOC'");
        schedule_lines.emplace_back(line_no, tok);
      }
      continue;
    }

    const std::string& key = tok[0];
    auto need = [&](std::size_t n) {
      if (tok.size() != n + 1)
        throw ScenarioError(file, line_no, "'" + key + "' takes " + std::to_string(n) +
                                               " value(s)");
    };

    if (key == "route") {
      need(0);
      block = Block::Route;
    } else if (key == "schedule") {
      need(0);
      block = Block::Schedule;
    } else if (key == "name") {
      need(1);
      sc.name = tok[1];
    } else if (key == "seed") {
      need(1);
      sc.seed = parse_u64(tok[1], file, line_no, "seed");
      seen_seed = true;
    } else if (key == "start") {
      need(1);
      try {
        sc.start_time = parse_iso8601(tok[1]);
      } catch (const Error& e) {
        throw ScenarioError(file, line_no, e.what());
      }
      seen_start = true;
    } else if (key == "duration_s") {
      need(1);
      double d = parse_num(tok[1], file, line_no, "duration");
      if (d <= 0) throw ScenarioError(file, line_no, "duration must be positive");
      sc.duration = duration_from_seconds(d);
      seen_duration = true;
    } else if (key == "mode") {
      need(1);
      if (tok[1] == "continuous")
        sc.server.mode = tracker::MonitorMode::ContinuousPath;
      else if (tok[1] == "ondemand")
        sc.server.mode = tracker::MonitorMode::OnDemand;
      else
        throw ScenarioError(file, line_no, "mode must be 'continuous' or 'ondemand'");
      seen_mode = true;
    } else if (key == "stale_after_s") {
      need(1);
      double v = parse_num(tok[1], file, line_no, "stale_after_s");
      if (v <= 0) throw ScenarioError(file, line_no, "stale_after_s must be positive");
      sc.server.stale_after = duration_from_seconds(v);
    } else if (key == "server_msisdn") {
      need(1);
      sc.server.msisdn = tok[1];
      seen_server_msisdn = true;
    } else if (key == "phone_msisdn") {
      need(1);
      sc.phone_msisdn = tok[1];
      seen_phone = true;
    } else if (key == "authorized") {
      if (tok.size() < 2)
        throw ScenarioError(file, line_no, "'authorized' needs at least one MSISDN");
      sc.server.authorized.assign(tok.begin() + 1, tok.end());
    } else if (key == "vehicle") {
      need(1);
      sc.server.vehicle_id = tok[1];
    } else if (key == "gps_baud") {
      need(1);
      sc.gps_baud = static_cast<int>(parse_num(tok[1], file, line_no, "gps_baud"));
    } else if (key == "gsm_baud") {
      need(1);
      sc.gsm_baud = static_cast<int>(parse_num(tok[1], file, line_no, "gsm_baud"));
    } else if (key == "gps_sats") {
      need(1);
      double v = parse_num(tok[1], file, line_no, "gps_sats");
      if (v < 0 || v > 24 || v != std::floor(v))
        throw ScenarioError(file, line_no, "gps_sats must be an integer in [0, 24]");
      sc.gps_sats = static_cast<int>(v);
    } else if (key == "modem_script") {
      need(1);
      sc.modem_script = tok[1];
    } else if (key == "sms_latency_s") {
      need(1);
      double v = parse_num(tok[1], file, line_no, "sms_latency_s");
      if (v < 0) throw ScenarioError(file, line_no, "sms_latency_s must be >= 0");
      sc.sms_latency = duration_from_seconds(v);
    } else if (key == "at_timeout_s") {
      need(1);
      double v = parse_num(tok[1], file, line_no, "at_timeout_s");
      if (v <= 0) throw ScenarioError(file, line_no, "at_timeout_s must be positive");
      sc.at_timeout = duration_from_seconds(v);
    } else if (key == "at_max_restarts") {
      need(1);
      double v = parse_num(tok[1], file, line_no, "at_max_restarts");
      if (v < 0 || v != std::floor(v))
        throw ScenarioError(file, line_no, "at_max_restarts must be a non-negative integer");
      sc.at_max_restarts = static_cast<int>(v);
    } else if (key == "noise_sigma_m") {
      need(1);
      sc.noise.sigma_m = parse_num(tok[1], file, line_no, "noise_sigma_m");
      if (sc.noise.sigma_m < 0)
        throw ScenarioError(file, line_no, "noise_sigma_m must be >= 0");
    } else if (key == "noise_dropout") {
      need(1);
      sc.noise.dropout_prob = parse_num(tok[1], file, line_no, "noise_dropout");
      if (sc.noise.dropout_prob < 0 || sc.noise.dropout_prob > 1)
        throw ScenarioError(file, line_no, "noise_dropout must be within [0, 1]");
    } else {
      throw ScenarioError(file, line_no, "unknown key '" + key + "'");
    }
  }
  if (block != Block::None)
    throw ScenarioError(file, line_no, "unterminated block (missing 'end')");

  // Required keys. The seed must be explicit: no run may depend on implicit
  // randomness.
  if (!seen_seed) throw ScenarioError(file, line_no, "scenario omits required 'seed'");
  if (!seen_start) throw ScenarioError(file, line_no, "scenario omits required 'start'");
  if (!seen_duration)
    throw ScenarioError(file, line_no, "scenario omits required 'duration_s'");
  if (!seen_mode) throw ScenarioError(file, line_no, "scenario omits required 'mode'");
  if (!seen_server_msisdn)
    throw ScenarioError(file, line_no, "scenario omits required 'server_msisdn'");
  if (!seen_phone)
    throw ScenarioError(file, line_no, "scenario omits required 'phone_msisdn'");
  if (route_lines.empty())
    throw ScenarioError(file, line_no, "scenario omits required 'route' block");

  if (!atproto::is_valid_msisdn(sc.server.msisdn))
    throw ScenarioError(file, 0, "bad server_msisdn '" + sc.server.msisdn + "'");
  if (!atproto::is_valid_msisdn(sc.phone_msisdn))
    throw ScenarioError(file, 0, "bad phone_msisdn '" + sc.phone_msisdn + "'");
  if (sc.server.authorized.empty()) sc.server.authorized = {sc.phone_msisdn};
  for (const auto& m : sc.server.authorized)
    if (!atproto::is_valid_msisdn(m))
      throw ScenarioError(file, 0, "bad authorized MSISDN '" + m + "'");
  if (sc.gps_baud <= 0 || sc.gsm_baud <= 0)
    throw ScenarioError(file, 0, "baud rates must be positive");

  for (const auto& [ln, tok] : route_lines) {
    double off = parse_num(tok[1], file, ln, "waypoint time");
    if (off < 0) throw ScenarioError(file, ln, "waypoint time must be >= 0");
    geodesy::GeoPoint p{parse_num(tok[2], file, ln, "latitude"),
                        parse_num(tok[3], file, ln, "longitude"),
                        parse_num(tok[4], file, ln, "altitude")};
    if (!geodesy::is_valid(p))
      throw ScenarioError(file, ln, "waypoint out of range");
    sc.route.waypoints.push_back({sc.start_time + duration_from_seconds(off), p});
  }
  try {
    geodesy::validate_route(sc.route);
  } catch (const Error& e) {
    throw ScenarioError(file, route_lines.front().first, e.what());
  }

  for (const auto& [ln, tok] : schedule_lines) {
    double off = parse_num(tok[1], file, ln, "schedule time");
    if (off < 0 || duration_from_seconds(off) > sc.duration)
      throw ScenarioError(file, ln, "schedule time outside scenario duration");
    auto verb = tracker::parse_command(tok[2]);
    if (!verb)
      throw ScenarioError(file, ln, "schedule verb must be SPEED or LOC, got '" +
                                        tok[2] + "'");
    sc.schedule.push_back({sc.start_time + duration_from_seconds(off), *verb});
  }

  sc.noise.seed = sc.seed;
  if (const char* override_seed = std::getenv("TRACKLINE_SEED_OVERRIDE")) {
    std::string s(override_seed);
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
      throw ScenarioError(file, 0, "TRACKLINE_SEED_OVERRIDE must be a non-negative integer");
    sc.seed = std::strtoull(s.c_str(), nullptr, 10);
    sc.noise.seed = sc.seed;
  }
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(path, 0, "cannot open scenario file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path);
}

}  // namespace trackline::cli
