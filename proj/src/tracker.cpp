#include "trackline/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>

namespace trackline::tracker {

using nmea::FixQuality;
using nmea::GpsFix;

// ---------------------------------------------------------------------------
// Track recording and persistence
// ---------------------------------------------------------------------------

bool record_fix(Track& track, const GpsFix& fix, const nmea::FixValidity& validity) {
  if (!track.samples.empty() && fix.time <= track.samples.back().fix.time) {
    ++track.dropped;
    return false;
  }
  track.samples.push_back({fix, validity.valid, validity.reason});
  return true;
}

namespace {

const char* quality_name(FixQuality q) {
  switch (q) {
    case FixQuality::NoFix: return "nofix";
    case FixQuality::Gps: return "gps";
    case FixQuality::Dgps: return "dgps";
  }
  return "nofix";
}

std::optional<FixQuality> quality_from_name(std::string_view s) {
  if (s == "nofix") return FixQuality::NoFix;
  if (s == "gps") return FixQuality::Gps;
  if (s == "dgps") return FixQuality::Dgps;
  return std::nullopt;
}

constexpr const char* kTrackMagic = "# trackline track v1";

}  // namespace

long export_track(const Track& track, std::ostream& out) {
  out << kTrackMagic << "\n";
  out << "vehicle " << track.vehicle_id << "\n";
  out << "started " << format_iso8601(track.started_at) << "\n";
  long records = 0;
  char buf[256];
  for (const auto& s : track.samples) {
    double kmh = geodesy::knots_to_kmh(s.fix.speed_knots);
    std::snprintf(buf, sizeof buf,
                  "t=%s lat=%.6f lon=%.6f alt=%.1f speed_kmh=%.1f sats=%d quality=%s "
                  "valid=%s",
                  format_iso8601(s.fix.time).c_str(), s.fix.point.lat_deg,
                  s.fix.point.lon_deg, s.fix.point.alt_m, kmh, s.fix.num_sats,
                  quality_name(s.fix.quality), s.valid ? "true" : "false");
    out << buf << "\n";
    ++records;
  }
  return records;
}

namespace {

// Record lines are "key=value" pairs in a fixed order; import rejects unknown
// keys, missing keys, and duplicates.
struct RecordParser {
  int line_no;
  std::string_view rest;

  std::string take(const char* key) {
    std::string_view k(key);
    if (rest.substr(0, k.size()) != k || rest.size() <= k.size() ||
        rest[k.size()] != '=')
      throw ImportError(line_no, "expected field '" + std::string(key) + "'");
    rest.remove_prefix(k.size() + 1);
    std::size_t sp = rest.find(' ');
    std::string value(rest.substr(0, sp));
    rest.remove_prefix(sp == std::string_view::npos ? rest.size() : sp + 1);
    return value;
  }

  void done() {
    if (!rest.empty()) throw ImportError(line_no, "unknown trailing fields: '" +
                                                      std::string(rest) + "'");
  }
};

double parse_num(const std::string& s, int line_no, const char* what) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v))
    throw ImportError(line_no, std::string("bad ") + what + ": '" + s + "'");
  return v;
}

}  // namespace

Track import_track(std::istream& in) {
  Track track;
  std::string line;
  int line_no = 0;

  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  if (!next_line() || line != kTrackMagic)
    throw ImportError(line_no == 0 ? 1 : line_no, "missing track header");
  if (!next_line() || line.rfind("vehicle ", 0) != 0)
    throw ImportError(line_no == 0 ? 2 : line_no, "missing vehicle line");
  track.vehicle_id = line.substr(8);
  if (track.vehicle_id.empty() || track.vehicle_id.find(' ') != std::string::npos)
    throw ImportError(line_no, "bad vehicle id");
  if (!next_line() || line.rfind("started ", 0) != 0)
    throw ImportError(line_no == 0 ? 3 : line_no, "missing started line");
  try {
    track.started_at = parse_iso8601(line.substr(8));
  } catch (const Error& e) {
    throw ImportError(line_no, e.what());
  }

  while (next_line()) {
    if (line.empty()) continue;
    RecordParser p{line_no, line};
    TrackSample s;
    try {
      s.fix.time = parse_iso8601(p.take("t"));
    } catch (const ImportError&) {
      throw;
    } catch (const Error& e) {
      throw ImportError(line_no, e.what());
    }
    s.fix.point.lat_deg = parse_num(p.take("lat"), line_no, "latitude");
    s.fix.point.lon_deg = parse_num(p.take("lon"), line_no, "longitude");
    s.fix.point.alt_m = parse_num(p.take("alt"), line_no, "altitude");
    s.fix.speed_knots = parse_num(p.take("speed_kmh"), line_no, "speed") / geodesy::kKmhPerKnot;
    double sats = parse_num(p.take("sats"), line_no, "satellite count");
    if (sats < 0 || sats > 24 || sats != std::floor(sats))
      throw ImportError(line_no, "bad satellite count");
    s.fix.num_sats = static_cast<int>(sats);
    auto q = quality_from_name(p.take("quality"));
    if (!q) throw ImportError(line_no, "bad quality value");
    s.fix.quality = *q;
    std::string valid = p.take("valid");
    if (valid != "true" && valid != "false")
      throw ImportError(line_no, "bad valid flag: '" + valid + "'");
    s.valid = valid == "true";
    p.done();
    if (!s.valid) s.invalid_reason = nmea::validity(s.fix).reason;
    if (!track.samples.empty() && s.fix.time <= track.samples.back().fix.time)
      throw ImportError(line_no, "non-monotone sample timestamp");
    track.samples.push_back(std::move(s));
  }
  return track;
}

std::vector<geodesy::TimedPoint> valid_points(const Track& track) {
  std::vector<geodesy::TimedPoint> out;
  for (const auto& s : track.samples)
    if (s.valid) out.push_back({s.fix.time, s.fix.point});
  return out;
}

geodesy::TrackErrorStats track_error(const Track& track, const geodesy::Route& truth) {
  auto points = valid_points(track);
  if (points.empty()) throw Error("track has no valid samples");
  return geodesy::track_error(points, truth);
}

std::string render_track(const Track& track, RenderStyle style) {
  auto points = valid_points(track);
  char buf[64];

  if (style == RenderStyle::PlotData) {
    std::string out;
    for (const auto& p : points) {
      std::snprintf(buf, sizeof buf, "%.6f %.6f\n", p.point.lon_deg, p.point.lat_deg);
      out += buf;
    }
    return out;
  }

  constexpr int kWidth = 60, kHeight = 20;
  std::vector<std::string> grid(kHeight, std::string(kWidth, '.'));
  if (!points.empty()) {
    double min_lat = points[0].point.lat_deg, max_lat = min_lat;
    double min_lon = points[0].point.lon_deg, max_lon = min_lon;
    for (const auto& p : points) {
      min_lat = std::min(min_lat, p.point.lat_deg);
      max_lat = std::max(max_lat, p.point.lat_deg);
      min_lon = std::min(min_lon, p.point.lon_deg);
      max_lon = std::max(max_lon, p.point.lon_deg);
    }
    double lat_span = max_lat - min_lat;
    double lon_span = max_lon - min_lon;
    for (const auto& p : points) {
      int col = lon_span > 0 ? static_cast<int>(std::lround(
                                   (p.point.lon_deg - min_lon) / lon_span * (kWidth - 1)))
                             : kWidth / 2;
      int row = lat_span > 0 ? static_cast<int>(std::lround(
                                   (p.point.lat_deg - min_lat) / lat_span * (kHeight - 1)))
                             : kHeight / 2;
      grid[kHeight - 1 - row][col] = '*';  // north up
    }
  }
  std::string out;
  for (const auto& row : grid) {
    out += row;
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Command protocol
// ---------------------------------------------------------------------------

std::optional<CommandVerb> parse_command(std::string_view text) {
  if (text == "SPEED") return CommandVerb::Speed;
  if (text == "LOC") return CommandVerb::Loc;
  return std::nullopt;
}

std::string answer_query(const ServerConfig& config, const CommandRequest& request,
                         const std::optional<nmea::GpsFix>& freshest, SimTime now) {
  bool usable = freshest && nmea::validity(*freshest).valid &&
                now - freshest->time <= config.stale_after;
  if (!usable) return "NO FIX";

  char buf[96];
  if (request.verb == CommandVerb::Speed) {
    std::snprintf(buf, sizeof buf, "SPEED %.1f KMPH AT %sZ",
                  geodesy::knots_to_kmh(freshest->speed_knots),
                  format_hhmmss_colon(freshest->time).c_str());
  } else {
    std::snprintf(buf, sizeof buf, "LOC %.6f %.6f ALT %.1fM AT %sZ",
                  freshest->point.lat_deg, freshest->point.lon_deg,
                  freshest->point.alt_m, format_hhmmss_colon(freshest->time).c_str());
  }
  return buf;
}

// ---------------------------------------------------------------------------
// Server
// ---------------------------------------------------------------------------

Server::Server(ServerConfig config, simnet::VirtualClock& clock, ByteEndpoint& gps,
               atproto::ModemSession& gsm)
    : config_(std::move(config)), clock_(clock), gps_(gps), gsm_(gsm) {
  if (config_.authorized.empty())
    throw Error("server needs at least one authorized MSISDN");
  if (config_.stale_after <= 0) throw Error("stale-fix threshold must be positive");
  track_.vehicle_id = config_.vehicle_id;
  track_.started_at = clock_.now();
}

void Server::handle_fix(const GpsFix& fix, bool query_window) {
  bool record = config_.mode == MonitorMode::ContinuousPath || query_window;
  if (!record) return;  // OnDemand outside a request: read and discarded
  auto v = nmea::validity(fix);
  if (record_fix(track_, fix, v)) {
    ++summary_.fixes_recorded;
    if (v.valid) last_valid_fix_ = fix;
  }
  if (query_window) fix_seen_in_window_ = true;
}

void Server::drain_gps(bool query_window) {
  assembler_.feed(gps_.read_available());
  while (auto fix = assembler_.next_fix()) handle_fix(*fix, query_window);
}

// Block (in virtual time) until a GGA+RMC pair completes after the request
// came in. Anything already buffered predates the request and is drained
// under the normal (non-query) rules first, so a reply never reports a fix
// older than one sample interval.
bool Server::wait_fresh_fix(SimTime deadline) {
  drain_gps(false);
  fix_seen_in_window_ = false;
  while (true) {
    drain_gps(true);
    if (fix_seen_in_window_) return true;
    SimTime now = clock_.now();
    if (now >= deadline || !gps_.is_open()) return false;
    if (!gps_.wait_readable(deadline - now) && clock_.now() >= deadline) return false;
  }
}

std::vector<CommandRequest> Server::collect_requests() {
  std::vector<CommandRequest> pending;
  std::vector<atproto::SmsMessage> inbound;
  try {
    inbound = gsm_.read_sms();
  } catch (const atproto::SmsParseError&) {
    ++summary_.queries_rejected;  // unreadable message can never be answered
    return pending;
  }
  for (const auto& msg : inbound) {
    bool authorized = std::find(config_.authorized.begin(), config_.authorized.end(),
                                msg.from_msisdn) != config_.authorized.end();
    auto verb = parse_command(msg.text);
    if (!authorized || !verb) {
      // Unrecognized or unauthorized: no reply goes out, only a count.
      ++summary_.queries_rejected;
      continue;
    }
    pending.push_back({msg.from_msisdn, *verb, clock_.now()});
  }
  return pending;
}

RunSummary Server::run(SimTime end_time) {
  summary_ = RunSummary{};
  try {
    gsm_.init_modem();
  } catch (const Error& e) {
    summary_.error = std::string("gsm init failed: ") + e.what();
    summary_.fixes_dropped = track_.dropped;
    return summary_;
  }

  while (clock_.now() < end_time) {
    try {
      SimTime cycle_end = std::min(clock_.now() + kSecond, end_time);
      clock_.advance_until(cycle_end);

      auto pending = collect_requests();
      if (!pending.empty()) {
        // A request switches the loop's attention to the GPS side for a fresh
        // read, then back to the modem for the replies.
        wait_fresh_fix(clock_.now() + 3 * kSecond);
        for (const auto& req : pending) {
          std::string reply = answer_query(config_, req, last_valid_fix_, clock_.now());
          try {
            gsm_.send_sms(req.from_msisdn, reply);
            ++summary_.queries_served;
          } catch (const ChannelClosed&) {
            throw;
          } catch (const Error& e) {
            summary_.error = std::string("sms send failed: ") + e.what();
          }
        }
      } else {
        drain_gps(false);
      }

      if (!gps_.is_open()) {
        summary_.error = "gps channel closed";
        break;
      }
      if (!gsm_.channel_open()) {
        summary_.error = "gsm channel closed";
        break;
      }
    } catch (const Error& e) {
      // A dead channel mid-run still yields a summary with its cause.
      summary_.error = e.what();
      break;
    }
  }

  summary_.fixes_dropped = track_.dropped;
  return summary_;
}

}  // namespace trackline::tracker
