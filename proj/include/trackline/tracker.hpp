#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "trackline/atproto.hpp"
#include "trackline/geodesy.hpp"
#include "trackline/io.hpp"
#include "trackline/nmea.hpp"
#include "trackline/simnet.hpp"

namespace trackline::tracker {

// ---------------------------------------------------------------------------
// Track
// ---------------------------------------------------------------------------

struct TrackSample {
  nmea::GpsFix fix;
  bool valid = false;
  std::string invalid_reason;
};

/// Append-only record of everything the server read off the GPS. Invalid
/// fixes are kept but flagged; they never feed query replies or error stats.
struct Track {
  std::string vehicle_id = "vehicle-1";
  SimTime started_at = 0;
  std::vector<TrackSample> samples;
  long dropped = 0;  // non-monotone arrivals, counted and discarded
};

/// Append a fix if its timestamp advances the track; otherwise count a drop.
/// Returns whether the fix was recorded.
bool record_fix(Track& track, const nmea::GpsFix& fix, const nmea::FixValidity& validity);

/// One line per sample in the documented record schema. Returns record count.
long export_track(const Track& track, std::ostream& out);

/// Inverse of export_track. Throws ImportError naming the offending line for
/// anything malformed, missing, or unknown.
class ImportError : public Error {
 public:
  ImportError(int line, const std::string& msg)
      : Error("line " + std::to_string(line) + ": " + msg), line_number(line) {}
  int line_number;
};
Track import_track(std::istream& in);

enum class RenderStyle { AsciiGrid, PlotData };

/// AsciiGrid: fixed 60x20 footprint plot of the valid samples. PlotData:
/// "lon lat" rows in time order, one per valid sample.
std::string render_track(const Track& track, RenderStyle style);

/// Valid samples as timestamped points for geodesy::track_error.
std::vector<geodesy::TimedPoint> valid_points(const Track& track);

/// Tracking error of a recorded track against the truth route (valid samples
/// only). Throws Error when the track has no valid samples or leaves the span.
geodesy::TrackErrorStats track_error(const Track& track, const geodesy::Route& truth);

// ---------------------------------------------------------------------------
// Command protocol
// ---------------------------------------------------------------------------

enum class MonitorMode { OnDemand, ContinuousPath };

enum class CommandVerb { Speed, Loc };

struct CommandRequest {
  std::string from_msisdn;
  CommandVerb verb = CommandVerb::Speed;
  SimTime received_at = 0;
};

/// Exact-match command parse: "SPEED" and "LOC" only. Anything else is a
/// rejection, reported as nullopt rather than an error.
std::optional<CommandVerb> parse_command(std::string_view text);

struct ServerConfig {
  std::string msisdn;
  std::vector<std::string> authorized;  // senders allowed to query
  MonitorMode mode = MonitorMode::ContinuousPath;
  SimDuration stale_after = 5 * kSecond;
  std::string vehicle_id = "vehicle-1";
};

/// Reply text for one request given the freshest usable fix; "NO FIX" when
/// there is none, it is invalid, or it is older than the staleness threshold.
std::string answer_query(const ServerConfig& config, const CommandRequest& request,
                         const std::optional<nmea::GpsFix>& freshest, SimTime now);

// ---------------------------------------------------------------------------
// Server event loop
// ---------------------------------------------------------------------------

struct RunSummary {
  long fixes_recorded = 0;
  long fixes_dropped = 0;
  long queries_served = 0;
  long queries_rejected = 0;
  std::string error;  // empty on a clean run
};

/// The base-station loop: owns the GPS byte stream and the GSM session, and
/// works in half-duplex phases. Each one-second cycle drains inbound SMS
/// first; a pending command triggers a fresh GPS read before the reply goes
/// out; otherwise GPS data is recorded (ContinuousPath) or read and discarded
/// (OnDemand).
class Server {
 public:
  Server(ServerConfig config, simnet::VirtualClock& clock, ByteEndpoint& gps,
         atproto::ModemSession& gsm);

  /// Initialize the modem and run until the virtual clock reaches end_time.
  RunSummary run(SimTime end_time);

  const Track& track() const { return track_; }
  const ServerConfig& config() const { return config_; }

 private:
  void drain_gps(bool query_window);
  void handle_fix(const nmea::GpsFix& fix, bool query_window);
  std::vector<CommandRequest> collect_requests();
  bool wait_fresh_fix(SimTime deadline);

  ServerConfig config_;
  simnet::VirtualClock& clock_;
  ByteEndpoint& gps_;
  atproto::ModemSession& gsm_;
  nmea::FixAssembler assembler_;
  Track track_;
  std::optional<nmea::GpsFix> last_valid_fix_;
  bool fix_seen_in_window_ = false;
  RunSummary summary_;
};

}  // namespace trackline::tracker
