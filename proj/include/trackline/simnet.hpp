#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "trackline/atproto.hpp"
#include "trackline/geodesy.hpp"
#include "trackline/io.hpp"
#include "trackline/nmea.hpp"

namespace trackline::simnet {

// The ground-truth path type and its interpolation live in geodesy; they are
// part of this module's surface as well.
using geodesy::Route;
using geodesy::RouteWaypoint;
using geodesy::route_position_at;

// ---------------------------------------------------------------------------
// Virtual clock
// ---------------------------------------------------------------------------

/// Discrete-event clock. Time never moves backwards; events at equal times
/// fire in scheduling order. Handlers may schedule new events but must not
/// re-enter advance_until.
class VirtualClock {
 public:
  explicit VirtualClock(SimTime start = 0) : now_(start) {}

  SimTime now() const { return now_; }

  /// Schedule fn at time at (clamped to now for past times).
  void schedule(SimTime at, std::function<void()> fn);

  /// Fire every event with time <= t in (time, sequence) order, then set
  /// now = t. Returns the number of events fired.
  int advance_until(SimTime t);

  std::optional<SimTime> next_event_time() const;

 private:
  SimTime now_;
  std::uint64_t next_seq_ = 0;
  std::map<std::pair<SimTime, std::uint64_t>, std::function<void()>> queue_;
};

// ---------------------------------------------------------------------------
// Baud-paced byte channel
// ---------------------------------------------------------------------------

/// A full-duplex serial link between two endpoints, throttled to a line rate
/// with 8N1 framing (10 bits per byte). Bytes are delivered one at a time as
/// clock events, so order and pacing are exact and reproducible.
class ByteChannel {
 public:
  class Endpoint : public ByteEndpoint {
   public:
    void write(std::string_view bytes) override;
    std::string read_available() override;
    bool wait_readable(SimDuration timeout) override;
    void sleep_until(SimTime t) override;
    SimTime now() const override;
    bool is_open() const override;

    /// Invoked after each byte lands in this endpoint's receive buffer
    /// (reactive devices attach themselves here; polling callers leave it unset).
    void set_on_data(std::function<void()> fn) { on_data_ = std::move(fn); }

    /// Everything ever delivered to this endpoint, in order.
    const std::string& rx_trace() const { return rx_trace_; }

   private:
    friend class ByteChannel;
    ByteChannel* channel_ = nullptr;
    Endpoint* peer_ = nullptr;
    std::string rx_;
    std::string rx_trace_;
    std::function<void()> on_data_;
    // Pacing state for the direction this endpoint transmits on.
    SimTime pace_epoch_ = 0;
    std::uint64_t bits_since_epoch_ = 0;
    SimTime last_delivery_ = 0;
  };

  ByteChannel(VirtualClock& clock, int bits_per_second, std::string name);

  Endpoint& a() { return a_; }
  Endpoint& b() { return b_; }
  const Endpoint& a() const { return a_; }
  const Endpoint& b() const { return b_; }
  void close() { open_ = false; }
  bool is_open() const { return open_; }
  int rate() const { return rate_; }
  const std::string& name() const { return name_; }

 private:
  friend class Endpoint;
  VirtualClock& clock_;
  int rate_;
  std::string name_;
  bool open_ = true;
  Endpoint a_, b_;
};

// ---------------------------------------------------------------------------
// Noise
// ---------------------------------------------------------------------------

/// Horizontal position noise: sigma is the total 2-D 1-sigma magnitude
/// (each axis gets sigma/sqrt(2)); dropout is the per-sample probability of
/// losing the fix entirely. Same seed, same sequence.
struct NoiseModel {
  double sigma_m = 0.0;
  double dropout_prob = 0.0;  // [0, 1]
  std::uint64_t seed = 0;
};

/// Deterministic Box-Muller source over a seeded mt19937_64, so the byte
/// streams are reproducible across standard libraries as well as runs.
class GaussianSource {
 public:
  explicit GaussianSource(std::uint64_t seed) : rng_(seed) {}
  double uniform();                     // [0, 1)
  std::pair<double, double> gaussian_pair();  // two independent N(0,1) draws

 private:
  std::mt19937_64 rng_;
};

// ---------------------------------------------------------------------------
// GPS receiver device
// ---------------------------------------------------------------------------

struct GpsDeviceConfig {
  Route route;
  NoiseModel noise;
  int num_sats = 7;
  SimTime first_tick = 0;
  SimTime last_tick = 0;  // inclusive
};

/// Emits one GGA+RMC pair per simulated second. Outside the route span, or on
/// a dropout draw, the pair degrades to no-fix sentences instead of vanishing.
class GpsDevice {
 public:
  GpsDevice(VirtualClock& clock, ByteEndpoint& out, GpsDeviceConfig config);

  /// Schedule the 1 Hz tick train on the clock.
  void start();

  /// The sentences for one tick (also the unit the tests probe directly).
  std::vector<std::string> tick_lines(SimTime t);

  long ticks_emitted() const { return ticks_emitted_; }

 private:
  void tick(SimTime t);

  VirtualClock& clock_;
  ByteEndpoint& out_;
  GpsDeviceConfig config_;
  GaussianSource noise_rng_;
  long ticks_emitted_ = 0;
};

// ---------------------------------------------------------------------------
// SMS network
// ---------------------------------------------------------------------------

class UndeliverableError : public Error {
 public:
  using Error::Error;
};

struct TranscriptEntry {
  SimTime sent_at = 0;
  std::string from;
  std::string to;
  std::string text;
  bool deliverable = true;
};

/// Store-and-forward SMS switch with a fixed delivery latency. Order is
/// preserved per sender/receiver pair; messages are never duplicated.
class SmsNetwork {
 public:
  SmsNetwork(VirtualClock& clock, SimDuration latency) : clock_(clock), latency_(latency) {}

  using Sink = std::function<void(const atproto::SmsMessage&)>;
  void attach(const std::string& msisdn, Sink sink);

  /// Queue msg for delivery at now + latency. Throws UndeliverableError for an
  /// unknown destination (after logging the attempt).
  void send(const atproto::SmsMessage& msg);

  const std::vector<TranscriptEntry>& transcript() const { return transcript_; }

 private:
  VirtualClock& clock_;
  SimDuration latency_;
  std::map<std::string, Sink> sinks_;
  std::vector<TranscriptEntry> transcript_;
};

// ---------------------------------------------------------------------------
// Scripted GSM modem device
// ---------------------------------------------------------------------------

/// One scripted exchange: when the next command equals expect, reply with
/// reply_lines (or stay silent). Non-matching commands fall through to the
/// built-in healthy behavior without consuming the step.
struct ScriptStep {
  std::string expect;
  std::vector<std::string> reply_lines;
  bool silent = false;
};

/// Device side of the AT dialect: consumes CR-terminated commands, replies per
/// script or default-healthy behavior, stores delivered SMS in SIM slots and
/// announces them with unsolicited "+CMTI:" lines. Unknown commands get
/// "ERROR"; malformed input never crashes the device.
class ModemDevice {
 public:
  ModemDevice(VirtualClock& clock, ByteChannel::Endpoint& port, SmsNetwork* network,
              std::string msisdn, std::vector<ScriptStep> script = {});

  /// Network-facing delivery hook.
  void deliver(const atproto::SmsMessage& msg);

  const std::vector<std::string>& unknown_commands() const { return unknown_; }

 private:
  void on_bytes();
  void handle_command(const std::string& cmd);
  void default_behavior(const std::string& cmd);
  void reply(const std::vector<std::string>& lines);

  VirtualClock& clock_;
  ByteChannel::Endpoint& port_;
  SmsNetwork* network_;
  std::string msisdn_;
  std::vector<ScriptStep> script_;
  std::size_t script_pos_ = 0;

  enum class Mode { Command, SmsBody };
  Mode mode_ = Mode::Command;
  std::string pending_to_;
  std::string inbuf_;
  std::map<int, atproto::SmsMessage> sim_slots_;
  int next_slot_ = 1;
  int next_cmgs_ref_ = 1;
  std::vector<std::string> unknown_;
};

/// Translate a script name ("healthy", "silent", "at_fail:N", "creg_poll:N",
/// "sim_fail:N") into script steps. Throws Error for unknown names.
std::vector<ScriptStep> modem_script_by_name(const std::string& name);

// ---------------------------------------------------------------------------
// User handset
// ---------------------------------------------------------------------------

/// The user's phone: sends scheduled texts into the network and keeps every
/// received message with its arrival time.
class PhoneSim {
 public:
  PhoneSim(VirtualClock& clock, SmsNetwork& network, std::string msisdn);

  void schedule_send(SimTime at, std::string to, std::string text);

  struct Received {
    SimTime at = 0;
    atproto::SmsMessage msg;
  };
  const std::vector<Received>& inbox() const { return inbox_; }

 private:
  VirtualClock& clock_;
  SmsNetwork& network_;
  std::string msisdn_;
  std::vector<Received> inbox_;
};

/// xxd-style rendering of a raw byte trace for conformance debugging.
std::string hex_dump(std::string_view bytes);

}  // namespace trackline::simnet
