#include "trackline/simnet.hpp"

#include <cmath>
#include <cstdio>

namespace trackline::simnet {

using atproto::SmsMessage;

// ---------------------------------------------------------------------------
// VirtualClock
// ---------------------------------------------------------------------------

void VirtualClock::schedule(SimTime at, std::function<void()> fn) {
  if (at < now_) at = now_;
  queue_.emplace(std::make_pair(at, next_seq_++), std::move(fn));
}

int VirtualClock::advance_until(SimTime t) {
  if (t < now_) throw PreconditionError("virtual clock cannot run backwards");
  int fired = 0;
  while (!queue_.empty()) {
    auto it = queue_.begin();
    if (it->first.first > t) break;
    now_ = it->first.first;
    auto fn = std::move(it->second);
    queue_.erase(it);
    fn();
    ++fired;
  }
  now_ = t;
  return fired;
}

std::optional<SimTime> VirtualClock::next_event_time() const {
  if (queue_.empty()) return std::nullopt;
  return queue_.begin()->first.first;
}

// ---------------------------------------------------------------------------
// ByteChannel
// ---------------------------------------------------------------------------

ByteChannel::ByteChannel(VirtualClock& clock, int bits_per_second, std::string name)
    : clock_(clock), rate_(bits_per_second), name_(std::move(name)) {
  if (rate_ <= 0) throw Error("channel rate must be positive");
  a_.channel_ = this;
  b_.channel_ = this;
  a_.peer_ = &b_;
  b_.peer_ = &a_;
}

void ByteChannel::Endpoint::write(std::string_view bytes) {
  if (!channel_->open_)
    throw ChannelClosed("write on closed channel '" + channel_->name_ + "'");
  VirtualClock& clock = channel_->clock_;
  SimTime now = clock.now();
  // Pacing restarts whenever the line has gone idle; while busy, delivery
  // times accumulate in exact bit counts so throughput never exceeds the rate.
  if (last_delivery_ <= now) {
    pace_epoch_ = now;
    bits_since_epoch_ = 0;
  }
  const auto rate = static_cast<std::uint64_t>(channel_->rate_);
  ByteChannel* ch = channel_;
  Endpoint* dst = peer_;
  for (char c : bytes) {
    bits_since_epoch_ += 10;  // 8N1: start + 8 data + stop
    SimTime at = pace_epoch_ +
                 static_cast<SimTime>((bits_since_epoch_ * 1'000'000ull + rate - 1) / rate);
    last_delivery_ = at;
    clock.schedule(at, [ch, dst, c] {
      if (!ch->open_) return;  // bytes in flight are lost on close
      dst->rx_ += c;
      dst->rx_trace_ += c;
      if (dst->on_data_) dst->on_data_();
    });
  }
}

std::string ByteChannel::Endpoint::read_available() {
  std::string out;
  out.swap(rx_);
  return out;
}

bool ByteChannel::Endpoint::wait_readable(SimDuration timeout) {
  VirtualClock& clock = channel_->clock_;
  SimTime deadline = clock.now() + timeout;
  while (rx_.empty()) {
    if (!channel_->open_) return false;
    auto next = clock.next_event_time();
    if (!next || *next > deadline) {
      clock.advance_until(deadline);
      return !rx_.empty();
    }
    clock.advance_until(*next);
  }
  return true;
}

void ByteChannel::Endpoint::sleep_until(SimTime t) {
  VirtualClock& clock = channel_->clock_;
  if (t > clock.now()) clock.advance_until(t);
}

SimTime ByteChannel::Endpoint::now() const { return channel_->clock_.now(); }

bool ByteChannel::Endpoint::is_open() const { return channel_->open_; }

// ---------------------------------------------------------------------------
// Noise
// ---------------------------------------------------------------------------

double GaussianSource::uniform() {
  return static_cast<double>(rng_() >> 11) * 0x1.0p-53;
}

std::pair<double, double> GaussianSource::gaussian_pair() {
  double u1 = 1.0 - uniform();  // (0, 1]
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * 3.14159265358979323846 * u2;
  return {r * std::cos(theta), r * std::sin(theta)};
}

// ---------------------------------------------------------------------------
// GpsDevice
// ---------------------------------------------------------------------------

GpsDevice::GpsDevice(VirtualClock& clock, ByteEndpoint& out, GpsDeviceConfig config)
    : clock_(clock), out_(out), config_(std::move(config)), noise_rng_(config_.noise.seed) {
  geodesy::validate_route(config_.route);
  if (config_.noise.sigma_m < 0 || !std::isfinite(config_.noise.sigma_m))
    throw Error("noise sigma must be finite and non-negative");
  if (config_.noise.dropout_prob < 0 || config_.noise.dropout_prob > 1)
    throw Error("dropout probability must be within [0, 1]");
}

void GpsDevice::start() {
  clock_.schedule(config_.first_tick, [this] { tick(config_.first_tick); });
}

void GpsDevice::tick(SimTime t) {
  if (!out_.is_open()) return;  // line torn down; the receiver goes quiet
  for (const auto& line : tick_lines(t)) out_.write(line);
  ++ticks_emitted_;
  SimTime next = t + kSecond;
  if (next <= config_.last_tick)
    clock_.schedule(next, [this, next] { tick(next); });
}

std::vector<std::string> GpsDevice::tick_lines(SimTime t) {
  nmea::GpsFix fix;
  fix.time = t;

  bool in_span = config_.route.covers(t);
  bool dropped = false;
  if (in_span) dropped = noise_rng_.uniform() < config_.noise.dropout_prob;

  if (in_span && !dropped) {
    geodesy::GeoPoint p = route_position_at(config_.route, t);
    if (config_.noise.sigma_m > 0.0) {
      double per_axis = config_.noise.sigma_m / std::sqrt(2.0);
      auto [g_east, g_north] = noise_rng_.gaussian_pair();
      double north_m = g_north * per_axis;
      double east_m = g_east * per_axis;
      p.lat_deg += north_m / geodesy::kEarthRadiusM * geodesy::kRadToDeg;
      p.lon_deg += east_m /
                   (geodesy::kEarthRadiusM * std::cos(p.lat_deg * geodesy::kDegToRad)) *
                   geodesy::kRadToDeg;
    }
    fix.point = p;
    fix.quality = nmea::FixQuality::Gps;
    fix.num_sats = config_.num_sats;
    // Speed and course report the true motion; noise perturbs position only.
    fix.speed_knots = geodesy::route_speed_kmh_at(config_.route, t) / geodesy::kKmhPerKnot;
    fix.course_deg = geodesy::route_course_deg_at(config_.route, t);
  }
  return {nmea::encode_gga(fix), nmea::encode_rmc(fix)};
}

// ---------------------------------------------------------------------------
// SmsNetwork
// ---------------------------------------------------------------------------

void SmsNetwork::attach(const std::string& msisdn, Sink sink) {
  if (!atproto::is_valid_msisdn(msisdn)) throw Error("invalid MSISDN: '" + msisdn + "'");
  if (!sinks_.emplace(msisdn, std::move(sink)).second)
    throw Error("MSISDN already attached: " + msisdn);
}

void SmsNetwork::send(const SmsMessage& msg) {
  auto it = sinks_.find(msg.to_msisdn);
  bool deliverable = it != sinks_.end();
  transcript_.push_back({msg.sent_at, msg.from_msisdn, msg.to_msisdn, msg.text, deliverable});
  if (!deliverable)
    throw UndeliverableError("no subscriber with MSISDN " + msg.to_msisdn);
  Sink& sink = it->second;
  SmsMessage copy = msg;
  clock_.schedule(clock_.now() + latency_, [&sink, copy] { sink(copy); });
}

// ---------------------------------------------------------------------------
// ModemDevice
// ---------------------------------------------------------------------------

namespace {

bool step_matches(const ScriptStep& step, const std::string& cmd) {
  return step.expect == "*" || step.expect == cmd;
}

std::string scts_text(SimTime t) {
  CivilTime c = civil_from_time(t);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%02d/%02d/%02d,%02d:%02d:%02d+00", c.year % 100,
                c.month, c.day, c.hour, c.minute, c.second);
  return buf;
}

std::optional<int> parse_index(std::string_view tail) {
  if (tail.empty() || tail.size() > 6) return std::nullopt;
  int v = 0;
  for (char c : tail) {
    if (c < '0' || c > '9') return std::nullopt;
    v = v * 10 + (c - '0');
  }
  return v;
}

}  // namespace

ModemDevice::ModemDevice(VirtualClock& clock, ByteChannel::Endpoint& port,
                         SmsNetwork* network, std::string msisdn,
                         std::vector<ScriptStep> script)
    : clock_(clock),
      port_(port),
      network_(network),
      msisdn_(std::move(msisdn)),
      script_(std::move(script)) {
  port_.set_on_data([this] { on_bytes(); });
  if (network_)
    network_->attach(msisdn_, [this](const SmsMessage& m) { deliver(m); });
}

void ModemDevice::on_bytes() {
  inbuf_ += port_.read_available();
  while (true) {
    if (mode_ == Mode::Command) {
      std::size_t cr = inbuf_.find('\r');
      if (cr == std::string::npos) break;
      std::string cmd = inbuf_.substr(0, cr);
      inbuf_.erase(0, cr + 1);
      while (!cmd.empty() && (cmd.front() == '\n' || cmd.front() == ' ')) cmd.erase(0, 1);
      if (cmd.empty()) continue;
      handle_command(cmd);
    } else {
      std::size_t sub = inbuf_.find('\x1A');
      if (sub == std::string::npos) break;
      std::string body = inbuf_.substr(0, sub);
      inbuf_.erase(0, sub + 1);
      mode_ = Mode::Command;
      try {
        if (!network_) throw UndeliverableError("modem has no network attachment");
        SmsMessage msg = SmsMessage::make(msisdn_, pending_to_, body, clock_.now());
        network_->send(msg);
        reply({"+CMGS: " + std::to_string(next_cmgs_ref_++), "OK"});
      } catch (const Error&) {
        reply({"ERROR"});
      }
    }
  }
}

void ModemDevice::handle_command(const std::string& cmd) {
  if (script_pos_ < script_.size() && step_matches(script_[script_pos_], cmd)) {
    const ScriptStep& step = script_[script_pos_++];
    if (!step.silent) reply(step.reply_lines);
    return;
  }
  default_behavior(cmd);
}

void ModemDevice::default_behavior(const std::string& cmd) {
  if (cmd == "AT") {
    reply({"OK"});
    return;
  }
  if (cmd == "AT+CMGF=1") {
    // This dialect reports SIM readiness in answer to the text-mode select.
    reply({"+CPIN: READY", "OK"});
    return;
  }
  if (cmd == "AT+CREG?") {
    reply({"+CREG: 0,1", "OK"});
    return;
  }
  if (cmd.rfind("AT+CMGS=\"", 0) == 0 && cmd.size() > 10 && cmd.back() == '"') {
    std::string to = cmd.substr(9, cmd.size() - 10);
    if (!atproto::is_valid_msisdn(to)) {
      reply({"ERROR"});
      return;
    }
    pending_to_ = to;
    mode_ = Mode::SmsBody;
    port_.write("\r\n> ");
    return;
  }
  if (cmd.rfind("AT+CMGR=", 0) == 0) {
    auto idx = parse_index(std::string_view(cmd).substr(8));
    auto it = idx ? sim_slots_.find(*idx) : sim_slots_.end();
    if (it == sim_slots_.end()) {
      reply({"ERROR"});
      return;
    }
    const SmsMessage& m = it->second;
    reply({"+CMGR: \"REC UNREAD\",\"+" + m.from_msisdn + "\",,\"" + scts_text(m.sent_at) +
               "\"",
           m.text, "OK"});
    return;
  }
  if (cmd.rfind("AT+CMGD=", 0) == 0) {
    auto idx = parse_index(std::string_view(cmd).substr(8));
    if (idx && sim_slots_.erase(*idx) > 0) {
      reply({"OK"});
      return;
    }
    reply({"ERROR"});
    return;
  }
  unknown_.push_back(cmd);
  reply({"ERROR"});
}

void ModemDevice::reply(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) {
    out += l;
    out += "\r\n";
  }
  if (!out.empty() && port_.is_open()) port_.write(out);
}

void ModemDevice::deliver(const SmsMessage& msg) {
  int slot = next_slot_++;
  sim_slots_.emplace(slot, msg);
  if (port_.is_open()) port_.write("+CMTI: \"SM\"," + std::to_string(slot) + "\r\n");
}

std::vector<ScriptStep> modem_script_by_name(const std::string& name) {
  auto counted = [&](std::string_view prefix) -> std::optional<int> {
    if (name.rfind(prefix, 0) != 0) return std::nullopt;
    auto idx = parse_index(std::string_view(name).substr(prefix.size()));
    if (!idx) throw Error("bad count in modem script name: '" + name + "'");
    return idx;
  };

  if (name == "healthy") return {};
  if (name == "silent") {
    // Effectively dead hardware: never answers anything.
    return std::vector<ScriptStep>(2000, ScriptStep{"*", {}, true});
  }
  if (auto n = counted("at_fail:"))
    return std::vector<ScriptStep>(static_cast<std::size_t>(*n),
                                   ScriptStep{"AT", {}, true});
  if (auto n = counted("creg_poll:"))
    return std::vector<ScriptStep>(static_cast<std::size_t>(*n),
                                   ScriptStep{"AT+CREG?", {"+CREG: 0,2", "OK"}, false});
  if (auto n = counted("sim_fail:"))
    return std::vector<ScriptStep>(static_cast<std::size_t>(*n),
                                   ScriptStep{"AT+CMGF=1", {"ERROR"}, false});
  throw Error("unknown modem script: '" + name + "'");
}

// ---------------------------------------------------------------------------
// PhoneSim
// ---------------------------------------------------------------------------

PhoneSim::PhoneSim(VirtualClock& clock, SmsNetwork& network, std::string msisdn)
    : clock_(clock), network_(network), msisdn_(std::move(msisdn)) {
  network_.attach(msisdn_, [this](const SmsMessage& m) {
    inbox_.push_back({clock_.now(), m});
  });
}

void PhoneSim::schedule_send(SimTime at, std::string to, std::string text) {
  clock_.schedule(at, [this, to = std::move(to), text = std::move(text)] {
    try {
      network_.send(atproto::SmsMessage::make(msisdn_, to, text, clock_.now()));
    } catch (const UndeliverableError&) {
      // the transcript records the failed attempt
    }
  });
}

// ---------------------------------------------------------------------------
// Trace dump
// ---------------------------------------------------------------------------

std::string hex_dump(std::string_view bytes) {
  std::string out;
  char buf[8];
  for (std::size_t off = 0; off < bytes.size(); off += 16) {
    std::snprintf(buf, sizeof buf, "%06zx", off);
    out += buf;
    out += "  ";
    std::string ascii;
    for (std::size_t i = 0; i < 16; ++i) {
      if (off + i < bytes.size()) {
        auto b = static_cast<unsigned char>(bytes[off + i]);
        std::snprintf(buf, sizeof buf, "%02x ", b);
        out += buf;
        ascii += (b >= 0x20 && b <= 0x7E) ? static_cast<char>(b) : '.';
      } else {
        out += "   ";
      }
      if (i == 7) out += ' ';
    }
    out += " |" + ascii + "|\n";
  }
  return out;
}

}  // namespace trackline::simnet
