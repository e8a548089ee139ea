#include "trackline/atproto.hpp"

#include <algorithm>

namespace trackline::atproto {

namespace {

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(),
                                   [](char c) { return c >= '0' && c <= '9'; });
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) {
    if (!out.empty()) out += "\\n";
    out += l;
  }
  return out;
}

// "+CMTI: "SM",<index>" -> index, or -1 when the line is not a CMTI.
int parse_cmti_index(const std::string& line) {
  if (line.rfind("+CMTI:", 0) != 0) return -1;
  std::size_t comma = line.rfind(',');
  if (comma == std::string::npos) return -1;
  std::string_view idx(line);
  idx.remove_prefix(comma + 1);
  while (!idx.empty() && idx.front() == ' ') idx.remove_prefix(1);
  if (!all_digits(idx)) return -1;
  int v = 0;
  for (char c : idx) v = v * 10 + (c - '0');
  return v;
}

}  // namespace

AtCommand::AtCommand(std::string t) : text(std::move(t)) {
  if (text.rfind("AT", 0) != 0)
    throw Error("AT command must start with \"AT\": '" + text + "'");
  if (text.find('\r') != std::string::npos || text.find('\n') != std::string::npos)
    throw Error("AT command must not contain CR/LF");
}

bool is_valid_msisdn(std::string_view s) {
  return s.size() >= 7 && s.size() <= 15 && all_digits(s);
}

SmsMessage SmsMessage::make(std::string from, std::string to, std::string text,
                            SimTime sent_at) {
  if (!is_valid_msisdn(from)) throw Error("invalid sender MSISDN: '" + from + "'");
  if (!is_valid_msisdn(to)) throw Error("invalid recipient MSISDN: '" + to + "'");
  if (text.size() > 160)
    throw Error("SMS text exceeds 160 characters (" + std::to_string(text.size()) + ")");
  for (char c : text) {
    auto b = static_cast<unsigned char>(c);
    if (b < 0x20 || b > 0x7E)
      throw Error("SMS text contains a byte outside the basic ASCII subset");
  }
  return SmsMessage{std::move(from), std::move(to), std::move(text), sent_at};
}

std::string squash_spaces(std::string_view line) {
  std::string out;
  out.reserve(line.size());
  for (char c : line)
    if (c != ' ') out += c;
  return out;
}

ModemSession::ModemSession(ByteEndpoint& channel, std::string own_msisdn,
                           SendPolicy policy)
    : channel_(channel), own_msisdn_(std::move(own_msisdn)), policy_(policy) {
  if (!is_valid_msisdn(own_msisdn_))
    throw Error("invalid session MSISDN: '" + own_msisdn_ + "'");
}

void ModemSession::drain() {
  rx_ += channel_.read_available();
  // The "> " prompt is unframed; its trailing space may trail in one byte
  // behind the '>' we already consumed.
  if (eat_prompt_space_ && !rx_.empty()) {
    if (rx_.front() == ' ') rx_.erase(0, 1);
    eat_prompt_space_ = false;
  }
}

std::optional<std::string> ModemSession::take_line() {
  while (true) {
    std::size_t nl = rx_.find('\n');
    if (nl == std::string::npos) return std::nullopt;
    std::string line = rx_.substr(0, nl);
    rx_.erase(0, nl + 1);
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (line.empty()) continue;
    int cmti = parse_cmti_index(line);
    if (cmti >= 0) {
      // Unsolicited delivery notice; never part of a command response.
      cmti_queue_.push_back(cmti);
      continue;
    }
    return line;
  }
}

AtResponse ModemSession::send_at(const AtCommand& cmd, SimDuration timeout) {
  if (!channel_.is_open()) throw ChannelClosed("modem channel closed");
  channel_.write(cmd.text + "\r");
  SimTime deadline = channel_.now() + timeout;

  AtResponse resp;
  while (true) {
    drain();
    if (auto line = take_line()) {
      if (*line == "OK") {
        resp.final = AtFinal::Ok;
        return resp;
      }
      if (*line == "ERROR") {
        resp.final = AtFinal::Error;
        return resp;
      }
      resp.info_lines.push_back(std::move(*line));
      continue;
    }
    SimTime now = channel_.now();
    if (now >= deadline) return resp;  // final stays Timeout
    if (!channel_.wait_readable(deadline - now) && channel_.now() >= deadline)
      return resp;
  }
}

void ModemSession::sleep_until(SimTime t) { channel_.sleep_until(t); }

ModemState ModemSession::init_modem() {
  state_ = ModemState{};

  // Stage 1: liveness. A silent modem restarts the exchange once per timeout;
  // persistent silence is reported as damaged hardware.
  while (true) {
    SimTime start = channel_.now();
    AtResponse r = send_at(AtCommand("AT"), policy_.timeout);
    if (r.final == AtFinal::Ok) {
      state_.stage = ModemStage::Alive;
      break;
    }
    if (state_.stage_retries[0] == policy_.max_restarts)
      throw HardwareFault("modem not responding after " +
                          std::to_string(policy_.max_restarts) +
                          " restarts; hardware presumed damaged");
    ++state_.stage_retries[0];
    sleep_until(start + policy_.timeout);
  }

  // Stage 2: SIM check. This modem dialect answers "AT+CMGF=1" with the SIM
  // readiness banner; anything else restarts the stage after the timeout.
  while (true) {
    SimTime start = channel_.now();
    AtResponse r = send_at(AtCommand("AT+CMGF=1"), policy_.timeout);
    bool ready = r.final == AtFinal::Ok &&
                 std::any_of(r.info_lines.begin(), r.info_lines.end(),
                             [](const std::string& l) {
                               return squash_spaces(l) == "+CPIN:READY";
                             });
    if (ready) {
      state_.stage = ModemStage::SimReady;
      break;
    }
    if (state_.stage_retries[1] == policy_.max_restarts)
      throw InitStageFailure(InitStageFailure::Stage::SimCheck,
                             "SIM never became ready after " +
                                 std::to_string(policy_.max_restarts) + " restarts");
    ++state_.stage_retries[1];
    sleep_until(start + policy_.timeout);
  }

  // Stage 3: registration. Keeps polling until the network accepts; only an
  // explicit policy cap turns the wait into an error.
  while (true) {
    SimTime start = channel_.now();
    AtResponse r = send_at(AtCommand("AT+CREG?"), policy_.timeout);
    bool registered = r.final == AtFinal::Ok &&
                      std::any_of(r.info_lines.begin(), r.info_lines.end(),
                                  [](const std::string& l) {
                                    return squash_spaces(l) == "+CREG:0,1";
                                  });
    if (registered) {
      state_.stage = ModemStage::Registered;
      break;
    }
    ++state_.stage_retries[2];
    if (policy_.registration_poll_limit > 0 &&
        state_.stage_retries[2] >= policy_.registration_poll_limit)
      throw InitStageFailure(InitStageFailure::Stage::Registration,
                             "network registration poll limit reached");
    sleep_until(start + policy_.timeout);
  }
  return state_;
}

bool ModemSession::wait_prompt(SimTime deadline) {
  while (true) {
    drain();
    std::size_t gt = rx_.find('>');
    std::size_t nl = rx_.find('\n');
    if (gt != std::string::npos && (nl == std::string::npos || gt < nl)) {
      std::size_t cut = gt + 1;
      if (cut < rx_.size()) {
        if (rx_[cut] == ' ') ++cut;
      } else {
        eat_prompt_space_ = true;
      }
      rx_.erase(0, cut);
      return true;
    }
    if (auto line = take_line()) {
      if (*line == "ERROR")
        throw SmsSendFailure(SmsSendFailure::Kind::Rejected,
                             "modem rejected SMS submit before prompt");
      continue;  // stray info line while waiting; ignore
    }
    SimTime now = channel_.now();
    if (now >= deadline) return false;
    if (!channel_.wait_readable(deadline - now) && channel_.now() >= deadline)
      return false;
  }
}

int ModemSession::send_sms(const std::string& to_msisdn, std::string_view text) {
  if (state_.stage != ModemStage::Registered)
    throw PreconditionError("send_sms requires a registered modem session");
  // Validate everything before a single byte reaches the wire.
  SmsMessage::make(own_msisdn_, to_msisdn, std::string(text), channel_.now());

  channel_.write("AT+CMGS=\"" + to_msisdn + "\"\r");
  if (!wait_prompt(channel_.now() + policy_.timeout))
    throw SmsSendFailure(SmsSendFailure::Kind::PromptTimeout,
                         "no '>' prompt from modem");
  channel_.write(std::string(text) + '\x1A');

  SimTime deadline = channel_.now() + policy_.timeout;
  AtResponse resp;
  while (true) {
    drain();
    if (auto line = take_line()) {
      if (*line == "OK") {
        resp.final = AtFinal::Ok;
        break;
      }
      if (*line == "ERROR")
        throw SmsSendFailure(SmsSendFailure::Kind::Rejected, "modem rejected SMS body");
      resp.info_lines.push_back(std::move(*line));
      continue;
    }
    SimTime now = channel_.now();
    if (now >= deadline ||
        (!channel_.wait_readable(deadline - now) && channel_.now() >= deadline))
      throw SmsSendFailure(SmsSendFailure::Kind::ResponseTimeout,
                           "no submit confirmation from modem");
  }

  for (const auto& line : resp.info_lines) {
    if (line.rfind("+CMGS:", 0) == 0) {
      std::string_view tail(line);
      tail.remove_prefix(6);
      while (!tail.empty() && tail.front() == ' ') tail.remove_prefix(1);
      if (all_digits(tail)) {
        int ref = 0;
        for (char c : tail) ref = ref * 10 + (c - '0');
        return ref;
      }
    }
  }
  throw SmsParseError("missing +CMGS reference in submit response",
                      join_lines(resp.info_lines));
}

std::vector<SmsMessage> ModemSession::read_sms() {
  drain();
  while (take_line()) {
    // Discard stray non-URC lines between commands; CMTIs queue as a side
    // effect of take_line.
  }
  std::vector<SmsMessage> out;
  while (!cmti_queue_.empty()) {
    int index = cmti_queue_.front();
    cmti_queue_.pop_front();
    AtResponse r = send_at(AtCommand("AT+CMGR=" + std::to_string(index)));
    if (r.final != AtFinal::Ok)
      throw SmsParseError("CMGR read of slot " + std::to_string(index) + " failed",
                          join_lines(r.info_lines));
    out.push_back(parse_cmgr(r.info_lines, own_msisdn_));
    send_at(AtCommand("AT+CMGD=" + std::to_string(index)));  // delete; exactly-once
  }
  return out;
}

SmsMessage parse_cmgr(const std::vector<std::string>& info_lines,
                      const std::string& own_msisdn) {
  if (info_lines.size() != 2 || info_lines[0].rfind("+CMGR:", 0) != 0)
    throw SmsParseError("malformed CMGR response", join_lines(info_lines));
  const std::string& header = info_lines[0];

  std::vector<std::string> quoted;
  std::size_t pos = 0;
  while (true) {
    std::size_t open = header.find('"', pos);
    if (open == std::string::npos) break;
    std::size_t close = header.find('"', open + 1);
    if (close == std::string::npos)
      throw SmsParseError("unterminated quote in CMGR header", header);
    quoted.push_back(header.substr(open + 1, close - open - 1));
    pos = close + 1;
  }
  if (quoted.size() < 3)
    throw SmsParseError("CMGR header missing status/address/timestamp", header);

  std::string from = quoted[1];
  if (!from.empty() && from.front() == '+') from.erase(0, 1);

  // Service-center timestamp: "yy/MM/dd,hh:mm:ss±zz" with the zone in
  // quarter-hour steps.
  const std::string& scts = quoted[2];
  auto bad = [&] { throw SmsParseError("bad CMGR timestamp", scts); };
  if (scts.size() != 20 || scts[2] != '/' || scts[5] != '/' || scts[8] != ',' ||
      scts[11] != ':' || scts[14] != ':' || (scts[17] != '+' && scts[17] != '-'))
    bad();
  auto two = [&](std::size_t i) {
    if (scts[i] < '0' || scts[i] > '9' || scts[i + 1] < '0' || scts[i + 1] > '9') bad();
    return (scts[i] - '0') * 10 + (scts[i + 1] - '0');
  };
  CivilTime c;
  c.year = 2000 + two(0);
  c.month = two(3);
  c.day = two(6);
  c.hour = two(9);
  c.minute = two(12);
  c.second = two(15);
  int zone_quarters = two(18);
  SimTime sent_at = time_from_civil(c);
  SimDuration zone = static_cast<SimDuration>(zone_quarters) * 15 * 60 * kSecond;
  sent_at += (scts[17] == '+') ? -zone : zone;

  return SmsMessage::make(from, own_msisdn, info_lines[1], sent_at);
}

}  // namespace trackline::atproto
