#pragma once

#include <array>
#include <deque>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "trackline/io.hpp"
#include "trackline/time.hpp"

namespace trackline::atproto {

// ---------------------------------------------------------------------------
// Wire units
// ---------------------------------------------------------------------------

/// One command line, CR-terminated on the wire. Must start with "AT" and
/// contain no CR/LF; the constructor enforces both.
struct AtCommand {
  explicit AtCommand(std::string text);
  std::string text;
};

enum class AtFinal { Ok, Error, Timeout };

struct AtResponse {
  std::vector<std::string> info_lines;  // possibly partial when final == Timeout
  AtFinal final = AtFinal::Timeout;
};

/// An addressed text message, at most 160 characters of printable ASCII.
struct SmsMessage {
  std::string from_msisdn;
  std::string to_msisdn;
  std::string text;
  SimTime sent_at = 0;

  /// Validating constructor; throws Error on bad MSISDNs, length, or charset.
  static SmsMessage make(std::string from, std::string to, std::string text,
                         SimTime sent_at);
};

bool is_valid_msisdn(std::string_view s);  // digits only, 7 to 15 of them

// ---------------------------------------------------------------------------
// Session state machine
// ---------------------------------------------------------------------------

enum class ModemStage { Unverified, Alive, SimReady, Registered };

/// Initialization progress plus how many times each stage had to be restarted
/// during the most recent init run (stage order: liveness, SIM, registration).
struct ModemState {
  ModemStage stage = ModemStage::Unverified;
  std::array<int, 3> stage_retries{0, 0, 0};
};

struct SendPolicy {
  SimDuration timeout = 2 * kSecond;
  int max_restarts = 5;
  /// Cap on registration polls; 0 polls forever, matching a modem that is
  /// simply waiting for network coverage.
  int registration_poll_limit = 0;
};

/// The modem stopped answering through max_restarts liveness retries.
class HardwareFault : public Error {
 public:
  using Error::Error;
};

/// A non-liveness init stage kept failing past the policy cap.
class InitStageFailure : public Error {
 public:
  enum class Stage { SimCheck, Registration };
  InitStageFailure(Stage stage, const std::string& msg) : Error(msg), stage(stage) {}
  Stage stage;
};

/// An SMS submit did not complete.
class SmsSendFailure : public Error {
 public:
  enum class Kind { PromptTimeout, Rejected, ResponseTimeout };
  SmsSendFailure(Kind kind, const std::string& msg) : Error(msg), kind(kind) {}
  Kind kind;
};

/// A +CMGR response could not be parsed; raw bytes attached for diagnosis.
class SmsParseError : public Error {
 public:
  SmsParseError(const std::string& msg, std::string raw)
      : Error(msg + " (raw: '" + raw + "')"), raw_bytes(std::move(raw)) {}
  std::string raw_bytes;
};

/// Half-duplex command/response driver for one modem on one byte channel.
/// A session owns its channel exclusively and is single-threaded.
class ModemSession {
 public:
  ModemSession(ByteEndpoint& channel, std::string own_msisdn,
               SendPolicy policy = SendPolicy{});

  /// Write the command and collect response lines until a final "OK"/"ERROR"
  /// token or the timeout. Timeout is reported in the response, not thrown;
  /// only a closed channel throws.
  AtResponse send_at(const AtCommand& cmd, SimDuration timeout);
  AtResponse send_at(const AtCommand& cmd) { return send_at(cmd, policy_.timeout); }

  /// Run the three-stage init sequence: liveness ("AT"), SIM check
  /// ("AT+CMGF=1", expecting the "+CPIN: READY" banner this modem dialect
  /// returns), then registration polling ("AT+CREG?") until "+CREG: 0,1".
  /// Failed stages restart after the timeout expires. Throws HardwareFault
  /// when liveness fails max_restarts consecutive times, InitStageFailure when
  /// a later stage exceeds its cap. Idempotent: safe to re-run when Registered.
  ModemState init_modem();

  /// Submit one text-mode SMS; returns the network message reference.
  /// Requires Registered; validates the message before touching the wire.
  int send_sms(const std::string& to_msisdn, std::string_view text);

  /// Collect every message announced by "+CMTI:" since the last call, reading
  /// and deleting each SIM slot so a message is returned exactly once.
  std::vector<SmsMessage> read_sms();

  const ModemState& state() const { return state_; }
  const SendPolicy& policy() const { return policy_; }
  bool channel_open() const { return channel_.is_open(); }

 private:
  void drain();
  std::optional<std::string> take_line();
  bool wait_prompt(SimTime deadline);
  void sleep_until(SimTime t);

  ByteEndpoint& channel_;
  std::string own_msisdn_;
  SendPolicy policy_;
  ModemState state_;
  std::string rx_;
  std::deque<int> cmti_queue_;  // announced, not yet fetched SIM slots
  bool eat_prompt_space_ = false;
};

/// Parse a text-mode "+CMGR:" header + body into a message addressed to
/// own_msisdn. Throws SmsParseError.
SmsMessage parse_cmgr(const std::vector<std::string>& info_lines,
                      const std::string& own_msisdn);

/// Comparison helper for response matching: strips every space so the spaced
/// ("+CREG: 0, 1") and compact ("+CREG: 0,1") renderings compare equal.
std::string squash_spaces(std::string_view line);

}  // namespace trackline::atproto
