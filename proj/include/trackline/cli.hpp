#pragma once

#include <iosfwd>
#include <memory>
#include <string>

#include "trackline/scenario.hpp"

namespace trackline::cli {

// Stable exit-code contract: 0 success, 1 runtime fault, 2 validation error.
constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitValidation = 2;

/// A fully wired simulation: clock, channels, devices, network, phone, and
/// the tracking server, all built from one scenario.
class SimWorld {
 public:
  explicit SimWorld(const Scenario& scenario);

  /// Run the server loop to the scenario end; returns the run summary.
  tracker::RunSummary run();

  simnet::VirtualClock& clock() { return clock_; }
  simnet::SmsNetwork& network() { return network_; }
  simnet::PhoneSim& phone() { return *phone_; }
  tracker::Server& server() { return *server_; }
  simnet::ByteChannel& gps_link() { return gps_link_; }
  simnet::ByteChannel& gsm_link() { return gsm_link_; }
  const Scenario& scenario() const { return scenario_; }
  SimTime end_time() const { return scenario_.start_time + scenario_.duration; }

  const std::string& gps_wire_trace() const;   // bytes the server read from GPS
  const std::string& gsm_tx_trace() const;     // bytes the modem received
  const std::string& gsm_rx_trace() const;     // bytes the server received

 private:
  Scenario scenario_;
  simnet::VirtualClock clock_;
  simnet::SmsNetwork network_;
  simnet::ByteChannel gps_link_;
  simnet::ByteChannel gsm_link_;
  std::unique_ptr<simnet::GpsDevice> gps_device_;
  std::unique_ptr<simnet::ModemDevice> modem_device_;
  std::unique_ptr<simnet::PhoneSim> phone_;
  std::unique_ptr<atproto::ModemSession> session_;
  std::unique_ptr<tracker::Server> server_;
};

/// Render the SMS transcript / run summary in their on-disk formats.
std::string format_transcript(const simnet::SmsNetwork& network);
std::string format_summary(const Scenario& scenario, const tracker::RunSummary& summary);

int cmd_run(const std::string& scenario_path, const std::string& out_dir, bool trace,
            std::ostream& out, std::ostream& err);

int cmd_phone(const std::string& scenario_path, const std::string& verb, double at_s,
              std::ostream& out, std::ostream& err);

int cmd_report(const std::string& track_path, const std::string& scenario_path,
               const std::string& table_path, std::ostream& out, std::ostream& err);

int cmd_render(const std::string& track_path, const std::string& style,
               std::ostream& out, std::ostream& err);

}  // namespace trackline::cli
