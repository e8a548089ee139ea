#include "trackline/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace trackline::cli {

namespace fs = std::filesystem;

SimWorld::SimWorld(const Scenario& scenario)
    : scenario_(scenario),
      clock_(scenario.start_time),
      network_(clock_, scenario.sms_latency),
      gps_link_(clock_, scenario.gps_baud, "gps"),
      gsm_link_(clock_, scenario.gsm_baud, "gsm") {
  simnet::GpsDeviceConfig gps_cfg;
  gps_cfg.route = scenario.route;
  gps_cfg.noise = scenario.noise;
  gps_cfg.num_sats = scenario.gps_sats;
  gps_cfg.first_tick = scenario.start_time;
  gps_cfg.last_tick = scenario.start_time + scenario.duration;
  gps_device_ = std::make_unique<simnet::GpsDevice>(clock_, gps_link_.a(), gps_cfg);
  gps_device_->start();

  modem_device_ = std::make_unique<simnet::ModemDevice>(
      clock_, gsm_link_.b(), &network_, scenario.server.msisdn,
      simnet::modem_script_by_name(scenario.modem_script));

  phone_ = std::make_unique<simnet::PhoneSim>(clock_, network_, scenario.phone_msisdn);
  for (const auto& action : scenario.schedule)
    phone_->schedule_send(action.at, scenario.server.msisdn,
                          action.verb == tracker::CommandVerb::Speed ? "SPEED" : "LOC");

  atproto::SendPolicy policy;
  policy.timeout = scenario.at_timeout;
  policy.max_restarts = scenario.at_max_restarts;
  session_ = std::make_unique<atproto::ModemSession>(gsm_link_.a(),
                                                     scenario.server.msisdn, policy);
  server_ = std::make_unique<tracker::Server>(scenario.server, clock_, gps_link_.b(),
                                              *session_);
}

tracker::RunSummary SimWorld::run() { return server_->run(end_time()); }

const std::string& SimWorld::gps_wire_trace() const { return gps_link_.b().rx_trace(); }
const std::string& SimWorld::gsm_tx_trace() const { return gsm_link_.b().rx_trace(); }
const std::string& SimWorld::gsm_rx_trace() const { return gsm_link_.a().rx_trace(); }

std::string format_transcript(const simnet::SmsNetwork& network) {
  std::string out = "# trackline sms transcript v1\n";
  for (const auto& e : network.transcript()) {
    out += format_iso8601(e.sent_at) + " " + e.from + " -> " + e.to + " \"" + e.text +
           "\"";
    if (!e.deliverable) out += " UNDELIVERABLE";
    out += "\n";
  }
  return out;
}

std::string format_summary(const Scenario& scenario, const tracker::RunSummary& s) {
  std::ostringstream out;
  out << "# trackline run summary v1\n";
  out << "scenario " << scenario.name << "\n";
  out << "seed " << scenario.seed << "\n";
  out << "duration_s " << seconds_from_duration(scenario.duration) << "\n";
  out << "mode "
      << (scenario.server.mode == tracker::MonitorMode::ContinuousPath ? "continuous"
                                                                       : "ondemand")
      << "\n";
  out << "fixes_recorded " << s.fixes_recorded << "\n";
  out << "fixes_dropped " << s.fixes_dropped << "\n";
  out << "queries_served " << s.queries_served << "\n";
  out << "queries_rejected " << s.queries_rejected << "\n";
  out << "status " << (s.error.empty() ? "clean" : "error: " + s.error) << "\n";
  return out.str();
}

namespace {

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + path.string());
  f << content;
}

}  // namespace

int cmd_run(const std::string& scenario_path, const std::string& out_dir, bool trace,
            std::ostream& out, std::ostream& err) {
  Scenario scenario;
  try {
    scenario = load_scenario(scenario_path);
  } catch (const Error& e) {
    err << "scenario error: " << e.what() << "\n";
    return kExitValidation;
  }

  try {
    SimWorld world(scenario);
    tracker::RunSummary summary = world.run();

    fs::create_directories(out_dir);
    std::ostringstream track_text;
    tracker::export_track(world.server().track(), track_text);
    write_file(fs::path(out_dir) / "track.txt", track_text.str());
    write_file(fs::path(out_dir) / "sms.txt", format_transcript(world.network()));
    write_file(fs::path(out_dir) / "summary.txt", format_summary(scenario, summary));
    if (trace) {
      write_file(fs::path(out_dir) / "trace_gps_rx.hex",
                 simnet::hex_dump(world.gps_wire_trace()));
      write_file(fs::path(out_dir) / "trace_gsm_tx.hex",
                 simnet::hex_dump(world.gsm_tx_trace()));
      write_file(fs::path(out_dir) / "trace_gsm_rx.hex",
                 simnet::hex_dump(world.gsm_rx_trace()));
    }

    out << format_summary(scenario, summary);
    if (!summary.error.empty()) {
      err << "run ended with error: " << summary.error << "\n";
      return kExitRuntime;
    }
    return kExitOk;
  } catch (const Error& e) {
    err << "runtime fault: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int cmd_phone(const std::string& scenario_path, const std::string& verb, double at_s,
              std::ostream& out, std::ostream& err) {
  if (verb != "SPEED" && verb != "LOC") {
    err << "verb must be SPEED or LOC, got '" << verb << "'\n";
    return kExitValidation;
  }
  Scenario scenario;
  try {
    scenario = load_scenario(scenario_path);
  } catch (const Error& e) {
    err << "scenario error: " << e.what() << "\n";
    return kExitValidation;
  }
  if (at_s < 0 || duration_from_seconds(at_s) > scenario.duration) {
    err << "--at " << at_s << " is outside the scenario duration\n";
    return kExitValidation;
  }

  // Acting as the user's handset: the scenario's own schedule is replaced by
  // the one query, so the printed reply unambiguously answers it.
  scenario.schedule.clear();

  try {
    SimWorld world(scenario);
    world.phone().schedule_send(scenario.start_time + duration_from_seconds(at_s),
                                scenario.server.msisdn, verb);
    world.run();
    for (const auto& received : world.phone().inbox()) {
      if (received.msg.from_msisdn == scenario.server.msisdn) {
        out << received.msg.text << "\n";
        return kExitOk;
      }
    }
    out << "NO REPLY\n";
    return kExitRuntime;
  } catch (const Error& e) {
    err << "runtime fault: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int cmd_report(const std::string& track_path, const std::string& scenario_path,
               const std::string& table_path, std::ostream& out, std::ostream& err) {
  Scenario scenario;
  tracker::Track track;
  try {
    scenario = load_scenario(scenario_path);
  } catch (const Error& e) {
    err << "scenario error: " << e.what() << "\n";
    return kExitValidation;
  }
  try {
    std::ifstream in(track_path, std::ios::binary);
    if (!in) throw Error("cannot open track file " + track_path);
    track = tracker::import_track(in);
  } catch (const Error& e) {
    err << "track error: " << track_path << ": " << e.what() << "\n";
    return kExitValidation;
  }

  geodesy::TrackErrorStats stats;
  try {
    stats = tracker::track_error(track, scenario.route);
  } catch (const Error& e) {
    err << "report error: " << e.what() << "\n";
    return kExitValidation;
  }

  auto points = tracker::valid_points(track);
  char buf[64];
  out << "samples " << points.size() << "\n";
  std::snprintf(buf, sizeof buf, "rmse_m %.3f\n", stats.rmse_m);
  out << buf;
  std::snprintf(buf, sizeof buf, "max_m %.3f\n", stats.max_m);
  out << buf;

  std::string table = "# t error_m\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::snprintf(buf, sizeof buf, " %.3f\n", stats.per_sample_m[i]);
    table += format_iso8601(points[i].t) + buf;
  }
  if (table_path.empty()) {
    out << table;
  } else {
    try {
      write_file(table_path, table);
    } catch (const Error& e) {
      err << e.what() << "\n";
      return kExitRuntime;
    }
  }
  return kExitOk;
}

int cmd_render(const std::string& track_path, const std::string& style,
               std::ostream& out, std::ostream& err) {
  tracker::RenderStyle render_style;
  if (style == "ascii")
    render_style = tracker::RenderStyle::AsciiGrid;
  else if (style == "plot")
    render_style = tracker::RenderStyle::PlotData;
  else {
    err << "style must be 'ascii' or 'plot', got '" << style << "'\n";
    return kExitValidation;
  }
  try {
    std::ifstream in(track_path, std::ios::binary);
    if (!in) throw Error("cannot open track file " + track_path);
    tracker::Track track = tracker::import_track(in);
    out << tracker::render_track(track, render_style);
    return kExitOk;
  } catch (const Error& e) {
    err << "track error: " << track_path << ": " << e.what() << "\n";
    return kExitValidation;
  }
}

}  // namespace trackline::cli
