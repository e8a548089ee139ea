#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "trackline/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"trackline: simulated GPS+GSM vehicle tracking testbed"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir, track_path, style = "ascii", verb, table_path;
  double at_s = 5.0;
  bool trace = false;

  auto* run = app.add_subcommand("run", "run a scenario and write its artifacts");
  run->add_option("--scenario", scenario_path, "scenario file")->required();
  run->add_option("--out", out_dir, "output directory")->required();
  run->add_flag("--trace", trace, "also dump channel hex traces");

  auto* phone = app.add_subcommand("phone", "act as the user's phone: send one query");
  phone->add_option("--scenario", scenario_path, "scenario file")->required();
  phone->add_option("--verb", verb, "SPEED or LOC")->required();
  phone->add_option("--at", at_s, "send time, seconds from scenario start");

  auto* report = app.add_subcommand("report", "tracking-error report for a recorded track");
  report->add_option("--track", track_path, "track file")->required();
  report->add_option("--scenario", scenario_path, "scenario file (truth route)")->required();
  report->add_option("--table", table_path, "write the per-sample table here instead of stdout");

  auto* render = app.add_subcommand("render", "render a track as an ASCII grid or plot data");
  render->add_option("--track", track_path, "track file")->required();
  render->add_option("--style", style, "ascii | plot");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    // Bad flags are a validation error under the 0/1/2 exit contract.
    return e.get_exit_code() == 0 ? 0 : trackline::cli::kExitValidation;
  }

  if (run->parsed())
    return trackline::cli::cmd_run(scenario_path, out_dir, trace, std::cout, std::cerr);
  if (phone->parsed())
    return trackline::cli::cmd_phone(scenario_path, verb, at_s, std::cout, std::cerr);
  if (report->parsed())
    return trackline::cli::cmd_report(track_path, scenario_path, table_path, std::cout,
                                      std::cerr);
  if (render->parsed())
    return trackline::cli::cmd_render(track_path, style, std::cout, std::cerr);
  return trackline::cli::kExitValidation;
}
