#include <iostream>

#include <CLI11.hpp>

#include "ctsim_tools/commands.hpp"

int main(int argc, char** argv) {
  using namespace ctsim::tools;
  CLI::App app{"ctsim: trust-aware federation ledger simulator"};
  app.require_subcommand(1);

  RunOptions run;
  std::string out_dir;
  std::string log_level;
  std::uint64_t seed = 0;
  auto* run_cmd = app.add_subcommand("run", "Run a scenario and write its artifacts");
  run_cmd->add_option("config", run.config, "Scenario file (JSON)")->required();
  auto* out_opt = run_cmd->add_option("--out-dir", out_dir, "Output directory");
  auto* level_opt = run_cmd->add_option("--log-level", log_level, "debug, info or warn");
  auto* seed_opt = run_cmd->add_option("--seed-override", seed, "Replace the config seed");

  TrustReportOptions report;
  auto* report_cmd = app.add_subcommand("trust-report", "Replay a ledger and print trust scores");
  report_cmd->add_option("ledger", report.ledger, "Ledger file")->required();
  report_cmd->add_flag("--json", report.json, "JSON output");
  report_cmd->add_option("--every", report.every, "Also report every N blocks");

  std::string verify_path;
  auto* verify_cmd = app.add_subcommand("verify", "Re-validate every block of a ledger");
  verify_cmd->add_option("ledger", verify_path, "Ledger file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (run_cmd->parsed()) {
    if (*out_opt) run.out_dir = out_dir;
    if (*level_opt) run.log_level = log_level;
    if (*seed_opt) run.seed_override = seed;
    return cmd_run(run, std::cout, std::cerr);
  }
  if (report_cmd->parsed()) return cmd_trust_report(report, std::cout, std::cerr);
  return cmd_verify(verify_path, std::cout, std::cerr);
}
