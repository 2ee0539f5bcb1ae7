#include "ctsim_tools/commands.hpp"

#include <fstream>

#include "ctsim/report.hpp"
#include "ctsim/scenario.hpp"

namespace ctsim::tools {
namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

}  // namespace

int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err) {
  scenario::Scenario sc;
  try {
    sc = scenario::load_scenario(options.config);
    if (options.out_dir) sc.output.dir = *options.out_dir;
    if (options.seed_override) sc.world.seed = *options.seed_override;
    if (options.log_level) {
      auto level = parse_log_level(*options.log_level);
      if (!level) throw scenario::ConfigError("--log-level", "expected debug, info or warn");
      sc.world.log_level = *level;
    }
  } catch (const scenario::ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  }

  scenario::RunOutcome run;
  try {
    run = scenario::run_scenario(sc);
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  }

  const std::string events = run.world->log().text();
  const auto report = report::build_run_report(run.ledger, parse_event_lines(events),
                                               sc.report_every_blocks);
  try {
    std::filesystem::create_directories(sc.output.dir);
    const auto ledger_path = sc.output.dir / sc.output.ledger;
    ledger::write_ledger_file(ledger_path, run.ledger.params, run.ledger.blocks);
    write_text(sc.output.dir / sc.output.events, events);
    write_text(sc.output.dir / sc.output.report, report.dump(2) + "\n");
    out << "height " << run.ledger.blocks.size() - 1 << ", "
        << report["requests"]["granted"].get<std::uint64_t>() << " granted, "
        << report["fork_switches"].get<std::uint64_t>() << " fork switches\n";
    out << "ledger " << ledger_path.string() << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}

int cmd_trust_report(const TrustReportOptions& options, std::ostream& out, std::ostream& err) {
  Bytes bytes;
  try {
    bytes = ledger::read_file_bytes(options.ledger);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  crypto::SignatureCache cache;
  const auto verdict = report::verify_ledger_bytes(bytes, &cache);
  if (!verdict.ok) {
    err << "integrity error at height " << verdict.height << ": " << verdict.reason << " ("
        << verdict.message << ")\n";
    return kExitVerifyFailed;
  }
  const auto file = ledger::decode_ledger(bytes);
  const auto series = report::trust_series(file, options.every);
  if (options.json) {
    nlohmann::json doc;
    if (options.every > 0) {
      doc = nlohmann::json::array();
      for (const auto& t : series) doc.push_back(t.to_json());
    } else {
      doc = series.back().to_json();
    }
    out << doc.dump(2) << "\n";
  } else {
    for (std::size_t i = 0; i < series.size(); ++i) {
      if (i > 0) out << "\n";
      out << series[i].to_text();
    }
  }
  return kExitOk;
}

int cmd_verify(const std::filesystem::path& ledger, std::ostream& out, std::ostream& err,
               crypto::SignatureCache* cache) {
  Bytes bytes;
  try {
    bytes = ledger::read_file_bytes(ledger);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  const auto verdict = report::verify_ledger_bytes(bytes, cache);
  if (!verdict.ok) {
    err << "FAIL height " << verdict.height;
    if (verdict.txid) err << " txid " << verdict.txid->hex();
    err << " reason " << verdict.reason << ": " << verdict.message << "\n";
    return kExitVerifyFailed;
  }
  out << "OK " << verdict.blocks << " blocks\n";
  return kExitOk;
}

}  // namespace ctsim::tools
