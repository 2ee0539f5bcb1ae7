#pragma once

#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctsim/ledger_file.hpp"
#include "ctsim/sim.hpp"

namespace ctsim::scenario {

/// Invalid scenario configuration. field() is a JSON-pointer-like path to
/// the offending entry, e.g. "nodes[2].stake".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct OutputPaths {
  std::filesystem::path dir = "out";
  std::string ledger = "ledger.ctl";
  std::string events = "events.jsonl";
  std::string report = "report.json";
};

struct TimedPartition {
  Millis at_ms = 0;
  sim::PartitionChange change;
};

struct Scenario {
  sim::WorldConfig world;
  std::vector<federation::Action> actions;
  std::vector<TimedPartition> partitions;
  Millis duration_ms = 0;
  bool normalize_stakes = false;
  OutputPaths output;
  /// Trust snapshots every this many blocks in the report; 0 disables.
  std::uint64_t report_every_blocks = 0;
};

/// Throws ConfigError.
Scenario parse_scenario(const nlohmann::json& doc);
/// Reads and parses a file. Relative output directories resolve against
/// the file's directory. Throws ConfigError.
Scenario load_scenario(const std::filesystem::path& path);

struct RunOutcome {
  std::unique_ptr<sim::World> world;
  /// Node whose canonical chain is persisted: the best tip under fork choice.
  std::size_t source_node = 0;
  ledger::LedgerFile ledger;
};

/// Builds the world, schedules the partitions, and runs to duration_ms.
RunOutcome run_scenario(const Scenario& scenario);

}  // namespace ctsim::scenario
