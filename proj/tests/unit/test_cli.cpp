#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ctsim/event_log.hpp"
#include "ctsim/ledger_file.hpp"
#include "ctsim/report.hpp"
#include "ctsim_tools/commands.hpp"

namespace ctsim::tools {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("ctsim_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const json& doc, const std::string& name = "s.json") {
    const fs::path p = dir_ / name;
    std::ofstream(p) << doc.dump(2);
    return p;
  }

  static json config(std::uint64_t seed, Millis duration = 6000) {
    json doc = json::parse(R"({
      "nodes": [
        {"name": "a", "stake": "0.25"}, {"name": "b", "stake": "0.25"},
        {"name": "c", "stake": "0.25"}, {"name": "d", "stake": "0.25"}
      ],
      "actions": [
        {"at_ms": 100, "kind": "register_user", "user": "u", "home": "a", "profile": "p"},
        {"at_ms": 300, "kind": "request_access", "id": "r", "user": "u", "foreign": "c", "resource": "x"}
      ]
    })");
    doc["seed"] = seed;
    doc["duration_ms"] = duration;
    return doc;
  }

  int run(const fs::path& cfg, const fs::path& out) {
    RunOptions o;
    o.config = cfg;
    o.out_dir = out;
    std::ostringstream sout;
    std::ostringstream serr;
    return cmd_run(o, sout, serr);
  }

  fs::path dir_;
};

TEST_F(CliTest, RunWritesArtifactsAndIsReproducible) {
  const auto cfg = write_config(config(5));
  ASSERT_EQ(run(cfg, dir_ / "one"), kExitOk);
  ASSERT_EQ(run(cfg, dir_ / "two"), kExitOk);
  for (const char* f : {"ledger.ctl", "events.jsonl", "report.json"}) {
    ASSERT_TRUE(fs::exists(dir_ / "one" / f)) << f;
    EXPECT_EQ(ledger::read_file_bytes(dir_ / "one" / f), ledger::read_file_bytes(dir_ / "two" / f))
        << f;
  }
  RunOptions o;
  o.config = cfg;
  o.out_dir = dir_ / "three";
  o.seed_override = 6;
  std::ostringstream sink;
  ASSERT_EQ(cmd_run(o, sink, sink), kExitOk);
  EXPECT_NE(ledger::read_file_bytes(dir_ / "one" / "ledger.ctl"),
            ledger::read_file_bytes(dir_ / "three" / "ledger.ctl"));
}

TEST_F(CliTest, RunRejectsBadConfig) {
  json doc = config(5);
  doc["nodes"][0]["stake"] = "2";
  std::ostringstream out;
  std::ostringstream err;
  RunOptions o;
  o.config = write_config(doc);
  EXPECT_EQ(cmd_run(o, out, err), kExitUsage);
  EXPECT_NE(err.str().find("nodes"), std::string::npos);
  o.config = dir_ / "missing.json";
  EXPECT_EQ(cmd_run(o, out, err), kExitUsage);
  o.config = write_config(config(5));
  o.log_level = "chatty";
  EXPECT_EQ(cmd_run(o, out, err), kExitUsage);
}

TEST_F(CliTest, ReportCanBeRegeneratedFromArtifacts) {
  json doc = config(8, 12'000);
  doc["report_every_blocks"] = 10;
  ASSERT_EQ(run(write_config(doc), dir_ / "out"), kExitOk);
  const auto ledger = ledger::read_ledger_file(dir_ / "out" / "ledger.ctl");
  std::ifstream events_in(dir_ / "out" / "events.jsonl");
  std::stringstream events;
  events << events_in.rdbuf();
  const json regenerated =
      report::build_run_report(ledger, ctsim::parse_event_lines(events.str()), 10);
  std::ifstream report_in(dir_ / "out" / "report.json");
  EXPECT_EQ(json::parse(report_in), regenerated);
  EXPECT_EQ(regenerated["requests"]["granted"], 1);
  EXPECT_FALSE(regenerated["trust_series"].empty());
}

TEST_F(CliTest, TrustReportOnFreshLedgerShowsDefaults) {
  ASSERT_EQ(run(write_config(config(9, 900)), dir_ / "out"), kExitOk);
  TrustReportOptions o;
  o.ledger = dir_ / "out" / "ledger.ctl";
  o.json = true;
  std::ostringstream out;
  std::ostringstream err;
  ASSERT_EQ(cmd_trust_report(o, out, err), kExitOk) << err.str();
  const json doc = json::parse(out.str());
  ASSERT_EQ(doc["csps"].size(), 4u);
  for (const auto& row : doc["csps"]) {
    EXPECT_EQ(row["trust"], "0.000000000000");
    EXPECT_EQ(row["consensus_trust"], "0.500000000000");
    EXPECT_EQ(row["observed"], false);
  }

  o.json = false;
  std::ostringstream text;
  EXPECT_EQ(cmd_trust_report(o, text, err), kExitOk);
  EXPECT_FALSE(text.str().empty());
}

TEST_F(CliTest, TrustReportRejectsDamagedLedgers) {
  ASSERT_EQ(run(write_config(config(10)), dir_ / "out"), kExitOk);
  Bytes bytes = ledger::read_file_bytes(dir_ / "out" / "ledger.ctl");
  bytes.resize(bytes.size() - 7);
  ledger::write_file_bytes(dir_ / "cut.ctl", bytes);
  TrustReportOptions o;
  o.ledger = dir_ / "cut.ctl";
  std::ostringstream out;
  std::ostringstream err;
  EXPECT_EQ(cmd_trust_report(o, out, err), kExitVerifyFailed);
  EXPECT_NE(err.str().find("integrity"), std::string::npos);
  o.ledger = dir_ / "nope.ctl";
  EXPECT_EQ(cmd_trust_report(o, out, err), kExitUsage);
}

TEST_F(CliTest, VerifyFlagsOutOfOrderTimestamps) {
  ASSERT_EQ(run(write_config(config(11)), dir_ / "out"), kExitOk);
  auto file = ledger::read_ledger_file(dir_ / "out" / "ledger.ctl");
  ASSERT_GT(file.blocks.size(), 5u);
  file.blocks[4].header.timestamp = file.blocks[3].header.timestamp - 1;
  ledger::write_ledger_file(dir_ / "bad.ctl", file.params, file.blocks);
  std::ostringstream out;
  std::ostringstream err;
  EXPECT_EQ(cmd_verify(dir_ / "bad.ctl", out, err), kExitVerifyFailed);
  EXPECT_NE(err.str().find("height 4"), std::string::npos) << err.str();
  EXPECT_NE(err.str().find("TIMESTAMP"), std::string::npos) << err.str();
}

TEST_F(CliTest, VerifyAcceptsHonestLedgers) {
  crypto::SignatureCache cache;
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    const auto out_dir = dir_ / std::to_string(seed);
    ASSERT_EQ(run(write_config(config(seed, 4000)), out_dir), kExitOk);
    std::ostringstream out;
    std::ostringstream err;
    EXPECT_EQ(cmd_verify(out_dir / "ledger.ctl", out, err, &cache), kExitOk) << err.str();
    EXPECT_EQ(out.str().rfind("OK ", 0), 0u);
  }
}

}  // namespace
}  // namespace ctsim::tools
