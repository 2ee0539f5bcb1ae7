#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include "ctsim/crypto.hpp"

namespace ctsim::tools {

inline constexpr int kExitOk = 0;
inline constexpr int kExitVerifyFailed = 1;
inline constexpr int kExitUsage = 2;

struct RunOptions {
  std::filesystem::path config;
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::string> log_level;
  std::optional<std::uint64_t> seed_override;
};

/// Runs a scenario and writes the ledger, event log and report.
int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err);

struct TrustReportOptions {
  std::filesystem::path ledger;
  bool json = false;
  std::uint64_t every = 0;
};

int cmd_trust_report(const TrustReportOptions& options, std::ostream& out, std::ostream& err);

/// Exit 0 iff every block and transaction re-validates. A shared signature
/// cache may be passed to speed up repeated checks of similar ledgers.
int cmd_verify(const std::filesystem::path& ledger, std::ostream& out, std::ostream& err,
               crypto::SignatureCache* cache = nullptr);

}  // namespace ctsim::tools
