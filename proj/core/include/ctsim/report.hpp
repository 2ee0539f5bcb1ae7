#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctsim/ledger_file.hpp"
#include "ctsim/trust.hpp"

namespace ctsim::report {

using crypto::Address;
using crypto::Digest;

struct CspTrustRow {
  Address address;
  std::string name;  // empty when unknown
  Fixed sat;
  Fixed auth;
  Fixed trust;
  /// The value consensus uses: override, bootstrap, or trust.
  Fixed consensus_trust;
  bool observed = false;
};

struct UserCredRow {
  Address pseudonym;
  Fixed cred;
};

struct TrustTable {
  std::uint64_t height = 0;
  std::vector<CspTrustRow> csps;
  std::vector<UserCredRow> users;

  nlohmann::json to_json() const;
  /// Fixed-width text rendering for terminals.
  std::string to_text() const;
};

TrustTable trust_table(const trust::TrustState& state, const consensus::ConsensusParams& params,
                       std::uint64_t height, const std::map<Address, std::string>& names = {});

/// Replays the ledger and tabulates the final trust state, or one table
/// every `every` blocks (plus the last) when every > 0.
std::vector<TrustTable> trust_series(const ledger::LedgerFile& ledger, std::uint64_t every = 0,
                                     const std::map<Address, std::string>& names = {});

struct VerifyResult {
  bool ok = true;
  std::uint64_t blocks = 0;
  std::uint64_t height = 0;
  std::optional<Digest> txid;
  std::string reason;
  std::string message;
};

/// Re-validates every block against the state replayed so far: links,
/// roots, timestamps, prf, eligibility, signatures, and every transaction.
VerifyResult verify_ledger(const ledger::LedgerFile& ledger,
                           crypto::SignatureCache* cache = nullptr);
/// Same, from raw file bytes; structural failures report the record index.
VerifyResult verify_ledger_bytes(std::span<const std::uint8_t> bytes,
                                 crypto::SignatureCache* cache = nullptr);

/// CSP names by address, from the genesis event of a run log.
std::map<Address, std::string> node_names(const std::vector<nlohmann::json>& events);

/// The run summary, computed only from the persisted ledger and event log
/// so that it can be regenerated after the fact.
nlohmann::json build_run_report(const ledger::LedgerFile& ledger,
                                const std::vector<nlohmann::json>& events,
                                std::uint64_t every_blocks = 0);

}  // namespace ctsim::report
