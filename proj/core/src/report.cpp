#include "ctsim/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "ctsim/chain.hpp"
#include "ctsim/consensus.hpp"

namespace ctsim::report {
namespace {

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

VerifyResult failure(std::uint64_t height, Reason reason, std::string message,
                     std::optional<Digest> txid = std::nullopt) {
  VerifyResult r;
  r.ok = false;
  r.height = height;
  r.reason = std::string(reason_name(reason));
  r.message = std::move(message);
  r.txid = txid;
  return r;
}

}  // namespace

nlohmann::json TrustTable::to_json() const {
  nlohmann::json csp_rows = nlohmann::json::array();
  for (const auto& row : csps) {
    nlohmann::json j = {{"address", row.address.hex()},
                        {"sat", row.sat.str()},
                        {"auth", row.auth.str()},
                        {"trust", row.trust.str()},
                        {"consensus_trust", row.consensus_trust.str()},
                        {"observed", row.observed}};
    if (!row.name.empty()) j["name"] = row.name;
    csp_rows.push_back(std::move(j));
  }
  nlohmann::json user_rows = nlohmann::json::array();
  for (const auto& row : users) {
    user_rows.push_back({{"pseudonym", row.pseudonym.hex()}, {"cred", row.cred.str()}});
  }
  return {{"height", height}, {"csps", csp_rows}, {"users", user_rows}};
}

std::string TrustTable::to_text() const {
  std::ostringstream out;
  out << "height " << height << "\n";
  out << pad("csp", 44) << pad("sat", 16) << pad("auth", 16) << pad("trust", 16) << "consensus\n";
  for (const auto& row : csps) {
    std::string label = row.address.hex();
    if (!row.name.empty()) label = row.name + " " + label.substr(0, 12);
    out << pad(label, 44) << pad(row.sat.str(), 16) << pad(row.auth.str(), 16)
        << pad(row.trust.str(), 16) << row.consensus_trust.str() << "\n";
  }
  if (!users.empty()) {
    out << pad("user", 44) << "cred\n";
    for (const auto& row : users) out << pad(row.pseudonym.hex(), 44) << row.cred.str() << "\n";
  }
  return out.str();
}

TrustTable trust_table(const trust::TrustState& state, const consensus::ConsensusParams& params,
                       std::uint64_t height, const std::map<Address, std::string>& names) {
  TrustTable table;
  table.height = height;
  for (const auto& [address, weights] : state.declared()) {
    (void)weights;
    CspTrustRow row;
    row.address = address;
    if (auto it = names.find(address); it != names.end()) row.name = it->second;
    row.sat = state.sat_score(address);
    row.auth = state.auth_score(address);
    row.trust = state.trust(address);
    row.observed = state.has_observations(address);
    if (auto it = params.trust_overrides.find(address); it != params.trust_overrides.end()) {
      row.consensus_trust = it->second;
    } else {
      row.consensus_trust = row.observed ? row.trust : params.bootstrap_trust;
    }
    table.csps.push_back(row);
  }
  for (const Address& user : state.rated_users()) {
    table.users.push_back({user, state.cred_user(user)});
  }
  return table;
}

std::vector<TrustTable> trust_series(const ledger::LedgerFile& ledger, std::uint64_t every,
                                     const std::map<Address, std::string>& names) {
  std::vector<TrustTable> out;
  trust::TrustState state;
  const std::uint64_t epoch_blocks = ledger.params.epoch_blocks;
  for (std::size_t h = 0; h < ledger.blocks.size(); ++h) {
    trust::apply_block(state, ledger.blocks[h], epoch_blocks);
    const bool last = h + 1 == ledger.blocks.size();
    if (last || (every > 0 && h % every == 0 && h > 0)) {
      out.push_back(trust_table(state, ledger.params, h, names));
    }
  }
  return out;
}

VerifyResult verify_ledger(const ledger::LedgerFile& file, crypto::SignatureCache* cache) {
  if (file.blocks.empty()) return failure(0, Reason::BadGenesis, "ledger has no genesis block");
  try {
    file.params.validate();
  } catch (const std::invalid_argument& e) {
    return failure(0, Reason::BadGenesis, std::string("invalid parameters: ") + e.what());
  }
  const ledger::Block& genesis = file.blocks.front();
  if (Reason r = consensus::check_genesis(genesis, file.params); r != Reason::Ok) {
    return failure(0, r, "genesis block is invalid");
  }
  ledger::Chain chain;
  if (auto v = chain.apply_genesis(genesis, cache); !v.ok()) {
    return failure(0, v.reason, "genesis transaction rejected",
                   v.position ? std::optional(v.txid) : std::nullopt);
  }
  consensus::ReplicaState state = consensus::genesis_state(genesis, file.params);
  for (std::size_t h = 1; h < file.blocks.size(); ++h) {
    const ledger::Block& block = file.blocks[h];
    if (block.header.height != h) {
      return failure(h, Reason::BadLink, "block records height " +
                                             std::to_string(block.header.height));
    }
    if (Reason r = consensus::validate_block(block, file.params, state, cache); r != Reason::Ok) {
      return failure(h, r, "block header rejected");
    }
    if (auto v = chain.apply_block(block, cache); !v.ok()) {
      return failure(h, v.reason, "block body rejected",
                     v.position ? std::optional(v.txid) : std::nullopt);
    }
    state = consensus::next_state(state, block, file.params);
  }
  VerifyResult ok;
  ok.blocks = file.blocks.size();
  ok.height = file.blocks.size() - 1;
  return ok;
}

VerifyResult verify_ledger_bytes(std::span<const std::uint8_t> bytes,
                                 crypto::SignatureCache* cache) {
  ledger::LedgerFile file;
  try {
    file = ledger::decode_ledger(bytes);
  } catch (const ledger::LedgerFormatError& e) {
    return failure(e.height(), Reason::Malformed, e.what());
  }
  return verify_ledger(file, cache);
}

std::map<Address, std::string> node_names(const std::vector<nlohmann::json>& events) {
  std::map<Address, std::string> names;
  for (const auto& e : events) {
    if (e.value("kind", "") != "genesis" || !e.contains("nodes")) continue;
    for (const auto& n : e["nodes"]) {
      names[Address::from_hex(n.at("address").get<std::string>())] = n.at("name").get<std::string>();
    }
  }
  return names;
}

nlohmann::json build_run_report(const ledger::LedgerFile& ledger,
                                const std::vector<nlohmann::json>& events,
                                std::uint64_t every_blocks) {
  const auto names = node_names(events);
  nlohmann::json report;

  const auto series = trust_series(ledger, every_blocks, names);
  report["trust"] = series.empty() ? nlohmann::json(nullptr) : series.back().to_json();
  if (every_blocks > 0) {
    nlohmann::json snaps = nlohmann::json::array();
    for (const auto& t : series) snaps.push_back(t.to_json());
    report["trust_series"] = snaps;
  }

  // Block intervals along the persisted chain, genesis excluded.
  std::vector<double> gaps;
  std::map<std::string, std::uint64_t> generators;
  for (std::size_t h = 1; h < ledger.blocks.size(); ++h) {
    const auto& header = ledger.blocks[h].header;
    if (h >= 2) {
      gaps.push_back(static_cast<double>(header.timestamp - ledger.blocks[h - 1].header.timestamp));
    }
    const Address gen = crypto::address_of(header.generator_pub);
    auto it = names.find(gen);
    ++generators[it != names.end() ? it->second : gen.hex()];
  }
  double mean = 0;
  double var = 0;
  for (double g : gaps) mean += g;
  if (!gaps.empty()) mean /= static_cast<double>(gaps.size());
  for (double g : gaps) var += (g - mean) * (g - mean);
  if (!gaps.empty()) var /= static_cast<double>(gaps.size());
  report["blocks"] = {{"height", ledger.blocks.empty() ? 0 : ledger.blocks.size() - 1},
                      {"interval_mean_ms", mean},
                      {"interval_stddev_ms", std::sqrt(var)},
                      {"intervals", gaps.size()},
                      {"generators", generators}};

  std::uint64_t switches = 0;
  std::map<std::uint64_t, nlohmann::json> last_state;
  std::map<std::string, std::uint64_t> tx_rejections;
  std::map<std::string, std::uint64_t> block_rejections;
  for (const auto& e : events) {
    const std::string kind = e.value("kind", "");
    if (kind == "fork_switch") {
      ++switches;
    } else if (kind == "request") {
      last_state[e.at("id").get<std::uint64_t>()] = e;
    } else if (kind == "tx_rejected") {
      ++tx_rejections[e.value("reason", "")];
    } else if (kind == "block_rejected") {
      ++block_rejections[e.value("reason", "")];
    }
  }
  std::uint64_t granted = 0;
  std::uint64_t pending = 0;
  std::map<std::string, std::uint64_t> denied;
  for (const auto& [id, e] : last_state) {
    const std::string state = e.value("state", "");
    if (state == "granted") {
      ++granted;
    } else if (state == "denied") {
      ++denied[e.value("reason", "")];
    } else {
      ++pending;
    }
  }
  report["fork_switches"] = switches;
  report["requests"] = {{"total", last_state.size()},
                        {"granted", granted},
                        {"denied", denied},
                        {"pending", pending}};
  report["rejections"] = {{"tx", tx_rejections}, {"block", block_rejections}};
  return report;
}

}  // namespace ctsim::report
