#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "ctsim/crypto.hpp"
#include "ctsim/fixed.hpp"
#include "ctsim/ledger.hpp"
#include "ctsim/reason.hpp"
#include "ctsim/trust.hpp"

namespace ctsim::consensus {

using crypto::Address;
using crypto::Digest;
using crypto::PublicKey;

struct ConsensusParams {
  /// d. Zero in a scenario config means "calibrate at genesis"; a chain
  /// always records the resolved value.
  Fixed base_target;
  std::uint32_t prefix_bits = 64;
  Millis block_interval_ms = 300;
  Millis slot_ms = 100;
  /// time_csp is capped at this many block intervals.
  std::uint32_t time_cap = 64;
  std::uint32_t max_block_txs = 100;
  /// Blocks per trust epoch; 0 keeps a single epoch.
  std::uint64_t epoch_blocks = 0;
  /// Consensus trust of a CSP that nothing has been observed about yet.
  Fixed bootstrap_trust = Fixed::ratio(1, 2);
  /// Fixed consensus trust for selected CSPs, committed at genesis.
  std::map<Address, Fixed> trust_overrides;

  /// Canonical JSON with sorted keys.
  Bytes encode() const;
  /// Strict: the input must be exactly the canonical encoding.
  static ConsensusParams decode(std::span<const std::uint8_t> bytes);
  /// Throws std::invalid_argument naming the offending field.
  void validate(bool allow_uncalibrated = false) const;

  friend bool operator==(const ConsensusParams&, const ConsensusParams&) = default;
};

/// First k_bits of prf over 2^k_bits, floored to fixed point.
Fixed prefix_value(const Digest& prf, std::uint32_t k_bits);

/// Exact test Prefix(prf, k) / 2^k < target, without rounding the prefix.
bool prefix_below(const Digest& prf, std::uint32_t k_bits, Fixed target);

/// Elapsed time in block intervals, capped.
Fixed time_factor(const ConsensusParams& params, Millis elapsed_ms);

/// d * time * stake * trust, clamped to [0, 1).
Fixed csp_difficulty(const ConsensusParams& params, Fixed time_csp, Fixed stake_csp, Fixed t_csp);

struct CspConsensusState {
  /// Consensus account identifier; the address of the registering key.
  Address account_key;
  PublicKey pub;
  Fixed declared_stake;
  /// Normalized share of the total registered stake.
  Fixed stake;
  std::uint64_t last_generated_height = 0;
  /// Timestamp of the last block by this CSP, or of its registration.
  Millis last_generated_ms = 0;
  Digest prf_old;

  friend bool operator==(const CspConsensusState&, const CspConsensusState&) = default;
};

struct Eligibility {
  bool eligible = false;
  Digest prf;
  Fixed time_csp;
  Fixed d_csp;
};

/// prf = hash(pub || prf_old); eligible iff Prefix(prf, k) < d_csp.
Eligibility check_eligibility(const ConsensusParams& params, const CspConsensusState& state,
                              Fixed t_csp, const PublicKey& pub, Millis now);

/// Consensus view of one block: the per-CSP state and trust after applying it.
struct ReplicaState {
  Digest block_hash;
  Digest genesis_hash;
  std::uint64_t height = 0;
  Millis timestamp = 0;
  /// Sum of the generators' consensus trust along the fork.
  Fixed cumulative_trust;
  std::map<Address, CspConsensusState> csps;
  std::shared_ptr<const trust::TrustState> trust;
};

/// Override, else the bootstrap value until the CSP has been observed, else
/// its overall trust.
Fixed consensus_trust(const ConsensusParams& params, const ReplicaState& state,
                      const Address& csp);

/// Signs and fills prf/sig when eligible at the candidate's timestamp.
/// Returns the pair, or nothing (and leaves the header alone) otherwise.
std::optional<std::pair<Digest, crypto::Signature>> generate_block(
    ledger::Block& candidate, const ConsensusParams& params, const crypto::KeyPair& keys,
    const CspConsensusState& state, Fixed t_csp);

/// Header-level checks against the parent's consensus view. Transactions
/// are checked separately by the ledger.
Reason validate_block(const ledger::Block& block, const ConsensusParams& params,
                      const ReplicaState& parent, crypto::SignatureCache* cache = nullptr);

/// The genesis block: registrations only, prf commits to the parameters.
ledger::Block make_genesis(const ConsensusParams& params,
                           std::vector<ledger::Transaction> registrations);
Reason check_genesis(const ledger::Block& genesis, const ConsensusParams& params);

ReplicaState genesis_state(const ledger::Block& genesis, const ConsensusParams& params);
ReplicaState next_state(const ReplicaState& parent, const ledger::Block& block,
                        const ConsensusParams& params);

struct TipMetrics {
  std::uint64_t height = 0;
  Fixed cumulative_trust;
  Digest hash;
};

/// Strict fork-choice order: higher, then more trusted, then smaller digest.
bool better_tip(const TipMetrics& a, const TipMetrics& b);

/// Index of the winning tip; throws std::invalid_argument when empty.
std::size_t resolve(std::span<const TipMetrics> tips);

struct StakeTrust {
  Fixed stake;
  Fixed trust;
};

/// d = 1 / (2 * sum of stake * trust), clamped into (0, 1).
Fixed calibrate_base_target(std::span<const StakeTrust> csps);

}  // namespace ctsim::consensus
