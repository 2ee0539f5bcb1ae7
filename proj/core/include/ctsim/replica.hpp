#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "ctsim/chain.hpp"
#include "ctsim/consensus.hpp"

namespace ctsim::consensus {

enum class AddStatus {
  Extended,     // new block became the tip on top of the old tip
  Reorganized,  // the canonical chain switched forks
  SideBranch,   // stored, not (yet) competitive
  Duplicate,
  Orphan,       // parent unknown; parked until it arrives
  Rejected,
};

struct AddResult {
  AddStatus status = AddStatus::Duplicate;
  Reason reason = Reason::Ok;
  /// The block that failed validation (the added one or an ancestor).
  Digest failed_block;
  std::optional<Digest> failed_tx;
  Digest old_tip;
  Digest new_tip;
  std::uint64_t reorg_depth = 0;
  /// Transactions that left, and joined, the canonical chain.
  std::vector<ledger::Transaction> reverted;
  std::vector<ledger::Transaction> included;
  /// Parked descendants that were connected as a consequence.
  std::vector<Digest> connected;
  /// Reorganizations triggered by this call, connected orphans included.
  std::uint64_t switches = 0;
};

/// A node's block tree: every block it has seen, the canonical chain and
/// its ledger indices. Competing branches are validated lazily, when they
/// could overtake the current tip, by walking the ledger back to the fork
/// point and replaying the branch.
class Replica {
 public:
  Replica(const ledger::Block& genesis, ConsensusParams params,
          crypto::SignatureCache* cache = nullptr);

  AddResult add_block(const ledger::Block& block);

  const ledger::Chain& chain() const { return chain_; }
  const ConsensusParams& params() const { return params_; }
  const ReplicaState& tip_state() const;
  const Digest& tip_hash() const { return canonical_.back(); }
  std::uint64_t height() const { return canonical_.size() - 1; }
  TipMetrics tip_metrics() const;

  bool knows(const Digest& hash) const { return entries_.count(hash) != 0; }
  bool is_canonical(const Digest& hash) const;
  const ledger::Block* find_block(const Digest& hash) const;
  std::size_t orphan_count() const { return orphan_count_; }
  std::size_t stored_count() const { return entries_.size(); }

  /// Canonical hashes at exponentially spaced heights back to genesis.
  std::vector<Digest> locator() const;
  /// Canonical blocks after the first locator entry found here.
  std::vector<ledger::Block> blocks_after(const std::vector<Digest>& locator,
                                          std::size_t max_blocks) const;

 private:
  enum class Status { Unvalidated, Valid, Invalid };
  struct Entry {
    ledger::Block block;
    Digest parent;
    std::uint64_t height = 0;
    Status status = Status::Unvalidated;
    Reason reason = Reason::Ok;
    std::shared_ptr<const ReplicaState> state;
  };

  AddResult add_one(const ledger::Block& block);
  AddResult try_adopt(const Digest& hash);
  void park_orphan(const ledger::Block& block);

  ConsensusParams params_;
  crypto::SignatureCache* cache_;
  std::map<Digest, Entry> entries_;
  std::vector<Digest> canonical_;
  ledger::Chain chain_;
  std::multimap<Digest, ledger::Block> orphans_;
  std::size_t orphan_count_ = 0;
};

}  // namespace ctsim::consensus
