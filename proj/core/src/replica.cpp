#include "ctsim/replica.hpp"

#include <algorithm>
#include <deque>
#include <stdexcept>

namespace ctsim::consensus {
namespace {
constexpr std::size_t kMaxOrphans = 4096;

void append_txs(std::vector<ledger::Transaction>& out, const ledger::Block& block) {
  out.insert(out.end(), block.txs.begin(), block.txs.end());
}
}  // namespace

Replica::Replica(const ledger::Block& genesis, ConsensusParams params,
                 crypto::SignatureCache* cache)
    : params_(std::move(params)), cache_(cache) {
  if (Reason r = check_genesis(genesis, params_); r != Reason::Ok) {
    throw std::invalid_argument("invalid genesis block: " + std::string(reason_name(r)));
  }
  if (auto v = chain_.apply_genesis(genesis, cache_); !v.ok()) {
    throw std::invalid_argument("invalid genesis transaction: " + std::string(reason_name(v.reason)));
  }
  Entry e;
  e.block = genesis;
  e.height = 0;
  e.status = Status::Valid;
  e.state = std::make_shared<const ReplicaState>(genesis_state(genesis, params_));
  const Digest h = genesis.hash();
  entries_.emplace(h, std::move(e));
  canonical_.push_back(h);
}

const ReplicaState& Replica::tip_state() const { return *entries_.at(canonical_.back()).state; }

TipMetrics Replica::tip_metrics() const {
  const ReplicaState& s = tip_state();
  return {s.height, s.cumulative_trust, canonical_.back()};
}

bool Replica::is_canonical(const Digest& hash) const {
  auto it = entries_.find(hash);
  return it != entries_.end() && it->second.height < canonical_.size() &&
         canonical_[it->second.height] == hash;
}

const ledger::Block* Replica::find_block(const Digest& hash) const {
  auto it = entries_.find(hash);
  return it == entries_.end() ? nullptr : &it->second.block;
}

void Replica::park_orphan(const ledger::Block& block) {
  if (orphan_count_ >= kMaxOrphans) return;
  auto range = orphans_.equal_range(block.header.prev_block);
  const Digest h = block.hash();
  for (auto it = range.first; it != range.second; ++it) {
    if (it->second.hash() == h) return;
  }
  orphans_.emplace(block.header.prev_block, block);
  ++orphan_count_;
}

AddResult Replica::add_block(const ledger::Block& block) {
  AddResult result = add_one(block);
  // Connect parked descendants breadth-first.
  std::deque<Digest> ready;
  if (knows(block.hash())) ready.push_back(block.hash());
  while (!ready.empty()) {
    const Digest parent = ready.front();
    ready.pop_front();
    auto range = orphans_.equal_range(parent);
    std::vector<ledger::Block> children;
    for (auto it = range.first; it != range.second; ++it) children.push_back(it->second);
    orphans_.erase(range.first, range.second);
    orphan_count_ -= children.size();
    for (const auto& child : children) {
      AddResult sub = add_one(child);
      if (sub.status == AddStatus::Rejected) continue;
      const Digest ch = child.hash();
      result.connected.push_back(ch);
      result.reverted.insert(result.reverted.end(), sub.reverted.begin(), sub.reverted.end());
      result.included.insert(result.included.end(), sub.included.begin(), sub.included.end());
      result.switches += sub.switches;
      result.reorg_depth = std::max(result.reorg_depth, sub.reorg_depth);
      if (sub.status == AddStatus::Reorganized ||
          (sub.status == AddStatus::Extended && result.status != AddStatus::Reorganized)) {
        result.status = sub.status;
      }
      ready.push_back(ch);
    }
  }
  result.new_tip = tip_hash();
  return result;
}

AddResult Replica::add_one(const ledger::Block& block) {
  AddResult result;
  result.old_tip = tip_hash();
  result.new_tip = tip_hash();
  const Digest h = block.hash();

  auto rejected = [&](Reason r, std::optional<Digest> tx = std::nullopt) {
    result.status = AddStatus::Rejected;
    result.reason = r;
    result.failed_block = h;
    result.failed_tx = tx;
    return result;
  };

  if (auto it = entries_.find(h); it != entries_.end()) {
    if (it->second.status == Status::Invalid) return rejected(it->second.reason);
    result.status = AddStatus::Duplicate;
    return result;
  }
  if (block.header.height == 0) return rejected(Reason::BadLink);

  // Checks that do not depend on the parent; failures here are not cached
  // because the header hash does not commit to transaction signatures.
  if (ledger::compute_tx_root(block.txs) != block.header.tx_root) {
    return rejected(Reason::BadTxRoot);
  }
  if (!crypto::verify_with(cache_, block.header.generator_pub, h, block.header.sig)) {
    return rejected(Reason::BadSignature);
  }
  for (const auto& tx : block.txs) {
    if (Reason r = ledger::check_tx_context_free(tx, cache_); r != Reason::Ok) {
      return rejected(r, tx.txid);
    }
  }

  auto parent = entries_.find(block.header.prev_block);
  if (parent == entries_.end()) {
    park_orphan(block);
    result.status = AddStatus::Orphan;
    return result;
  }

  Entry e;
  e.block = block;
  e.parent = block.header.prev_block;
  e.height = block.header.height;
  if (parent->second.status == Status::Invalid || block.header.height != parent->second.height + 1) {
    e.status = Status::Invalid;
    e.reason = Reason::BadLink;
    entries_.emplace(h, std::move(e));
    return rejected(Reason::BadLink);
  }
  entries_.emplace(h, std::move(e));
  return try_adopt(h);
}

AddResult Replica::try_adopt(const Digest& hash) {
  AddResult result;
  result.old_tip = tip_hash();
  result.new_tip = tip_hash();
  const Entry& target = entries_.at(hash);
  if (target.height < height()) {
    result.status = AddStatus::SideBranch;
    return result;
  }

  // Branch from the fork point (exclusive) up to the new block.
  std::vector<Digest> path;
  Digest cursor = hash;
  while (!is_canonical(cursor)) {
    path.push_back(cursor);
    cursor = entries_.at(cursor).parent;
  }
  std::reverse(path.begin(), path.end());
  const std::uint64_t fork_height = entries_.at(cursor).height;
  const TipMetrics old_metrics = tip_metrics();

  std::vector<ledger::Block> popped;
  while (chain_.height() > fork_height) popped.push_back(chain_.pop_block());
  std::reverse(popped.begin(), popped.end());
  const std::vector<Digest> old_canonical(canonical_.begin() + static_cast<std::ptrdiff_t>(fork_height) + 1,
                                          canonical_.end());
  canonical_.resize(fork_height + 1);

  std::size_t applied = 0;
  Reason failure = Reason::Ok;
  Digest failed_block;
  std::optional<Digest> failed_tx;
  for (const Digest& step : path) {
    Entry& entry = entries_.at(step);
    const Entry& parent = entries_.at(entry.parent);
    if (entry.status == Status::Invalid) {
      failure = entry.reason;
    } else if (entry.status == Status::Unvalidated) {
      Reason r = validate_block(entry.block, params_, *parent.state, cache_);
      if (r != Reason::Ok) {
        failure = r;
      }
    }
    if (failure == Reason::Ok) {
      ledger::TxVerdict v = chain_.apply_block(entry.block, cache_);
      if (!v.ok()) {
        failure = v.reason;
        failed_tx = v.txid;
      }
    }
    if (failure != Reason::Ok) {
      failed_block = step;
      entry.status = Status::Invalid;
      entry.reason = failure;
      break;
    }
    if (entry.status == Status::Unvalidated) {
      entry.state = std::make_shared<const ReplicaState>(
          next_state(*parent.state, entry.block, params_));
      entry.status = Status::Valid;
    }
    canonical_.push_back(step);
    ++applied;
  }
  if (failure != Reason::Ok) {
    for (std::size_t i = applied + 1; i < path.size(); ++i) {
      Entry& rest = entries_.at(path[i]);
      rest.status = Status::Invalid;
      rest.reason = Reason::BadLink;
    }
  }

  const bool adopt = applied > 0 && better_tip(tip_metrics(), old_metrics);
  if (!adopt) {
    for (std::size_t i = 0; i < applied; ++i) chain_.pop_block();
    canonical_.resize(fork_height + 1);
    for (const auto& block : popped) {
      if (!chain_.apply_block(block, cache_).ok()) {
        throw std::logic_error("previously valid block failed to re-apply");
      }
    }
    canonical_.insert(canonical_.end(), old_canonical.begin(), old_canonical.end());
    if (failure != Reason::Ok) {
      result.status = AddStatus::Rejected;
      result.reason = failure;
      result.failed_block = failed_block;
      result.failed_tx = failed_tx;
    } else {
      result.status = AddStatus::SideBranch;
    }
    return result;
  }

  for (const auto& block : popped) append_txs(result.reverted, block);
  for (std::size_t i = 0; i < applied; ++i) append_txs(result.included, entries_.at(path[i]).block);
  result.new_tip = tip_hash();
  result.reorg_depth = popped.size();
  if (popped.empty()) {
    result.status = AddStatus::Extended;
  } else {
    result.status = AddStatus::Reorganized;
    result.switches = 1;
  }
  if (failure != Reason::Ok && failed_block == hash) {
    // A valid prefix of the branch won, but the block itself was bad.
    result.reason = failure;
    result.failed_block = failed_block;
    result.failed_tx = failed_tx;
  }
  return result;
}

std::vector<Digest> Replica::locator() const {
  std::vector<Digest> out;
  std::uint64_t step = 1;
  std::uint64_t h = height();
  while (true) {
    out.push_back(canonical_[h]);
    if (h == 0) break;
    if (out.size() >= 10) step *= 2;
    h = h > step ? h - step : 0;
  }
  return out;
}

std::vector<ledger::Block> Replica::blocks_after(const std::vector<Digest>& locator,
                                                 std::size_t max_blocks) const {
  std::uint64_t start = 1;
  for (const Digest& d : locator) {
    if (is_canonical(d)) {
      start = entries_.at(d).height + 1;
      break;
    }
  }
  std::vector<ledger::Block> out;
  for (std::uint64_t h = start; h <= height() && out.size() < max_blocks; ++h) {
    out.push_back(chain_.at(h));
  }
  return out;
}

}  // namespace ctsim::consensus
