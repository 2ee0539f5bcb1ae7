#include "ctsim/sim.hpp"

#include <algorithm>
#include <stdexcept>

namespace ctsim::sim {
namespace {

nlohmann::json names_of(const World& world, const std::vector<std::vector<std::size_t>>& groups) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& g : groups) {
    nlohmann::json names = nlohmann::json::array();
    for (std::size_t id : g) names.push_back(world.node(id).name());
    out.push_back(names);
  }
  return out;
}

std::string_view kind_name(ledger::TxKind kind) {
  switch (kind) {
    case ledger::TxKind::Token:
      return "token";
    case ledger::TxKind::Feedback:
      return "feedback";
    case ledger::TxKind::Register:
      return "register";
  }
  return "unknown";
}

}  // namespace

std::string_view behavior_name(Behavior b) {
  switch (b) {
    case Behavior::Honest:
      return "honest";
    case Behavior::Tamperer:
      return "tamperer";
    case Behavior::DoubleIssuer:
      return "double_issuer";
    case Behavior::Smearer:
      return "smearer";
    case Behavior::Flatterer:
      return "flatterer";
  }
  return "honest";
}

std::optional<Behavior> parse_behavior(std::string_view name) {
  for (Behavior b : {Behavior::Honest, Behavior::Tamperer, Behavior::DoubleIssuer,
                     Behavior::Smearer, Behavior::Flatterer}) {
    if (behavior_name(b) == name) return b;
  }
  return std::nullopt;
}

Millis LinkModel::latency(std::size_t from, std::size_t to, Rng& rng) const {
  Millis base = base_latency_ms;
  if (auto it = overrides.find({from, to}); it != overrides.end()) base = it->second;
  const Millis jitter = jitter_ms > 0 ? static_cast<Millis>(rng.below(
                                            static_cast<std::uint64_t>(jitter_ms) + 1))
                                      : 0;
  return base + jitter;
}

bool Mempool::add(const ledger::Transaction& tx, Millis expires_at) {
  if (entries_.count(tx.txid) != 0) return false;
  const std::uint64_t seq = next_seq_++;
  entries_.emplace(tx.txid, Entry{tx, seq, expires_at});
  order_.emplace(seq, tx.txid);
  return true;
}

void Mempool::erase(const Digest& txid) {
  auto it = entries_.find(txid);
  if (it == entries_.end()) return;
  order_.erase(it->second.seq);
  entries_.erase(it);
}

std::vector<ledger::Transaction> Mempool::oldest_first() const {
  std::vector<ledger::Transaction> out;
  out.reserve(order_.size());
  for (const auto& [seq, txid] : order_) out.push_back(entries_.at(txid).tx);
  return out;
}

std::vector<Digest> Mempool::expire(Millis now) {
  std::vector<Digest> gone;
  for (const auto& [txid, e] : entries_) {
    if (e.expires_at <= now) gone.push_back(txid);
  }
  for (const auto& txid : gone) erase(txid);
  return gone;
}

bool Node::registered() const { return replica->tip_state().csps.count(address) != 0; }

consensus::ConsensusParams resolve_params(const WorldConfig& config,
                                          const std::vector<Address>& addresses) {
  consensus::ConsensusParams params = config.params;
  for (std::size_t i = 0; i < config.nodes.size(); ++i) {
    if (config.nodes[i].trust_override) {
      params.trust_overrides[addresses.at(i)] = *config.nodes[i].trust_override;
    }
  }
  if (params.base_target == Fixed::zero()) {
    Int128 total = 0;
    for (const auto& spec : config.nodes) {
      if (spec.genesis) total += spec.stake.raw();
    }
    std::vector<consensus::StakeTrust> inputs;
    for (std::size_t i = 0; i < config.nodes.size(); ++i) {
      const NodeSpec& spec = config.nodes[i];
      if (!spec.genesis || total <= 0) continue;
      const Fixed share =
          Fixed::from_raw(floor_div(static_cast<Int128>(spec.stake.raw()) * Fixed::kScale, total));
      inputs.push_back({share, spec.trust_override.value_or(params.bootstrap_trust)});
    }
    params.base_target = consensus::calibrate_base_target(inputs);
  }
  return params;
}

World::World(WorldConfig config, std::vector<federation::Action> actions)
    : config_(std::move(config)),
      actions_(std::move(actions)),
      links_(config_.links),
      rng_(config_.seed),
      log_(config_.log_level) {
  std::vector<Address> addresses;
  for (std::size_t i = 0; i < config_.nodes.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (config_.nodes[j].name == config_.nodes[i].name) {
        throw std::invalid_argument("duplicate node name: " + config_.nodes[i].name);
      }
    }
    auto node = std::make_unique<Node>();
    node->id = i;
    node->spec = config_.nodes[i];
    node->keys = crypto::generate_keypair(rng_.seed32());
    node->address = crypto::address_of(node->keys.public_key);
    addresses.push_back(node->address);
    nodes_.push_back(std::move(node));
  }
  params_ = resolve_params(config_, addresses);
  params_.validate();

  std::vector<ledger::Transaction> registrations;
  for (auto& node : nodes_) {
    if (!node->spec.genesis) continue;
    auto tx = ledger::build_register_tx(node->keys, node->spec.omega1, node->spec.omega2,
                                        node->spec.stake, node->last_tx);
    note_signed(node->id, tx);
    registrations.push_back(std::move(tx));
  }
  genesis_ = consensus::make_genesis(params_, std::move(registrations));
  if (!genesis_.txs.empty()) {
    for (auto& node : nodes_) {
      node->replica = std::make_unique<consensus::Replica>(genesis_, params_, &cache_);
    }
  } else if (!nodes_.empty()) {
    throw std::invalid_argument("at least one node must be registered at genesis");
  }

  nlohmann::json listed = nlohmann::json::array();
  for (const auto& node : nodes_) {
    listed.push_back({{"name", node->name()},
                      {"address", node->address.hex()},
                      {"genesis", node->spec.genesis},
                      {"behavior", behavior_name(node->behavior())}});
  }
  log_.emit(LogLevel::Info, 0, std::nullopt, "genesis",
            {{"hash", genesis_.hash().hex()},
             {"nodes", listed},
             {"base_target", params_.base_target.str()}});

  schedule(params_.slot_ms, SlotTick{});
  for (std::size_t i = 0; i < actions_.size(); ++i) {
    schedule(actions_[i].at_ms, ScenarioAction{i});
  }
}

void World::schedule(Millis fire_at, EventPayload payload) {
  if (fire_at < now_) {
    throw std::invalid_argument("event scheduled in the past: " + std::to_string(fire_at) + " < " +
                                std::to_string(now_));
  }
  queue_.push(SimEvent{fire_at, next_seq_++, std::move(payload)});
}

bool World::step() {
  if (queue_.empty()) return false;
  SimEvent event = queue_.top();
  queue_.pop();
  now_ = event.fire_at;
  dispatch(event);
  return true;
}

void World::run_until(Millis end_ms) {
  while (!queue_.empty() && queue_.top().fire_at <= end_ms) step();
  now_ = std::max(now_, end_ms);
}

void World::dispatch(const SimEvent& event) {
  std::visit(
      [this](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, DeliverTx>) {
          on_deliver_tx(e);
        } else if constexpr (std::is_same_v<T, DeliverBlock>) {
          on_deliver_block(e);
        } else if constexpr (std::is_same_v<T, BlockRequest>) {
          on_block_request(e);
        } else if constexpr (std::is_same_v<T, SlotTick>) {
          on_tick();
        } else if constexpr (std::is_same_v<T, ScenarioAction>) {
          on_action(e);
        } else if constexpr (std::is_same_v<T, ProtocolMsg>) {
          federation_.handle_message(*this, e.to, e.message);
        } else if constexpr (std::is_same_v<T, PartitionChange>) {
          on_partition(e);
        }
      },
      event.payload);
}

std::optional<std::size_t> World::find_node(std::string_view name) const {
  for (const auto& node : nodes_) {
    if (node->name() == name) return node->id;
  }
  return std::nullopt;
}

std::optional<std::size_t> World::find_node(const Address& address) const {
  for (const auto& node : nodes_) {
    if (node->address == address) return node->id;
  }
  return std::nullopt;
}

ledger::TxLinks World::next_links(std::size_t id) const {
  const Node& n = node(id);
  return {n.last_tx, n.last_token_tx};
}

void World::note_signed(std::size_t id, const ledger::Transaction& tx) {
  Node& n = node(id);
  n.last_tx = tx.txid;
  if (tx.kind == ledger::TxKind::Token) n.last_token_tx = tx.txid;
}

Millis World::tx_expiry(const ledger::Transaction& tx) const {
  if (tx.kind == ledger::TxKind::Token && !tx.outputs.empty()) {
    return tx.outputs[0].token.expires_at;
  }
  return now_ + static_cast<Millis>(config_.mempool_ttl_intervals) * params_.block_interval_ms;
}

bool World::submit_tx(std::size_t id, const ledger::Transaction& tx, bool force) {
  Node& n = node(id);
  note_signed(id, tx);
  const Reason r = n.replica->chain().validate_transaction(tx, &cache_);
  if (r == Reason::Ok || is_pending_reason(r)) {
    n.mempool.add(tx, tx_expiry(tx));
    log_.emit(LogLevel::Info, now_, n.name(), "tx_submitted",
              {{"txid", tx.txid.hex()}, {"tx_kind", kind_name(tx.kind)}});
    broadcast_tx(id, tx);
    return true;
  }
  log_.emit(LogLevel::Info, now_, n.name(), "tx_rejected",
            {{"txid", tx.txid.hex()}, {"reason", reason_name(r)}, {"stage", "submit"}});
  if (force) broadcast_tx(id, tx);
  return false;
}

void World::broadcast_tx(std::size_t origin, const ledger::Transaction& tx) {
  auto shared = std::make_shared<const ledger::Transaction>(tx);
  for (std::size_t to = 0; to < nodes_.size(); ++to) {
    if (to == origin || !links_.connected(origin, to)) continue;
    schedule(now_ + links_.latency(origin, to, rng_), DeliverTx{to, origin, shared});
  }
}

ledger::Block World::tamper(const ledger::Block& block) {
  Bytes raw = ledger::serialize_block(block);
  const std::size_t i = rng_.below(raw.size());
  raw[i] ^= static_cast<std::uint8_t>(1 + rng_.below(255));
  try {
    ledger::Block mutated = ledger::deserialize_block(raw);
    if (!(mutated == block)) return mutated;
  } catch (const DecodeError&) {
  }
  ledger::Block mutated = block;
  mutated.header.timestamp += 1;
  return mutated;
}

void World::broadcast_blocks(std::size_t origin, const std::vector<ledger::Block>& blocks) {
  std::vector<ledger::Block> outgoing = blocks;
  if (node(origin).behavior() == Behavior::Tamperer) {
    for (auto& b : outgoing) b = tamper(b);
  }
  auto shared = std::make_shared<const std::vector<ledger::Block>>(std::move(outgoing));
  for (std::size_t to = 0; to < nodes_.size(); ++to) {
    if (to == origin || !links_.connected(origin, to)) continue;
    schedule(now_ + links_.latency(origin, to, rng_), DeliverBlock{to, origin, shared});
  }
}

void World::send_blocks(std::size_t from, std::size_t to, std::vector<ledger::Block> blocks) {
  if (!links_.connected(from, to) || blocks.empty()) return;
  if (node(from).behavior() == Behavior::Tamperer) {
    for (auto& b : blocks) b = tamper(b);
  }
  auto shared = std::make_shared<const std::vector<ledger::Block>>(std::move(blocks));
  schedule(now_ + links_.latency(from, to, rng_), DeliverBlock{to, from, shared});
}

void World::send_message(std::size_t from, std::size_t to, federation::Message message) {
  schedule(now_ + links_.latency(from, to, rng_), ProtocolMsg{to, std::move(message)});
}

void World::send_message_at(Millis at, std::size_t to, federation::Message message) {
  schedule(at, ProtocolMsg{to, std::move(message)});
}

void World::set_partition(const std::vector<std::vector<std::size_t>>& groups) {
  std::vector<std::size_t> assignment(nodes_.size(), SIZE_MAX);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (std::size_t id : groups[g]) {
      if (id >= nodes_.size()) throw std::invalid_argument("partition names an unknown node");
      if (assignment[id] != SIZE_MAX) {
        throw std::invalid_argument("partition groups overlap at node " + node(id).name());
      }
      assignment[id] = g;
    }
  }
  for (std::size_t id = 0; id < assignment.size(); ++id) {
    if (assignment[id] == SIZE_MAX) {
      throw std::invalid_argument("partition leaves node " + node(id).name() + " unassigned");
    }
  }
  links_.groups = std::move(assignment);
  log_.emit(LogLevel::Info, now_, std::nullopt, "partition", {{"groups", names_of(*this, groups)}});
}

void World::heal() {
  if (!partitioned()) return;
  links_.groups.clear();
  log_.emit(LogLevel::Info, now_, std::nullopt, "heal");
  for (auto& n : nodes_) {
    if (n->replica->height() == 0) continue;
    broadcast_blocks(n->id, {n->replica->chain().tip()});
  }
}

std::vector<Digest> World::tips() const {
  std::vector<Digest> out;
  for (const auto& n : nodes_) out.push_back(n->replica->tip_hash());
  return out;
}

void World::on_tick() {
  log_.emit(LogLevel::Debug, now_, std::nullopt, "tick");
  for (auto& n : nodes_) {
    expire_mempool(*n);
    try_generate(*n);
  }
  schedule(now_ + params_.slot_ms, SlotTick{});
}

void World::expire_mempool(Node& n) {
  for (const Digest& txid : n.mempool.expire(now_)) {
    log_.emit(LogLevel::Debug, now_, n.name(), "tx_expired", {{"txid", txid.hex()}});
  }
}

void World::try_generate(Node& n) {
  const consensus::ReplicaState& state = n.replica->tip_state();
  auto self = state.csps.find(n.address);
  if (self == state.csps.end() || now_ <= state.timestamp) return;
  const Fixed t_csp = consensus::consensus_trust(params_, state, n.address);
  const consensus::Eligibility e =
      consensus::check_eligibility(params_, self->second, t_csp, n.keys.public_key, now_);
  if (!e.eligible) return;

  ledger::Block block;
  block.header.height = state.height + 1;
  block.header.prev_block = n.replica->tip_hash();
  block.header.timestamp = now_;
  block.header.base_target = params_.base_target;
  const auto candidates = n.mempool.oldest_first();
  auto packed = n.replica->chain().pack(candidates, params_.max_block_txs, &cache_);
  for (const auto& [txid, reason] : packed.rejected) {
    if (is_pending_reason(reason)) continue;
    n.mempool.erase(txid);
    log_.emit(LogLevel::Info, now_, n.name(), "tx_rejected",
              {{"txid", txid.hex()}, {"reason", reason_name(reason)}, {"stage", "pack"}});
  }
  block.txs = std::move(packed.selected);
  block.header.tx_root = ledger::compute_tx_root(block.txs);
  if (!consensus::generate_block(block, params_, n.keys, self->second, t_csp)) return;

  const consensus::AddResult result = n.replica->add_block(block);
  if (result.status != consensus::AddStatus::Extended) {
    log_.emit(LogLevel::Warn, now_, n.name(), "generation_failed",
              {{"reason", reason_name(result.reason)}});
    return;
  }
  ++n.blocks_generated;
  log_.emit(LogLevel::Info, now_, n.name(), "block_generated",
            {{"hash", block.hash().hex()},
             {"height", block.header.height},
             {"txs", block.txs.size()},
             {"d_csp", e.d_csp.str()}});
  after_add(n, result, std::nullopt);
  broadcast_blocks(n.id, {block});
}

void World::after_add(Node& n, const consensus::AddResult& result,
                      std::optional<std::size_t> from) {
  (void)from;
  const bool changed = result.status == consensus::AddStatus::Extended ||
                       result.status == consensus::AddStatus::Reorganized ||
                       !result.connected.empty();
  if (!changed) return;
  const ledger::Chain& chain = n.replica->chain();
  for (const auto& tx : result.reverted) {
    if (chain.has_tx(tx.txid)) continue;
    const Millis expiry = tx_expiry(tx);
    if (expiry > now_) n.mempool.add(tx, expiry);
  }
  for (const auto& tx : result.included) n.mempool.erase(tx.txid);
  if (result.switches > 0) {
    fork_switches_ += result.switches;
    log_.emit(LogLevel::Info, now_, n.name(), "fork_switch",
              {{"old_tip", result.old_tip.hex()},
               {"new_tip", result.new_tip.hex()},
               {"depth", result.reorg_depth},
               {"height", n.replica->height()}});
  }
  federation_.on_chain_update(*this, n.id);
}

void World::on_deliver_tx(const DeliverTx& e) {
  Node& n = node(e.to);
  const ledger::Transaction& tx = *e.tx;
  if (n.mempool.contains(tx.txid) || n.replica->chain().has_tx(tx.txid)) return;
  const Reason r = n.replica->chain().validate_transaction(tx, &cache_);
  if (r == Reason::Ok || is_pending_reason(r)) {
    const Millis expiry = tx_expiry(tx);
    if (expiry > now_) n.mempool.add(tx, expiry);
    log_.emit(LogLevel::Debug, now_, n.name(), "tx_received",
              {{"txid", tx.txid.hex()}, {"from", node(e.from).name()}});
    return;
  }
  log_.emit(LogLevel::Info, now_, n.name(), "tx_rejected",
            {{"txid", tx.txid.hex()},
             {"reason", reason_name(r)},
             {"stage", "receive"},
             {"from", node(e.from).name()}});
}

void World::on_deliver_block(const DeliverBlock& e) {
  Node& n = node(e.to);
  bool requested = false;
  for (const ledger::Block& block : *e.blocks) {
    const std::string from = node(e.from).name();
    if (block.header.timestamp > now_ + params_.slot_ms) {
      log_.emit(LogLevel::Info, now_, n.name(), "block_rejected",
                {{"hash", block.hash().hex()},
                 {"height", block.header.height},
                 {"reason", reason_name(Reason::FutureTimestamp)},
                 {"from", from}});
      continue;
    }
    const consensus::AddResult result = n.replica->add_block(block);
    switch (result.status) {
      case consensus::AddStatus::Rejected: {
        nlohmann::json details = {{"hash", result.failed_block.hex()},
                                  {"height", block.header.height},
                                  {"reason", reason_name(result.reason)},
                                  {"from", from}};
        if (result.failed_tx) details["txid"] = result.failed_tx->hex();
        log_.emit(LogLevel::Info, now_, n.name(), "block_rejected", details);
        break;
      }
      case consensus::AddStatus::Orphan:
        if (!requested && links_.connected(e.to, e.from)) {
          requested = true;
          log_.emit(LogLevel::Debug, now_, n.name(), "sync_request", {{"to", from}});
          schedule(now_ + links_.latency(e.to, e.from, rng_),
                   BlockRequest{e.from, e.to, n.replica->locator()});
        }
        break;
      case consensus::AddStatus::Extended:
      case consensus::AddStatus::Reorganized:
        log_.emit(LogLevel::Info, now_, n.name(), "block_accepted",
                  {{"hash", block.hash().hex()},
                   {"height", block.header.height},
                   {"from", from},
                   {"tip", result.new_tip.hex()}});
        break;
      case consensus::AddStatus::SideBranch:
        log_.emit(LogLevel::Debug, now_, n.name(), "block_stored",
                  {{"hash", block.hash().hex()}, {"height", block.header.height}});
        break;
      case consensus::AddStatus::Duplicate:
        break;
    }
    after_add(n, result, e.from);
  }
}

void World::on_block_request(const BlockRequest& e) {
  const Node& n = node(e.to);
  send_blocks(e.to, e.from, n.replica->blocks_after(e.locator, config_.max_sync_blocks));
}

void World::on_action(const ScenarioAction& e) {
  federation_.handle_action(*this, actions_.at(e.index));
}

void World::on_partition(const PartitionChange& e) {
  if (e.groups.empty()) {
    heal();
  } else {
    set_partition(e.groups);
  }
}

}  // namespace ctsim::sim
