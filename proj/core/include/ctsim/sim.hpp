#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ctsim/consensus.hpp"
#include "ctsim/event_log.hpp"
#include "ctsim/federation.hpp"
#include "ctsim/replica.hpp"
#include "ctsim/rng.hpp"

namespace ctsim::sim {

using crypto::Address;
using crypto::Digest;

enum class Behavior { Honest, Tamperer, DoubleIssuer, Smearer, Flatterer };

std::string_view behavior_name(Behavior b);
std::optional<Behavior> parse_behavior(std::string_view name);

struct NodeSpec {
  std::string name;
  Fixed stake = Fixed::one();
  Fixed omega1 = Fixed::ratio(1, 2);
  Fixed omega2 = Fixed::ratio(1, 2);
  Behavior behavior = Behavior::Honest;
  std::optional<Fixed> trust_override;
  /// Registered in the genesis block; otherwise joins via register_csp.
  bool genesis = true;
  /// Privileges this CSP writes into the tokens it issues.
  std::vector<std::string> privileges{"access"};
};

struct LinkModel {
  Millis base_latency_ms = 20;
  Millis jitter_ms = 10;
  /// Per ordered (from, to) pair base latency.
  std::map<std::pair<std::size_t, std::size_t>, Millis> overrides;
  /// Partition group of each node; empty when fully connected.
  std::vector<std::size_t> groups;

  bool connected(std::size_t a, std::size_t b) const {
    return groups.empty() || groups.at(a) == groups.at(b);
  }
  /// base + uniform jitter in [0, jitter_ms].
  Millis latency(std::size_t from, std::size_t to, Rng& rng) const;
};

struct WorldConfig {
  std::uint64_t seed = 1;
  consensus::ConsensusParams params;  // base_target zero: calibrate at genesis
  std::vector<NodeSpec> nodes;
  LinkModel links;
  LogLevel log_level = LogLevel::Info;
  /// Lifetime of non-token transactions in the mempool, in block intervals.
  std::uint32_t mempool_ttl_intervals = 64;
  /// Token lifetime, in block intervals.
  std::uint32_t token_ttl_intervals = 10;
  /// How long a foreign CSP waits for a token to confirm, in block intervals.
  std::uint32_t grant_timeout_intervals = 10;
  /// Most blocks sent in answer to one sync request.
  std::size_t max_sync_blocks = 500;
};

class Mempool {
 public:
  bool add(const ledger::Transaction& tx, Millis expires_at);
  bool contains(const Digest& txid) const { return entries_.count(txid) != 0; }
  void erase(const Digest& txid);
  std::size_t size() const { return entries_.size(); }
  std::vector<ledger::Transaction> oldest_first() const;
  /// Drops expired entries and returns their txids.
  std::vector<Digest> expire(Millis now);

 private:
  struct Entry {
    ledger::Transaction tx;
    std::uint64_t seq = 0;
    Millis expires_at = 0;
  };
  std::map<Digest, Entry> entries_;
  std::map<std::uint64_t, Digest> order_;
  std::uint64_t next_seq_ = 0;
};

struct Node {
  std::size_t id = 0;
  NodeSpec spec;
  crypto::KeyPair keys;
  Address address;
  std::unique_ptr<consensus::Replica> replica;
  Mempool mempool;
  /// Hash links for the next transaction this node signs.
  Digest last_tx;
  Digest last_token_tx;
  std::uint64_t next_nonce = 1;
  std::uint32_t next_user_index = 0;
  std::uint64_t blocks_generated = 0;

  const std::string& name() const { return spec.name; }
  Behavior behavior() const { return spec.behavior; }
  bool registered() const;
};

struct DeliverTx {
  std::size_t to = 0;
  std::size_t from = 0;
  std::shared_ptr<const ledger::Transaction> tx;
};
struct DeliverBlock {
  std::size_t to = 0;
  std::size_t from = 0;
  std::shared_ptr<const std::vector<ledger::Block>> blocks;
};
struct BlockRequest {
  std::size_t to = 0;
  std::size_t from = 0;
  std::vector<Digest> locator;
};
struct SlotTick {};
struct ScenarioAction {
  std::size_t index = 0;
};
struct ProtocolMsg {
  std::size_t to = 0;
  federation::Message message;
};
struct PartitionChange {
  /// Node groups; empty means heal.
  std::vector<std::vector<std::size_t>> groups;
};

using EventPayload = std::variant<DeliverTx, DeliverBlock, BlockRequest, SlotTick, ScenarioAction,
                                  ProtocolMsg, PartitionChange>;

enum class EventKind {
  DeliverTx,
  DeliverBlock,
  BlockRequest,
  SlotTick,
  ScenarioAction,
  ProtocolMsg,
  PartitionChange
};

struct SimEvent {
  Millis fire_at = 0;
  std::uint64_t seq = 0;
  EventPayload payload;

  EventKind kind() const { return static_cast<EventKind>(payload.index()); }
};

/// Deterministic discrete-event world. Everything random draws from one
/// seeded generator, and events fire in (time, insertion) order.
class World {
 public:
  World(WorldConfig config, std::vector<federation::Action> actions = {});
  World(const World&) = delete;
  World& operator=(const World&) = delete;

  /// Enqueues an event; throws std::invalid_argument when fire_at is in the past.
  void schedule(Millis fire_at, EventPayload payload);
  /// Processes events with fire_at <= end_ms.
  void run_until(Millis end_ms);
  /// Processes the next event only; false when the queue is empty.
  bool step();

  Millis now() const { return now_; }
  const consensus::ConsensusParams& params() const { return params_; }
  const WorldConfig& config() const { return config_; }
  const ledger::Block& genesis() const { return genesis_; }
  std::size_t node_count() const { return nodes_.size(); }
  Node& node(std::size_t id) { return *nodes_.at(id); }
  const Node& node(std::size_t id) const { return *nodes_.at(id); }
  std::optional<std::size_t> find_node(std::string_view name) const;
  std::optional<std::size_t> find_node(const Address& address) const;
  EventLog& log() { return log_; }
  const EventLog& log() const { return log_; }
  Rng& rng() { return rng_; }
  crypto::SignatureCache& signature_cache() { return cache_; }
  federation::Federation& federation() { return federation_; }
  const federation::Federation& federation() const { return federation_; }
  const LinkModel& links() const { return links_; }
  std::size_t pending_events() const { return queue_.size(); }

  /// Validates locally, adds to the node's mempool and broadcasts. A
  /// definitive local rejection is logged and, unless force is set, the
  /// transaction goes no further.
  bool submit_tx(std::size_t node, const ledger::Transaction& tx, bool force = false);
  void broadcast_tx(std::size_t origin, const ledger::Transaction& tx);
  void broadcast_blocks(std::size_t origin, const std::vector<ledger::Block>& blocks);
  void send_blocks(std::size_t from, std::size_t to, std::vector<ledger::Block> blocks);
  /// User-carried message from one CSP to another.
  void send_message(std::size_t from, std::size_t to, federation::Message message);
  void send_message_at(Millis at, std::size_t to, federation::Message message);

  /// Throws std::invalid_argument unless groups partition the node set.
  void set_partition(const std::vector<std::vector<std::size_t>>& groups);
  /// Restores full connectivity; every node re-announces its tip.
  void heal();
  bool partitioned() const { return !links_.groups.empty(); }

  /// Honest view used by tests: the tips of every node.
  std::vector<Digest> tips() const;
  std::uint64_t fork_switches() const { return fork_switches_; }

  /// Links for a new transaction by this node, and bookkeeping after it.
  ledger::TxLinks next_links(std::size_t node) const;
  void note_signed(std::size_t node, const ledger::Transaction& tx);

 private:
  struct Later {
    bool operator()(const SimEvent& a, const SimEvent& b) const {
      return a.fire_at != b.fire_at ? a.fire_at > b.fire_at : a.seq > b.seq;
    }
  };

  void dispatch(const SimEvent& event);
  void on_tick();
  void on_deliver_tx(const DeliverTx& e);
  void on_deliver_block(const DeliverBlock& e);
  void on_block_request(const BlockRequest& e);
  void on_action(const ScenarioAction& e);
  void on_partition(const PartitionChange& e);

  void try_generate(Node& node);
  void after_add(Node& node, const consensus::AddResult& result, std::optional<std::size_t> from);
  void expire_mempool(Node& node);
  Millis tx_expiry(const ledger::Transaction& tx) const;
  ledger::Block tamper(const ledger::Block& block);

  WorldConfig config_;
  consensus::ConsensusParams params_;
  std::vector<federation::Action> actions_;
  LinkModel links_;
  Rng rng_;
  EventLog log_;
  crypto::SignatureCache cache_;
  std::vector<std::unique_ptr<Node>> nodes_;
  ledger::Block genesis_;
  federation::Federation federation_;
  std::priority_queue<SimEvent, std::vector<SimEvent>, Later> queue_;
  std::uint64_t next_seq_ = 0;
  Millis now_ = 0;
  std::uint64_t fork_switches_ = 0;
};

/// The calibrated parameters a world would use for these node specs.
consensus::ConsensusParams resolve_params(const WorldConfig& config,
                                          const std::vector<Address>& addresses);

}  // namespace ctsim::sim
