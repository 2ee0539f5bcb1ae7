#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctsim/chain.hpp"
#include "ctsim/consensus.hpp"
#include "ctsim/crypto.hpp"
#include "ctsim/ledger.hpp"
#include "ctsim/replica.hpp"
#include "ctsim/sim.hpp"

namespace ctsim::testing {

inline crypto::KeyPair key(std::uint8_t n) {
  std::array<std::uint8_t, 32> seed{};
  seed[31] = n;
  return crypto::generate_keypair(seed);
}

inline Fixed fx(const char* text) { return Fixed::parse(text); }

/// Three registered CSPs with equal stake and a chain at genesis.
struct Federation3 {
  crypto::KeyPair a = key(11);
  crypto::KeyPair b = key(12);
  crypto::KeyPair c = key(13);
  consensus::ConsensusParams params;
  ledger::Block genesis;
  ledger::Chain chain;
  Rng rng{5};
  std::uint64_t next_nonce = 1;

  Federation3() {
    params.base_target = fx("0.9");
    std::vector<ledger::Transaction> regs;
    for (const auto* k : {&a, &b, &c}) {
      regs.push_back(ledger::build_register_tx(*k, fx("0.5"), fx("0.5"), Fixed::ratio(1, 3), {}));
    }
    genesis = consensus::make_genesis(params, regs);
    chain.apply_genesis(genesis);
  }

  static crypto::Address addr(const crypto::KeyPair& k) { return crypto::address_of(k.public_key); }

  ledger::AccessToken token(const crypto::KeyPair& issuer, const crypto::KeyPair& audience,
                            const std::string& user = "alice", std::uint64_t nonce = 0) {
    ledger::AccessToken t;
    t.user_pseudonym = crypto::address_of_label(user);
    t.issuer = addr(issuer);
    t.audience = addr(audience);
    t.resource = crypto::address_of_label("disk");
    t.privileges = {"access"};
    t.issued_at = 1000;
    t.expires_at = 4000;
    t.nonce = nonce != 0 ? nonce : next_nonce++;
    return ledger::seal_token(t);
  }

  ledger::Transaction token_tx(const crypto::KeyPair& issuer, const crypto::KeyPair& audience,
                               const ledger::AccessToken& t) {
    return ledger::build_token_tx(issuer, as_bytes("alice profile"), t.resource,
                                  audience.public_key, t, {}, rng);
  }

  ledger::Transaction token_tx(const crypto::KeyPair& issuer, const crypto::KeyPair& audience) {
    return token_tx(issuer, audience, token(issuer, audience));
  }

  static ledger::Transaction feedback_tx(const crypto::KeyPair& rater,
                                         const ledger::AccessToken& t, ledger::FeedbackRole role,
                                         std::uint8_t label) {
    ledger::FeedbackPayload p;
    p.rater = addr(rater);
    p.subject = role == ledger::FeedbackRole::Foreign ? t.issuer : t.audience;
    p.user = t.user_pseudonym;
    p.label = label;
    p.role = role;
    p.token_id = t.token_id;
    return ledger::build_feedback_tx(rater, p, {});
  }

  /// A block that links to the chain tip; no consensus fields.
  ledger::Block block(std::vector<ledger::Transaction> txs) const {
    ledger::Block blk;
    blk.header.height = chain.height() + 1;
    blk.header.prev_block = chain.tip().hash();
    blk.header.timestamp = chain.tip().header.timestamp + 300;
    blk.txs = std::move(txs);
    blk.header.tx_root = ledger::compute_tx_root(blk.txs);
    return blk;
  }
};

/// The first eligible block by `keys` on top of `parent`, searching forward
/// from `from_ms` in 10 ms steps.
inline ledger::Block mine(const consensus::ConsensusParams& params,
                          const consensus::ReplicaState& parent, const crypto::KeyPair& keys,
                          std::vector<ledger::Transaction> txs, Millis from_ms = 0) {
  ledger::Block blk;
  blk.header.height = parent.height + 1;
  blk.header.prev_block = parent.block_hash;
  blk.txs = std::move(txs);
  blk.header.tx_root = ledger::compute_tx_root(blk.txs);
  const auto address = crypto::address_of(keys.public_key);
  const auto& state = parent.csps.at(address);
  const Fixed t_csp = consensus::consensus_trust(params, parent, address);
  for (Millis ts = std::max(from_ms, parent.timestamp + 10);; ts += 10) {
    blk.header.timestamp = ts;
    if (consensus::generate_block(blk, params, keys, state, t_csp)) return blk;
  }
}

inline sim::WorldConfig small_world(std::uint64_t seed, int n = 4) {
  sim::WorldConfig cfg;
  cfg.seed = seed;
  for (int i = 0; i < n; ++i) {
    sim::NodeSpec spec;
    spec.name = "n" + std::to_string(i);
    spec.stake = Fixed::ratio(1, n);
    cfg.nodes.push_back(spec);
  }
  return cfg;
}

}  // namespace ctsim::testing
