#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "ctsim/ledger.hpp"
#include "ctsim/reason.hpp"

namespace ctsim::ledger {

struct TxVerdict {
  Reason reason = Reason::Ok;
  Digest txid;
  /// Position of the offending transaction inside its block, if any.
  std::optional<std::size_t> position;

  bool ok() const { return reason == Reason::Ok; }
};

struct TokenRecord {
  std::uint64_t height = 0;
  Digest txid;
  std::uint32_t position = 0;
};

struct CspRecord {
  PublicKey pub;
  Address address;
  Fixed omega1;
  Fixed omega2;
  Fixed stake;
  std::uint64_t registered_height = 0;
};

/// Checks that need no chain state: counts, indices, token fields, payload
/// shape, txid and signature.
Reason check_tx_context_free(const Transaction& tx, crypto::SignatureCache* cache = nullptr);

/// Canonical chain plus the indices needed to validate new transactions.
/// Single writer. Blocks can be popped again, which is how a replica walks
/// back to a fork point.
class Chain {
 public:
  /// Entries added by transactions earlier in the same block.
  struct Scratch {
    std::set<Digest> txids;
    std::map<Digest, AccessToken> tokens;
    std::set<std::pair<Address, std::uint64_t>> nonces;
    std::map<Address, CspRecord> csps;
    std::set<std::pair<Digest, FeedbackRole>> feedback;
  };

  Chain() = default;

  bool empty() const { return blocks_.empty(); }
  std::uint64_t height() const;
  const std::vector<Block>& blocks() const { return blocks_; }
  const Block& tip() const { return blocks_.back(); }
  const Block& at(std::uint64_t height) const { return blocks_.at(height); }

  /// Genesis: height 0, zero prev_block, registrations only.
  TxVerdict apply_genesis(const Block& genesis, crypto::SignatureCache* cache = nullptr);

  /// Validates one transaction against the chain and the scratch entries.
  Reason validate_transaction(const Transaction& tx, crypto::SignatureCache* cache = nullptr,
                              const Scratch* scratch = nullptr) const;

  /// Link, tx_root and per-transaction checks; all or nothing.
  TxVerdict apply_block(const Block& block, crypto::SignatureCache* cache = nullptr);

  /// Undoes the last block. Genesis cannot be popped.
  Block pop_block();

  /// Picks, in order, the candidates that would be valid together in one
  /// block, up to max_txs. Rejected candidates are returned with reasons.
  struct Packed {
    std::vector<Transaction> selected;
    std::vector<std::pair<Digest, Reason>> rejected;
  };
  Packed pack(std::span<const Transaction> candidates, std::size_t max_txs,
              crypto::SignatureCache* cache = nullptr) const;

  std::optional<AccessToken> lookup_token(const Digest& token_id) const;
  std::optional<TokenRecord> token_record(const Digest& token_id) const;
  /// The transaction carrying a canonical token.
  const Transaction* token_transaction(const Digest& token_id) const;
  bool has_tx(const Digest& txid) const { return txids_.count(txid) != 0; }
  bool has_nonce(const Address& issuer, std::uint64_t nonce) const {
    return nonces_.count({issuer, nonce}) != 0;
  }
  const CspRecord* find_csp(const Address& address) const;
  /// Registered CSPs in registration order.
  const std::vector<Address>& csp_order() const { return csp_order_; }
  std::size_t token_count() const { return tokens_.size(); }

 private:
  void index_block(const Block& block);

  std::vector<Block> blocks_;
  std::map<Digest, TokenRecord> tokens_;
  std::set<std::pair<Address, std::uint64_t>> nonces_;
  std::set<Digest> txids_;
  std::map<Address, CspRecord> csps_;
  std::vector<Address> csp_order_;
  std::set<std::pair<Digest, FeedbackRole>> feedback_;
};

}  // namespace ctsim::ledger
