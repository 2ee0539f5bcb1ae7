#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctsim/bytes.hpp"
#include "ctsim/crypto.hpp"
#include "ctsim/fixed.hpp"
#include "ctsim/rng.hpp"

namespace ctsim::ledger {

using crypto::Address;
using crypto::Digest;
using crypto::PublicKey;
using crypto::Signature;

/// Claims binding a user pseudonym, the issuing home CSP, the audience
/// (foreign CSP) and a resource.
struct AccessToken {
  Digest token_id;
  Address user_pseudonym;
  Address issuer;
  Address audience;
  Address resource;
  std::vector<std::string> privileges;
  Millis issued_at = 0;
  Millis expires_at = 0;
  std::uint64_t nonce = 0;

  /// Canonical claim bytes; everything except token_id.
  Bytes claims_bytes() const;
  Digest compute_id() const { return crypto::hash(claims_bytes()); }

  friend bool operator==(const AccessToken&, const AccessToken&) = default;
};

/// Fills token_id from the claims.
AccessToken seal_token(AccessToken token);

struct TxInput {
  std::uint32_t idx = 0;
  Digest ref_in;
  crypto::Ciphertext enc_user;
  Address resource;

  friend bool operator==(const TxInput&, const TxInput&) = default;
};

struct TxOutput {
  std::uint32_t idx = 0;
  Digest ref_out;
  AccessToken token;
  Address recipient;

  friend bool operator==(const TxOutput&, const TxOutput&) = default;
};

enum class TxKind : std::uint8_t { Token = 1, Feedback = 2, Register = 3 };

/// Who is rating: the foreign CSP rates a visiting user (credibility), or
/// the home CSP rates a foreign CSP on the user's behalf (satisfaction).
enum class FeedbackRole : std::uint8_t { Home = 0, Foreign = 1 };

struct FeedbackPayload {
  Address rater;
  Address subject;
  Address user;
  std::uint8_t label = 0;
  FeedbackRole role = FeedbackRole::Foreign;
  Digest token_id;

  Bytes encode() const;
  /// Strict decode; nullopt on any structural problem.
  static std::optional<FeedbackPayload> decode(std::span<const std::uint8_t> bytes);

  friend bool operator==(const FeedbackPayload&, const FeedbackPayload&) = default;
};

struct RegisterPayload {
  PublicKey csp_pub;
  Fixed omega1;  // satisfaction weight
  Fixed omega2;  // authentication weight
  Fixed stake;

  Bytes encode() const;
  static std::optional<RegisterPayload> decode(std::span<const std::uint8_t> bytes);

  friend bool operator==(const RegisterPayload&, const RegisterPayload&) = default;
};

struct Transaction {
  Digest txid;
  TxKind kind = TxKind::Token;
  std::uint16_t n_in = 0;
  std::vector<TxInput> inputs;
  std::uint16_t n_out = 0;
  std::vector<TxOutput> outputs;
  Digest prev_tx;
  Bytes payload;
  PublicKey issuer_pub;
  Signature sig;

  Digest compute_txid() const;

  friend bool operator==(const Transaction&, const Transaction&) = default;
};

/// Field order: kind, n_in, inputs, n_out, outputs, prev_tx, payload,
/// issuer_pub. txid and sig are excluded.
Bytes canonical_serialize(const Transaction& tx);

/// Full wire form: canonical body, then txid and sig.
Bytes serialize_tx(const Transaction& tx);
void write_tx(ByteWriter& out, const Transaction& tx);
Transaction read_tx(ByteReader& in);
/// Throws DecodeError.
Transaction deserialize_tx(std::span<const std::uint8_t> bytes);

/// Sets txid and signs it.
void seal_transaction(Transaction& tx, const crypto::KeyPair& issuer);

struct TxLinks {
  Digest prev_tx;  // issuer's previous transaction of any kind
  Digest prev_io;  // issuer's previous token transaction (ref_in / ref_out)
};

class BuildError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One input carrying Enc(U) for the recipient, one output carrying the
/// token. Throws BuildError when the token's issuer or audience disagree
/// with the keys supplied.
Transaction build_token_tx(const crypto::KeyPair& issuer, std::span<const std::uint8_t> user_info,
                           const Address& resource, const PublicKey& recipient_key,
                           const AccessToken& token, const TxLinks& links, Rng& rng);

Transaction build_feedback_tx(const crypto::KeyPair& rater, const FeedbackPayload& payload,
                              const Digest& prev_tx);

Transaction build_register_tx(const crypto::KeyPair& csp, Fixed omega1, Fixed omega2, Fixed stake,
                              const Digest& prev_tx);

struct BlockHeader {
  std::uint64_t height = 0;
  Digest prev_block;
  Digest tx_root;
  Millis timestamp = 0;
  PublicKey generator_pub;
  Digest prf;
  Fixed base_target;
  Signature sig;

  /// Header bytes without the signature.
  Bytes unsigned_bytes() const;
  /// h_blk
  Digest hash() const { return crypto::hash(unsigned_bytes()); }

  friend bool operator==(const BlockHeader&, const BlockHeader&) = default;
};

struct Block {
  BlockHeader header;
  std::vector<Transaction> txs;

  Digest hash() const { return header.hash(); }

  friend bool operator==(const Block&, const Block&) = default;
};

/// Hash of the concatenated txids, in block order.
Digest compute_tx_root(std::span<const Transaction> txs);

Bytes serialize_block(const Block& block);
/// Strict: rejects trailing bytes and any non-canonical encoding.
Block deserialize_block(std::span<const std::uint8_t> bytes);

}  // namespace ctsim::ledger
