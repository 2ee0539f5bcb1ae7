#include "ctsim/chain.hpp"

#include <array>
#include <stdexcept>

namespace ctsim {

namespace {
constexpr std::array<std::string_view, 30> kReasonNames = {
    "OK",
    "MALFORMED",
    "BAD_INDEX",
    "BAD_TXID",
    "BAD_SIGNATURE",
    "DUPLICATE_TX",
    "DUPLICATE_TOKEN",
    "DUPLICATE_NONCE",
    "UNKNOWN_ISSUER",
    "ISSUER_MISMATCH",
    "AUDIENCE_MISMATCH",
    "UNKNOWN_AUDIENCE",
    "BAD_TOKEN",
    "UNKNOWN_TOKEN",
    "UNKNOWN_RATER",
    "NOT_PARTICIPANT",
    "BAD_LABEL",
    "DUPLICATE_FEEDBACK",
    "DUPLICATE_CSP",
    "WEIGHT_RANGE",
    "STAKE_RANGE",
    "BAD_LINK",
    "BAD_TX_ROOT",
    "TIMESTAMP",
    "BAD_TARGET",
    "UNKNOWN_GENERATOR",
    "PRF_MISMATCH",
    "NOT_ELIGIBLE",
    "BAD_GENESIS",
    "FUTURE_TIMESTAMP",
};
}  // namespace

std::string_view reason_name(Reason r) { return kReasonNames.at(static_cast<std::size_t>(r)); }

std::optional<Reason> reason_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kReasonNames.size(); ++i) {
    if (kReasonNames[i] == name) return static_cast<Reason>(i);
  }
  return std::nullopt;
}

}  // namespace ctsim

namespace ctsim::ledger {
namespace {

constexpr std::uint8_t kMaxLabel = 4;
const Fixed kMaxStake = Fixed::from_raw(1'000'000 * Fixed::kScale);

Reason check_token_shape(const Transaction& tx) {
  if (tx.n_in != 1 || tx.n_out != 1 || !tx.payload.empty()) return Reason::Malformed;
  const AccessToken& token = tx.outputs[0].token;
  if (token.compute_id() != token.token_id) return Reason::BadToken;
  if (token.expires_at <= token.issued_at) return Reason::BadToken;
  if (token.audience != tx.outputs[0].recipient) return Reason::AudienceMismatch;
  if (token.issuer != crypto::address_of(tx.issuer_pub)) return Reason::IssuerMismatch;
  if (token.resource != tx.inputs[0].resource) return Reason::BadToken;
  return Reason::Ok;
}

Reason check_feedback_shape(const Transaction& tx) {
  if (tx.n_in != 0 || tx.n_out != 0) return Reason::Malformed;
  auto payload = FeedbackPayload::decode(tx.payload);
  if (!payload) return Reason::Malformed;
  if (payload->label > kMaxLabel) return Reason::BadLabel;
  if (payload->rater != crypto::address_of(tx.issuer_pub)) return Reason::IssuerMismatch;
  return Reason::Ok;
}

Reason check_register_shape(const Transaction& tx) {
  if (tx.n_in != 0 || tx.n_out != 0) return Reason::Malformed;
  auto payload = RegisterPayload::decode(tx.payload);
  if (!payload) return Reason::Malformed;
  if (payload->csp_pub != tx.issuer_pub) return Reason::IssuerMismatch;
  const Fixed zero = Fixed::zero();
  const Fixed one = Fixed::one();
  if (payload->omega1 < zero || payload->omega1 > one || payload->omega2 < zero ||
      payload->omega2 > one) {
    return Reason::WeightRange;
  }
  if (payload->omega1 == zero && payload->omega2 == zero) return Reason::WeightRange;
  if (payload->stake <= zero || payload->stake > kMaxStake) return Reason::StakeRange;
  return Reason::Ok;
}

bool is_participant(const FeedbackPayload& fb, const AccessToken& token) {
  if (fb.user != token.user_pseudonym) return false;
  if (fb.role == FeedbackRole::Foreign) {
    return fb.rater == token.audience && fb.subject == token.issuer;
  }
  return fb.rater == token.issuer && fb.subject == token.audience;
}

void add_to_scratch(Chain::Scratch& scratch, const Transaction& tx, std::uint64_t height) {
  scratch.txids.insert(tx.txid);
  switch (tx.kind) {
    case TxKind::Token: {
      const AccessToken& token = tx.outputs[0].token;
      scratch.tokens.emplace(token.token_id, token);
      scratch.nonces.insert({token.issuer, token.nonce});
      break;
    }
    case TxKind::Feedback: {
      auto fb = FeedbackPayload::decode(tx.payload);
      scratch.feedback.insert({fb->token_id, fb->role});
      break;
    }
    case TxKind::Register: {
      auto reg = RegisterPayload::decode(tx.payload);
      CspRecord rec{reg->csp_pub, crypto::address_of(reg->csp_pub), reg->omega1, reg->omega2,
                    reg->stake, height};
      scratch.csps.emplace(rec.address, rec);
      break;
    }
  }
}

}  // namespace

Reason check_tx_context_free(const Transaction& tx, crypto::SignatureCache* cache) {
  if (tx.n_in != tx.inputs.size() || tx.n_out != tx.outputs.size()) return Reason::Malformed;
  for (std::size_t i = 0; i < tx.inputs.size(); ++i) {
    if (tx.inputs[i].idx != i) return Reason::BadIndex;
  }
  for (std::size_t i = 0; i < tx.outputs.size(); ++i) {
    if (tx.outputs[i].idx != i) return Reason::BadIndex;
  }
  Reason shape = Reason::Malformed;
  switch (tx.kind) {
    case TxKind::Token:
      shape = check_token_shape(tx);
      break;
    case TxKind::Feedback:
      shape = check_feedback_shape(tx);
      break;
    case TxKind::Register:
      shape = check_register_shape(tx);
      break;
  }
  if (shape != Reason::Ok) return shape;
  if (tx.compute_txid() != tx.txid) return Reason::BadTxid;
  if (!crypto::verify_with(cache, tx.issuer_pub, tx.txid, tx.sig)) return Reason::BadSignature;
  return Reason::Ok;
}

std::uint64_t Chain::height() const {
  if (blocks_.empty()) throw std::logic_error("chain has no genesis block");
  return blocks_.size() - 1;
}

Reason Chain::validate_transaction(const Transaction& tx, crypto::SignatureCache* cache,
                                   const Scratch* scratch) const {
  if (Reason r = check_tx_context_free(tx, cache); r != Reason::Ok) return r;

  auto csp_known = [&](const Address& a) {
    return csps_.count(a) != 0 || (scratch != nullptr && scratch->csps.count(a) != 0);
  };

  switch (tx.kind) {
    case TxKind::Token: {
      const AccessToken& token = tx.outputs[0].token;
      if (tokens_.count(token.token_id) != 0 ||
          (scratch != nullptr && scratch->tokens.count(token.token_id) != 0)) {
        return Reason::DuplicateToken;
      }
      break;
    }
    default:
      break;
  }
  if (txids_.count(tx.txid) != 0 || (scratch != nullptr && scratch->txids.count(tx.txid) != 0)) {
    return Reason::DuplicateTx;
  }

  switch (tx.kind) {
    case TxKind::Token: {
      const AccessToken& token = tx.outputs[0].token;
      const std::pair<Address, std::uint64_t> nonce{token.issuer, token.nonce};
      if (nonces_.count(nonce) != 0 || (scratch != nullptr && scratch->nonces.count(nonce) != 0)) {
        return Reason::DuplicateNonce;
      }
      if (!csp_known(token.issuer)) return Reason::UnknownIssuer;
      if (!csp_known(token.audience)) return Reason::UnknownAudience;
      return Reason::Ok;
    }
    case TxKind::Feedback: {
      const FeedbackPayload fb = *FeedbackPayload::decode(tx.payload);
      if (!csp_known(fb.rater)) return Reason::UnknownRater;
      std::optional<AccessToken> token = lookup_token(fb.token_id);
      if (!token && scratch != nullptr) {
        if (auto it = scratch->tokens.find(fb.token_id); it != scratch->tokens.end()) {
          token = it->second;
        }
      }
      if (!token) return Reason::UnknownToken;
      if (!is_participant(fb, *token)) return Reason::NotParticipant;
      const std::pair<Digest, FeedbackRole> key{fb.token_id, fb.role};
      if (feedback_.count(key) != 0 || (scratch != nullptr && scratch->feedback.count(key) != 0)) {
        return Reason::DuplicateFeedback;
      }
      return Reason::Ok;
    }
    case TxKind::Register: {
      if (csp_known(crypto::address_of(tx.issuer_pub))) return Reason::DuplicateCsp;
      return Reason::Ok;
    }
  }
  return Reason::Malformed;
}

TxVerdict Chain::apply_genesis(const Block& genesis, crypto::SignatureCache* cache) {
  if (!blocks_.empty()) throw std::logic_error("genesis already applied");
  const auto& h = genesis.header;
  if (h.height != 0 || !h.prev_block.is_zero()) return {Reason::BadGenesis, {}, {}};
  if (compute_tx_root(genesis.txs) != h.tx_root) return {Reason::BadTxRoot, {}, {}};
  Scratch scratch;
  for (std::size_t i = 0; i < genesis.txs.size(); ++i) {
    const Transaction& tx = genesis.txs[i];
    if (tx.kind != TxKind::Register) return {Reason::BadGenesis, tx.txid, i};
    if (Reason r = validate_transaction(tx, cache, &scratch); r != Reason::Ok) {
      return {r, tx.txid, i};
    }
    add_to_scratch(scratch, tx, 0);
  }
  blocks_.push_back(genesis);
  index_block(genesis);
  return {};
}

TxVerdict Chain::apply_block(const Block& block, crypto::SignatureCache* cache) {
  if (blocks_.empty()) return apply_genesis(block, cache);
  const auto& h = block.header;
  if (h.height != height() + 1 || h.prev_block != tip().hash()) return {Reason::BadLink, {}, {}};
  if (compute_tx_root(block.txs) != h.tx_root) return {Reason::BadTxRoot, {}, {}};
  Scratch scratch;
  for (std::size_t i = 0; i < block.txs.size(); ++i) {
    const Transaction& tx = block.txs[i];
    if (Reason r = validate_transaction(tx, cache, &scratch); r != Reason::Ok) {
      return {r, tx.txid, i};
    }
    add_to_scratch(scratch, tx, h.height);
  }
  blocks_.push_back(block);
  index_block(block);
  return {};
}

void Chain::index_block(const Block& block) {
  const std::uint64_t height = block.header.height;
  for (std::size_t i = 0; i < block.txs.size(); ++i) {
    const Transaction& tx = block.txs[i];
    txids_.insert(tx.txid);
    switch (tx.kind) {
      case TxKind::Token: {
        const AccessToken& token = tx.outputs[0].token;
        tokens_[token.token_id] = TokenRecord{height, tx.txid, static_cast<std::uint32_t>(i)};
        nonces_.insert({token.issuer, token.nonce});
        break;
      }
      case TxKind::Feedback: {
        auto fb = FeedbackPayload::decode(tx.payload);
        feedback_.insert({fb->token_id, fb->role});
        break;
      }
      case TxKind::Register: {
        auto reg = RegisterPayload::decode(tx.payload);
        CspRecord rec{reg->csp_pub, crypto::address_of(reg->csp_pub), reg->omega1, reg->omega2,
                      reg->stake, height};
        csps_.emplace(rec.address, rec);
        csp_order_.push_back(rec.address);
        break;
      }
    }
  }
}

Block Chain::pop_block() {
  if (blocks_.size() <= 1) throw std::logic_error("cannot pop the genesis block");
  Block block = std::move(blocks_.back());
  blocks_.pop_back();
  for (auto it = block.txs.rbegin(); it != block.txs.rend(); ++it) {
    const Transaction& tx = *it;
    txids_.erase(tx.txid);
    switch (tx.kind) {
      case TxKind::Token: {
        const AccessToken& token = tx.outputs[0].token;
        tokens_.erase(token.token_id);
        nonces_.erase({token.issuer, token.nonce});
        break;
      }
      case TxKind::Feedback: {
        auto fb = FeedbackPayload::decode(tx.payload);
        feedback_.erase({fb->token_id, fb->role});
        break;
      }
      case TxKind::Register: {
        const Address addr = crypto::address_of(tx.issuer_pub);
        csps_.erase(addr);
        csp_order_.pop_back();
        break;
      }
    }
  }
  return block;
}

Chain::Packed Chain::pack(std::span<const Transaction> candidates, std::size_t max_txs,
                          crypto::SignatureCache* cache) const {
  Packed out;
  Scratch scratch;
  const std::uint64_t next_height = blocks_.empty() ? 0 : height() + 1;
  for (const Transaction& tx : candidates) {
    if (out.selected.size() >= max_txs) break;
    Reason r = validate_transaction(tx, cache, &scratch);
    if (r == Reason::Ok) {
      add_to_scratch(scratch, tx, next_height);
      out.selected.push_back(tx);
    } else {
      out.rejected.emplace_back(tx.txid, r);
    }
  }
  return out;
}

std::optional<AccessToken> Chain::lookup_token(const Digest& token_id) const {
  const Transaction* tx = token_transaction(token_id);
  if (tx == nullptr) return std::nullopt;
  return tx->outputs[0].token;
}

std::optional<TokenRecord> Chain::token_record(const Digest& token_id) const {
  auto it = tokens_.find(token_id);
  if (it == tokens_.end()) return std::nullopt;
  return it->second;
}

const Transaction* Chain::token_transaction(const Digest& token_id) const {
  auto it = tokens_.find(token_id);
  if (it == tokens_.end()) return nullptr;
  return &blocks_.at(it->second.height).txs.at(it->second.position);
}

const CspRecord* Chain::find_csp(const Address& address) const {
  auto it = csps_.find(address);
  return it == csps_.end() ? nullptr : &it->second;
}

}  // namespace ctsim::ledger
