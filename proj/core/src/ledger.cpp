#include "ctsim/ledger.hpp"

namespace ctsim::ledger {
namespace {

constexpr std::size_t kMaxPrivileges = 64;
constexpr std::size_t kMaxPrivilegeLength = 64;
constexpr std::size_t kMaxVector = 1024;

void write_claims(ByteWriter& out, const AccessToken& t) {
  out.fixed(t.user_pseudonym);
  out.fixed(t.issuer);
  out.fixed(t.audience);
  out.fixed(t.resource);
  out.u16(static_cast<std::uint16_t>(t.privileges.size()));
  for (const auto& p : t.privileges) {
    out.u8(static_cast<std::uint8_t>(p.size()));
    out.raw(as_bytes(p));
  }
  out.i64(t.issued_at);
  out.i64(t.expires_at);
  out.u64(t.nonce);
}

void read_claims(ByteReader& in, AccessToken& t) {
  t.user_pseudonym = in.fixed<Address>();
  t.issuer = in.fixed<Address>();
  t.audience = in.fixed<Address>();
  t.resource = in.fixed<Address>();
  const std::uint16_t count = in.u16();
  if (count > kMaxPrivileges) throw DecodeError("too many privileges");
  t.privileges.clear();
  for (std::uint16_t i = 0; i < count; ++i) {
    const std::uint8_t len = in.u8();
    if (len == 0 || len > kMaxPrivilegeLength) throw DecodeError("bad privilege length");
    auto raw = in.raw(len);
    for (std::uint8_t c : raw) {
      if (c < 0x21 || c > 0x7e) throw DecodeError("privilege is not printable ASCII");
    }
    t.privileges.emplace_back(raw.begin(), raw.end());
  }
  t.issued_at = in.i64();
  t.expires_at = in.i64();
  t.nonce = in.u64();
}

void write_ciphertext(ByteWriter& out, const crypto::Ciphertext& ct) {
  out.fixed(ct.ephemeral_pub);
  out.raw(ct.nonce);
  out.var(ct.body);
  out.raw(ct.tag);
}

crypto::Ciphertext read_ciphertext(ByteReader& in) {
  crypto::Ciphertext ct;
  ct.ephemeral_pub = in.fixed<PublicKey>();
  auto nonce = in.raw(ct.nonce.size());
  std::copy(nonce.begin(), nonce.end(), ct.nonce.begin());
  ct.body = in.var(1u << 16);
  auto tag = in.raw(ct.tag.size());
  std::copy(tag.begin(), tag.end(), ct.tag.begin());
  return ct;
}

void write_body(ByteWriter& out, const Transaction& tx) {
  out.u8(static_cast<std::uint8_t>(tx.kind));
  out.u16(tx.n_in);
  for (const auto& in : tx.inputs) {
    out.u32(in.idx);
    out.fixed(in.ref_in);
    write_ciphertext(out, in.enc_user);
    out.fixed(in.resource);
  }
  out.u16(tx.n_out);
  for (const auto& o : tx.outputs) {
    out.u32(o.idx);
    out.fixed(o.ref_out);
    out.fixed(o.token.token_id);
    write_claims(out, o.token);
    out.fixed(o.recipient);
  }
  out.fixed(tx.prev_tx);
  out.var(tx.payload);
  out.fixed(tx.issuer_pub);
}

void write_header_unsigned(ByteWriter& out, const BlockHeader& h) {
  out.u64(h.height);
  out.fixed(h.prev_block);
  out.fixed(h.tx_root);
  out.i64(h.timestamp);
  out.fixed(h.generator_pub);
  out.fixed(h.prf);
  out.i64(h.base_target.raw());
}

}  // namespace

Bytes AccessToken::claims_bytes() const {
  ByteWriter out;
  write_claims(out, *this);
  return out.take();
}

AccessToken seal_token(AccessToken token) {
  token.token_id = token.compute_id();
  return token;
}

Bytes FeedbackPayload::encode() const {
  ByteWriter out;
  out.fixed(rater);
  out.fixed(subject);
  out.fixed(user);
  out.u8(label);
  out.u8(static_cast<std::uint8_t>(role));
  out.fixed(token_id);
  return out.take();
}

std::optional<FeedbackPayload> FeedbackPayload::decode(std::span<const std::uint8_t> bytes) {
  try {
    ByteReader in(bytes);
    FeedbackPayload p;
    p.rater = in.fixed<Address>();
    p.subject = in.fixed<Address>();
    p.user = in.fixed<Address>();
    p.label = in.u8();
    const std::uint8_t role = in.u8();
    if (role > 1) return std::nullopt;
    p.role = static_cast<FeedbackRole>(role);
    p.token_id = in.fixed<Digest>();
    in.expect_done();
    return p;
  } catch (const DecodeError&) {
    return std::nullopt;
  }
}

Bytes RegisterPayload::encode() const {
  ByteWriter out;
  out.fixed(csp_pub);
  out.i64(omega1.raw());
  out.i64(omega2.raw());
  out.i64(stake.raw());
  return out.take();
}

std::optional<RegisterPayload> RegisterPayload::decode(std::span<const std::uint8_t> bytes) {
  try {
    ByteReader in(bytes);
    RegisterPayload p;
    p.csp_pub = in.fixed<PublicKey>();
    p.omega1 = Fixed::from_raw(in.i64());
    p.omega2 = Fixed::from_raw(in.i64());
    p.stake = Fixed::from_raw(in.i64());
    in.expect_done();
    return p;
  } catch (const DecodeError&) {
    return std::nullopt;
  }
}

Bytes canonical_serialize(const Transaction& tx) {
  ByteWriter out;
  write_body(out, tx);
  return out.take();
}

Digest Transaction::compute_txid() const { return crypto::hash(canonical_serialize(*this)); }

void write_tx(ByteWriter& out, const Transaction& tx) {
  write_body(out, tx);
  out.fixed(tx.txid);
  out.fixed(tx.sig);
}

Bytes serialize_tx(const Transaction& tx) {
  ByteWriter out;
  write_tx(out, tx);
  return out.take();
}

Transaction read_tx(ByteReader& in) {
  Transaction tx;
  const std::uint8_t kind = in.u8();
  if (kind < 1 || kind > 3) throw DecodeError("unknown transaction kind");
  tx.kind = static_cast<TxKind>(kind);
  tx.n_in = in.u16();
  if (tx.n_in > kMaxVector) throw DecodeError("too many inputs");
  for (std::uint16_t i = 0; i < tx.n_in; ++i) {
    TxInput input;
    input.idx = in.u32();
    input.ref_in = in.fixed<Digest>();
    input.enc_user = read_ciphertext(in);
    input.resource = in.fixed<Address>();
    tx.inputs.push_back(std::move(input));
  }
  tx.n_out = in.u16();
  if (tx.n_out > kMaxVector) throw DecodeError("too many outputs");
  for (std::uint16_t i = 0; i < tx.n_out; ++i) {
    TxOutput output;
    output.idx = in.u32();
    output.ref_out = in.fixed<Digest>();
    output.token.token_id = in.fixed<Digest>();
    read_claims(in, output.token);
    output.recipient = in.fixed<Address>();
    tx.outputs.push_back(std::move(output));
  }
  tx.prev_tx = in.fixed<Digest>();
  tx.payload = in.var(4096);
  tx.issuer_pub = in.fixed<PublicKey>();
  tx.txid = in.fixed<Digest>();
  tx.sig = in.fixed<Signature>();
  return tx;
}

Transaction deserialize_tx(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes);
  Transaction tx = read_tx(in);
  in.expect_done();
  return tx;
}

void seal_transaction(Transaction& tx, const crypto::KeyPair& issuer) {
  tx.issuer_pub = issuer.public_key;
  tx.n_in = static_cast<std::uint16_t>(tx.inputs.size());
  tx.n_out = static_cast<std::uint16_t>(tx.outputs.size());
  tx.txid = tx.compute_txid();
  tx.sig = crypto::sign(issuer, tx.txid);
}

Transaction build_token_tx(const crypto::KeyPair& issuer, std::span<const std::uint8_t> user_info,
                           const Address& resource, const PublicKey& recipient_key,
                           const AccessToken& token, const TxLinks& links, Rng& rng) {
  const Address recipient = crypto::address_of(recipient_key);
  if (token.issuer != crypto::address_of(issuer.public_key)) {
    throw BuildError("token issuer does not match the signing key");
  }
  if (token.audience != recipient) {
    throw BuildError("token audience does not match the recipient");
  }
  if (token.expires_at <= token.issued_at) {
    throw BuildError("token expires before it is issued");
  }
  Transaction tx;
  tx.kind = TxKind::Token;
  TxInput input;
  input.idx = 0;
  input.ref_in = links.prev_io;
  input.enc_user = crypto::encrypt_for(recipient_key, user_info, rng);
  input.resource = resource;
  tx.inputs.push_back(std::move(input));
  TxOutput output;
  output.idx = 0;
  output.ref_out = links.prev_io;
  output.token = seal_token(token);
  output.recipient = recipient;
  tx.outputs.push_back(std::move(output));
  tx.prev_tx = links.prev_tx;
  seal_transaction(tx, issuer);
  return tx;
}

Transaction build_feedback_tx(const crypto::KeyPair& rater, const FeedbackPayload& payload,
                              const Digest& prev_tx) {
  Transaction tx;
  tx.kind = TxKind::Feedback;
  tx.prev_tx = prev_tx;
  tx.payload = payload.encode();
  seal_transaction(tx, rater);
  return tx;
}

Transaction build_register_tx(const crypto::KeyPair& csp, Fixed omega1, Fixed omega2, Fixed stake,
                              const Digest& prev_tx) {
  Transaction tx;
  tx.kind = TxKind::Register;
  tx.prev_tx = prev_tx;
  tx.payload = RegisterPayload{csp.public_key, omega1, omega2, stake}.encode();
  seal_transaction(tx, csp);
  return tx;
}

Bytes BlockHeader::unsigned_bytes() const {
  ByteWriter out;
  write_header_unsigned(out, *this);
  return out.take();
}

Digest compute_tx_root(std::span<const Transaction> txs) {
  Bytes data;
  data.reserve(txs.size() * 32);
  for (const auto& tx : txs) {
    data.insert(data.end(), tx.txid.bytes.begin(), tx.txid.bytes.end());
  }
  return crypto::hash(data);
}

Bytes serialize_block(const Block& block) {
  ByteWriter out;
  write_header_unsigned(out, block.header);
  out.fixed(block.header.sig);
  out.u32(static_cast<std::uint32_t>(block.txs.size()));
  for (const auto& tx : block.txs) {
    out.var(serialize_tx(tx));
  }
  return out.take();
}

Block deserialize_block(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes);
  Block block;
  auto& h = block.header;
  h.height = in.u64();
  h.prev_block = in.fixed<Digest>();
  h.tx_root = in.fixed<Digest>();
  h.timestamp = in.i64();
  h.generator_pub = in.fixed<PublicKey>();
  h.prf = in.fixed<Digest>();
  h.base_target = Fixed::from_raw(in.i64());
  h.sig = in.fixed<Signature>();
  const std::uint32_t count = in.u32();
  if (count > 100000) throw DecodeError("too many transactions");
  for (std::uint32_t i = 0; i < count; ++i) {
    const Bytes raw = in.var();
    block.txs.push_back(deserialize_tx(raw));
  }
  in.expect_done();
  return block;
}

}  // namespace ctsim::ledger
