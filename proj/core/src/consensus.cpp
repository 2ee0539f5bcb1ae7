#include "ctsim/consensus.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>

namespace ctsim::consensus {
namespace {

constexpr std::int64_t S = Fixed::kScale;

Fixed parse_fixed_field(const nlohmann::json& j, const char* name) {
  if (!j.contains(name) || !j.at(name).is_string()) {
    throw DecodeError(std::string("params: missing or non-string field ") + name);
  }
  try {
    return Fixed::parse(j.at(name).get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw DecodeError(std::string("params: ") + name + ": " + e.what());
  }
}

template <typename T>
T parse_int_field(const nlohmann::json& j, const char* name) {
  if (!j.contains(name) || !j.at(name).is_number_integer()) {
    throw DecodeError(std::string("params: missing or non-integer field ") + name);
  }
  return j.at(name).get<T>();
}

/// (hi, lo) of the first 128 bits of prf, masked to k_bits.
std::pair<std::uint64_t, std::uint64_t> prefix_words(const Digest& prf, std::uint32_t k_bits) {
  if (k_bits != 64 && k_bits != 128) {
    throw std::invalid_argument("prefix_bits must be 64 or 128");
  }
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;
  for (int i = 0; i < 8; ++i) hi = (hi << 8) | prf.bytes[i];
  if (k_bits == 128) {
    for (int i = 8; i < 16; ++i) lo = (lo << 8) | prf.bytes[i];
  }
  return {hi, lo};
}

/// floor(P * S / 2^64) where P = hi + lo / 2^64, i.e. the prefix scaled
/// by S in units of 2^-64.
UInt128 scaled_prefix(std::uint64_t hi, std::uint64_t lo) {
  const UInt128 lo_part = (static_cast<UInt128>(lo) * static_cast<std::uint64_t>(S)) >> 64;
  return static_cast<UInt128>(hi) * static_cast<std::uint64_t>(S) + lo_part;
}

Digest prf_seed(const Digest& genesis_hash, const Address& address) {
  return crypto::hash_concat(genesis_hash.span(), address.span());
}

void recompute_shares(std::map<Address, CspConsensusState>& csps) {
  Int128 total = 0;
  for (const auto& [addr, c] : csps) total += c.declared_stake.raw();
  for (auto& [addr, c] : csps) {
    c.stake = total > 0 ? Fixed::from_raw(floor_div(static_cast<Int128>(c.declared_stake.raw()) * S,
                                                    total))
                        : Fixed::zero();
  }
}

void register_in_view(ReplicaState& state, const ledger::Block& block) {
  bool changed = false;
  for (const auto& tx : block.txs) {
    if (tx.kind != ledger::TxKind::Register) continue;
    auto reg = ledger::RegisterPayload::decode(tx.payload);
    CspConsensusState c;
    c.account_key = crypto::address_of(reg->csp_pub);
    c.pub = reg->csp_pub;
    c.declared_stake = reg->stake;
    c.last_generated_height = block.header.height;
    c.last_generated_ms = block.header.timestamp;
    c.prf_old = prf_seed(state.genesis_hash, c.account_key);
    state.csps[c.account_key] = c;
    changed = true;
  }
  if (changed) recompute_shares(state.csps);
}

bool touches_trust(const ledger::Block& block) {
  for (const auto& tx : block.txs) {
    if (tx.kind != ledger::TxKind::Token) return true;
  }
  return false;
}

}  // namespace

Bytes ConsensusParams::encode() const {
  nlohmann::json j;
  j["base_target"] = base_target.str();
  j["block_interval_ms"] = block_interval_ms;
  j["bootstrap_trust"] = bootstrap_trust.str();
  j["epoch_blocks"] = epoch_blocks;
  j["max_block_txs"] = max_block_txs;
  j["prefix_bits"] = prefix_bits;
  j["slot_ms"] = slot_ms;
  j["time_cap"] = time_cap;
  nlohmann::json overrides = nlohmann::json::object();
  for (const auto& [addr, t] : trust_overrides) overrides[addr.hex()] = t.str();
  j["trust_overrides"] = overrides;
  const std::string text = j.dump();
  return Bytes(text.begin(), text.end());
}

ConsensusParams ConsensusParams::decode(std::span<const std::uint8_t> bytes) {
  const std::string text(bytes.begin(), bytes.end());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DecodeError(std::string("params: ") + e.what());
  }
  if (!j.is_object() || j.size() != 9) throw DecodeError("params: unexpected field set");
  ConsensusParams p;
  p.base_target = parse_fixed_field(j, "base_target");
  p.block_interval_ms = parse_int_field<Millis>(j, "block_interval_ms");
  p.bootstrap_trust = parse_fixed_field(j, "bootstrap_trust");
  p.epoch_blocks = parse_int_field<std::uint64_t>(j, "epoch_blocks");
  p.max_block_txs = parse_int_field<std::uint32_t>(j, "max_block_txs");
  p.prefix_bits = parse_int_field<std::uint32_t>(j, "prefix_bits");
  p.slot_ms = parse_int_field<Millis>(j, "slot_ms");
  p.time_cap = parse_int_field<std::uint32_t>(j, "time_cap");
  if (!j.contains("trust_overrides") || !j.at("trust_overrides").is_object()) {
    throw DecodeError("params: trust_overrides must be an object");
  }
  for (const auto& [key, value] : j.at("trust_overrides").items()) {
    if (!value.is_string()) throw DecodeError("params: trust override must be a string");
    try {
      p.trust_overrides[Address::from_hex(key)] = Fixed::parse(value.get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw DecodeError(std::string("params: trust override: ") + e.what());
    }
  }
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw DecodeError(std::string("params: ") + e.what());
  }
  const Bytes canonical = p.encode();
  if (!std::equal(canonical.begin(), canonical.end(), bytes.begin(), bytes.end())) {
    throw DecodeError("params: not in canonical form");
  }
  return p;
}

void ConsensusParams::validate(bool allow_uncalibrated) const {
  const bool calibrated = base_target > Fixed::zero() && base_target < Fixed::one();
  if (!calibrated && !(allow_uncalibrated && base_target == Fixed::zero())) {
    throw std::invalid_argument("consensus.base_target must lie strictly between 0 and 1");
  }
  if (prefix_bits != 64 && prefix_bits != 128) {
    throw std::invalid_argument("consensus.prefix_bits must be 64 or 128");
  }
  if (block_interval_ms <= 0) throw std::invalid_argument("consensus.block_interval_ms must be > 0");
  if (slot_ms <= 0) throw std::invalid_argument("consensus.slot_ms must be > 0");
  if (time_cap == 0) throw std::invalid_argument("consensus.time_cap must be > 0");
  if (max_block_txs == 0) throw std::invalid_argument("consensus.max_block_txs must be > 0");
  if (!bootstrap_trust.in_unit_interval()) {
    throw std::invalid_argument("consensus.bootstrap_trust must lie in [0, 1]");
  }
  for (const auto& [addr, t] : trust_overrides) {
    if (!t.in_unit_interval()) throw std::invalid_argument("trust_override must lie in [0, 1]");
  }
}

Fixed prefix_value(const Digest& prf, std::uint32_t k_bits) {
  auto [hi, lo] = prefix_words(prf, k_bits);
  return Fixed::from_raw(static_cast<std::int64_t>(scaled_prefix(hi, lo) >> 64));
}

bool prefix_below(const Digest& prf, std::uint32_t k_bits, Fixed target) {
  if (target <= Fixed::zero()) return false;
  auto [hi, lo] = prefix_words(prf, k_bits);
  // P * S < d * 2^k. Write P * S = A * 2^(k-64) + r with 0 <= r < 2^(k-64);
  // since the right side is a multiple of 2^(k-64), the test is A < d * 2^64.
  const UInt128 a = scaled_prefix(hi, lo);
  const UInt128 rhs = static_cast<UInt128>(static_cast<std::uint64_t>(target.raw())) << 64;
  return a < rhs;
}

Fixed time_factor(const ConsensusParams& params, Millis elapsed_ms) {
  const Millis cap = static_cast<Millis>(params.time_cap) * params.block_interval_ms;
  const Millis clamped = std::clamp<Millis>(elapsed_ms, 0, cap);
  return Fixed::ratio(clamped, params.block_interval_ms);
}

Fixed csp_difficulty(const ConsensusParams& params, Fixed time_csp, Fixed stake_csp, Fixed t_csp) {
  const Fixed product = mul(mul(mul(params.base_target, time_csp), stake_csp), t_csp);
  return product.clamp(Fixed::zero(), Fixed::one() - Fixed::ulp());
}

Eligibility check_eligibility(const ConsensusParams& params, const CspConsensusState& state,
                              Fixed t_csp, const PublicKey& pub, Millis now) {
  Eligibility out;
  out.prf = crypto::hash_concat(pub.span(), state.prf_old.span());
  out.time_csp = time_factor(params, now - state.last_generated_ms);
  out.d_csp = csp_difficulty(params, out.time_csp, state.stake, t_csp);
  out.eligible = prefix_below(out.prf, params.prefix_bits, out.d_csp);
  return out;
}

Fixed consensus_trust(const ConsensusParams& params, const ReplicaState& state,
                      const Address& csp) {
  if (auto it = params.trust_overrides.find(csp); it != params.trust_overrides.end()) {
    return it->second;
  }
  if (!state.trust || !state.trust->has_observations(csp)) return params.bootstrap_trust;
  return state.trust->trust(csp);
}

std::optional<std::pair<Digest, crypto::Signature>> generate_block(
    ledger::Block& candidate, const ConsensusParams& params, const crypto::KeyPair& keys,
    const CspConsensusState& state, Fixed t_csp) {
  const Eligibility e =
      check_eligibility(params, state, t_csp, keys.public_key, candidate.header.timestamp);
  if (!e.eligible) return std::nullopt;
  candidate.header.generator_pub = keys.public_key;
  candidate.header.prf = e.prf;
  candidate.header.base_target = params.base_target;
  candidate.header.sig = crypto::sign(keys, candidate.header.hash());
  return std::make_pair(candidate.header.prf, candidate.header.sig);
}

Reason validate_block(const ledger::Block& block, const ConsensusParams& params,
                      const ReplicaState& parent, crypto::SignatureCache* cache) {
  const auto& h = block.header;
  if (h.height != parent.height + 1 || h.prev_block != parent.block_hash) return Reason::BadLink;
  if (ledger::compute_tx_root(block.txs) != h.tx_root) return Reason::BadTxRoot;
  if (h.timestamp <= parent.timestamp) return Reason::Timestamp;
  if (h.base_target != params.base_target) return Reason::BadTarget;
  const Address generator = crypto::address_of(h.generator_pub);
  auto it = parent.csps.find(generator);
  if (it == parent.csps.end()) return Reason::UnknownGenerator;
  const Fixed t_csp = consensus_trust(params, parent, generator);
  const Eligibility e = check_eligibility(params, it->second, t_csp, h.generator_pub, h.timestamp);
  if (e.prf != h.prf) return Reason::PrfMismatch;
  if (!e.eligible) return Reason::NotEligible;
  if (!crypto::verify_with(cache, h.generator_pub, block.hash(), h.sig)) return Reason::BadSignature;
  return Reason::Ok;
}

ledger::Block make_genesis(const ConsensusParams& params,
                           std::vector<ledger::Transaction> registrations) {
  ledger::Block genesis;
  genesis.txs = std::move(registrations);
  genesis.header.height = 0;
  genesis.header.timestamp = 0;
  genesis.header.tx_root = ledger::compute_tx_root(genesis.txs);
  genesis.header.prf = crypto::hash(params.encode());
  genesis.header.base_target = params.base_target;
  return genesis;
}

Reason check_genesis(const ledger::Block& genesis, const ConsensusParams& params) {
  const auto& h = genesis.header;
  if (h.height != 0 || !h.prev_block.is_zero() || h.timestamp != 0 || !h.generator_pub.is_zero() ||
      !h.sig.is_zero() || h.base_target != params.base_target ||
      h.prf != crypto::hash(params.encode())) {
    return Reason::BadGenesis;
  }
  if (genesis.txs.empty()) return Reason::BadGenesis;
  for (const auto& tx : genesis.txs) {
    if (tx.kind != ledger::TxKind::Register) return Reason::BadGenesis;
  }
  if (ledger::compute_tx_root(genesis.txs) != h.tx_root) return Reason::BadTxRoot;
  return Reason::Ok;
}

ReplicaState genesis_state(const ledger::Block& genesis, const ConsensusParams& params) {
  ReplicaState state;
  state.block_hash = genesis.hash();
  state.genesis_hash = state.block_hash;
  state.height = 0;
  state.timestamp = genesis.header.timestamp;
  register_in_view(state, genesis);
  auto trust_state = std::make_shared<trust::TrustState>();
  trust::apply_block(*trust_state, genesis, params.epoch_blocks);
  state.trust = std::move(trust_state);
  return state;
}

ReplicaState next_state(const ReplicaState& parent, const ledger::Block& block,
                        const ConsensusParams& params) {
  ReplicaState state = parent;
  state.block_hash = block.hash();
  state.height = block.header.height;
  state.timestamp = block.header.timestamp;
  const Address generator = crypto::address_of(block.header.generator_pub);
  state.cumulative_trust += consensus_trust(params, parent, generator);
  if (auto it = state.csps.find(generator); it != state.csps.end()) {
    it->second.prf_old = block.header.prf;
    it->second.last_generated_height = block.header.height;
    it->second.last_generated_ms = block.header.timestamp;
  }
  register_in_view(state, block);
  const bool new_epoch =
      trust::epoch_of(block.header.height, params.epoch_blocks) != parent.trust->epoch();
  if (new_epoch || touches_trust(block)) {
    auto trust_state = std::make_shared<trust::TrustState>(*parent.trust);
    trust::apply_block(*trust_state, block, params.epoch_blocks);
    state.trust = std::move(trust_state);
  }
  return state;
}

bool better_tip(const TipMetrics& a, const TipMetrics& b) {
  if (a.height != b.height) return a.height > b.height;
  if (a.cumulative_trust != b.cumulative_trust) return a.cumulative_trust > b.cumulative_trust;
  return a.hash < b.hash;
}

std::size_t resolve(std::span<const TipMetrics> tips) {
  if (tips.empty()) throw std::invalid_argument("resolve needs at least one fork");
  std::size_t best = 0;
  for (std::size_t i = 1; i < tips.size(); ++i) {
    if (better_tip(tips[i], tips[best])) best = i;
  }
  return best;
}

Fixed calibrate_base_target(std::span<const StakeTrust> csps) {
  Int128 sum = 0;
  for (const auto& c : csps) sum += mul(c.stake, c.trust).raw();
  const Fixed max = Fixed::one() - Fixed::ulp();
  if (sum <= 0) return max;
  const Int128 d = static_cast<Int128>(S) * S / (2 * sum);
  if (d >= S) return max;
  return Fixed::from_raw(static_cast<std::int64_t>(d)).clamp(Fixed::ulp(), max);
}

}  // namespace ctsim::consensus
