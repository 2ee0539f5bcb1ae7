#include "ctsim/trust.hpp"

#include <array>
#include <stdexcept>

#include "ctsim/chain.hpp"

namespace ctsim::trust {
namespace {

constexpr std::int64_t S = Fixed::kScale;

constexpr Fixed milli(std::int64_t thousandths) { return Fixed::from_raw(thousandths * (S / 1000)); }

constexpr std::array<std::string_view, 5> kCredNames = {"very_bad", "bad", "medium", "good",
                                                       "excellent"};
constexpr std::array<std::string_view, 5> kSatNames = {
    "fully_dissatisfied", "dissatisfied", "partially_satisfied", "satisfied", "fully_satisfied"};

constexpr std::array<Fixed, 5> kCredMid = {milli(100), milli(300), milli(500), milli(700),
                                           milli(900)};
constexpr std::array<Fixed, 5> kSatMid = {milli(100), milli(325), milli(525), milli(700),
                                          milli(900)};
constexpr std::array<Fixed, 6> kCredEdges = {milli(0),   milli(200), milli(400),
                                             milli(600), milli(800), milli(1000)};
constexpr std::array<Fixed, 6> kSatEdges = {milli(0),   milli(200), milli(450),
                                            milli(600), milli(800), milli(1000)};

template <typename Map>
Fixed mean_for(const Map& scores, const Address& subject, Fixed empty_value) {
  Int128 sum = 0;
  std::int64_t n = 0;
  for (auto it = scores.lower_bound({subject, Address{}});
       it != scores.end() && it->first.first == subject; ++it) {
    sum += it->second.value.raw();
    ++n;
  }
  if (n == 0) return empty_value;
  return Fixed::from_raw(floor_div(sum, n));
}

template <typename Map>
bool any_for(const Map& scores, const Address& subject) {
  auto it = scores.lower_bound({subject, Address{}});
  return it != scores.end() && it->first.first == subject;
}

}  // namespace

Fixed bucketize(CredLabel label) { return kCredMid.at(static_cast<std::size_t>(label)); }
Fixed bucketize(SatLabel label) { return kSatMid.at(static_cast<std::size_t>(label)); }

Bucket bucket_of(CredLabel label) {
  const auto i = static_cast<std::size_t>(label);
  return {kCredEdges.at(i), kCredEdges.at(i + 1), i == 0};
}

Bucket bucket_of(SatLabel label) {
  const auto i = static_cast<std::size_t>(label);
  return {kSatEdges.at(i), kSatEdges.at(i + 1), i == 0};
}

std::string_view label_name(CredLabel label) {
  return kCredNames.at(static_cast<std::size_t>(label));
}
std::string_view label_name(SatLabel label) { return kSatNames.at(static_cast<std::size_t>(label)); }

std::optional<CredLabel> parse_cred_label(std::string_view name) {
  for (std::size_t i = 0; i < kCredNames.size(); ++i) {
    if (kCredNames[i] == name) return static_cast<CredLabel>(i);
  }
  return std::nullopt;
}

std::optional<SatLabel> parse_sat_label(std::string_view name) {
  for (std::size_t i = 0; i < kSatNames.size(); ++i) {
    if (kSatNames[i] == name) return static_cast<SatLabel>(i);
  }
  return std::nullopt;
}

Fixed cred_update(Fixed prev, Fixed trust_f, Fixed cred_curr) {
  const Int128 num = static_cast<Int128>(trust_f.raw()) * cred_curr.raw() +
                     static_cast<Int128>(prev.raw()) * S;
  return Fixed::from_raw(round_div(num, static_cast<Int128>(2) * S));
}

Fixed auth_update(Fixed prev, Fixed auth_curr) {
  return Fixed::from_raw(round_div(static_cast<Int128>(auth_curr.raw()) + prev.raw(), 2));
}

Fixed sat_update(Fixed prev, Fixed cred_u, Fixed sat_curr) {
  const Int128 num = static_cast<Int128>(cred_u.raw()) * sat_curr.raw() +
                     static_cast<Int128>(S - cred_u.raw()) * prev.raw();
  return Fixed::from_raw(round_div(num, S));
}

Weights global_weights(std::span<const Weights> registrations) {
  if (registrations.empty()) {
    throw std::invalid_argument("global weights need at least one registered CSP");
  }
  Int128 w1 = 0;
  Int128 w2 = 0;
  for (const Weights& w : registrations) {
    w1 += w.omega1.raw();
    w2 += w.omega2.raw();
  }
  const auto n = static_cast<Int128>(registrations.size());
  return {Fixed::from_raw(floor_div(w1, n)), Fixed::from_raw(floor_div(w2, n))};
}

Fixed overall_trust(Fixed sat, Fixed auth, Weights w) {
  const Int128 den = static_cast<Int128>(w.omega1.raw()) + w.omega2.raw();
  if (den <= 0) throw std::invalid_argument("trust weights sum to zero");
  const Int128 num = static_cast<Int128>(w.omega1.raw()) * sat.raw() +
                     static_cast<Int128>(w.omega2.raw()) * auth.raw();
  return Fixed::from_raw(floor_div(num, den));
}

void TrustState::register_csp(const Address& csp, Weights declared) {
  declared_[csp] = declared;
  refresh_cache();
}

void TrustState::apply_feedback(const ledger::FeedbackPayload& fb) {
  if (fb.role == ledger::FeedbackRole::Foreign) {
    const Address& foreign = fb.rater;
    const Address& home = fb.subject;
    const Fixed x = bucketize(static_cast<CredLabel>(fb.label));
    const Fixed trust_f = trust(foreign);

    Score& cred = cred_.try_emplace({fb.user, foreign}, Score{kInitialCred, 0}).first->second;
    cred.value = cred_update(cred.value, trust_f, x);
    ++cred.count;

    Score& auth = auth_.try_emplace({home, foreign}, Score{kInitialAuth, 0}).first->second;
    auth.value = auth_update(auth.value, auth_curr_from_feedback(x));
    ++auth.count;
  } else {
    const Address& home = fb.rater;
    const Address& foreign = fb.subject;
    const Fixed x = bucketize(static_cast<SatLabel>(fb.label));
    const Fixed cred_u = cred_user(fb.user);

    Score& sat = sat_.try_emplace({foreign, home}, Score{kInitialSat, 0}).first->second;
    sat.value = sat_update(sat.value, cred_u, x);
    ++sat.count;
  }
  refresh_cache();
}

void TrustState::start_epoch(std::uint64_t epoch) {
  epoch_ = epoch;
  cred_.clear();
  auth_.clear();
  sat_.clear();
  refresh_cache();
}

Fixed TrustState::cred_user(const Address& user) const { return mean_for(cred_, user, kInitialCred); }

Fixed TrustState::auth_score(const Address& home) const { return mean_for(auth_, home, kInitialAuth); }

Fixed TrustState::sat_score(const Address& foreign) const {
  return mean_for(sat_, foreign, kInitialSat);
}

Fixed TrustState::trust(const Address& csp) const {
  auto it = cache_.find(csp);
  return it == cache_.end() ? Fixed::zero() : it->second;
}

Fixed TrustState::compute_trust(const Address& csp) const {
  if (!is_registered(csp)) return Fixed::zero();
  return overall_trust(sat_score(csp), auth_score(csp), weights());
}

bool TrustState::has_observations(const Address& csp) const {
  return any_for(auth_, csp) || any_for(sat_, csp);
}

Weights TrustState::weights() const {
  std::vector<Weights> all;
  all.reserve(declared_.size());
  for (const auto& [addr, w] : declared_) all.push_back(w);
  return global_weights(all);
}

std::vector<Address> TrustState::rated_users() const {
  std::vector<Address> users;
  for (const auto& [key, score] : cred_) {
    if (users.empty() || users.back() != key.first) users.push_back(key.first);
  }
  return users;
}

void TrustState::refresh_cache() {
  cache_.clear();
  if (declared_.empty()) return;
  const Weights w = weights();
  for (const auto& [addr, declared] : declared_) {
    cache_[addr] = overall_trust(sat_score(addr), auth_score(addr), w);
  }
}

std::uint64_t epoch_of(std::uint64_t height, std::uint64_t epoch_blocks) {
  return epoch_blocks == 0 ? 0 : height / epoch_blocks;
}

void apply_block(TrustState& state, const ledger::Block& block, std::uint64_t epoch_blocks) {
  const std::uint64_t epoch = epoch_of(block.header.height, epoch_blocks);
  if (epoch != state.epoch()) state.start_epoch(epoch);
  for (const auto& tx : block.txs) {
    if (tx.kind == ledger::TxKind::Register) {
      auto reg = ledger::RegisterPayload::decode(tx.payload);
      state.register_csp(crypto::address_of(reg->csp_pub), {reg->omega1, reg->omega2});
    } else if (tx.kind == ledger::TxKind::Feedback) {
      state.apply_feedback(*ledger::FeedbackPayload::decode(tx.payload));
    }
  }
}

TrustState replay_from_chain(const ledger::Chain& chain, std::uint64_t epoch_blocks) {
  TrustState state;
  for (const auto& block : chain.blocks()) {
    apply_block(state, block, epoch_blocks);
  }
  return state;
}

}  // namespace ctsim::trust
