#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ctsim/fixed.hpp"
#include "ctsim/ledger.hpp"

namespace ctsim::ledger {
class Chain;
}

namespace ctsim::trust {

using crypto::Address;

/// Rating a foreign CSP gives a visiting user.
enum class CredLabel : std::uint8_t { VeryBad = 0, Bad, Medium, Good, Excellent };

/// Rating a user (through the home CSP) gives the foreign CSP.
enum class SatLabel : std::uint8_t {
  FullyDissatisfied = 0,
  Dissatisfied,
  PartiallySatisfied,
  Satisfied,
  FullySatisfied
};

/// Half-open bucket (lo, hi]; the lowest bucket also admits lo itself.
struct Bucket {
  Fixed lo;
  Fixed hi;
  bool closed_below = false;

  bool contains(Fixed x) const {
    return (closed_below ? x >= lo : x > lo) && x <= hi;
  }
};

Fixed bucketize(CredLabel label);
Fixed bucketize(SatLabel label);
Bucket bucket_of(CredLabel label);
Bucket bucket_of(SatLabel label);

std::string_view label_name(CredLabel label);
std::string_view label_name(SatLabel label);
/// Accepts names like "very_bad" or "excellent".
std::optional<CredLabel> parse_cred_label(std::string_view name);
/// Accepts names like "fully_dissatisfied" or "satisfied".
std::optional<SatLabel> parse_sat_label(std::string_view name);

/// The three updates round to the nearest ulp; floor would let the
/// iterates settle up to two ulps short of their fixed points.

/// (trust_F * cred_curr + prev) / 2
Fixed cred_update(Fixed prev, Fixed trust_f, Fixed cred_curr);
/// (auth_curr + prev) / 2
Fixed auth_update(Fixed prev, Fixed auth_curr);
/// The foreign CSP's rating of the user is the home CSP's observation.
inline Fixed auth_curr_from_feedback(Fixed cred_curr_of_user) { return cred_curr_of_user; }
/// cred_u * sat_curr + (1 - cred_u) * prev
Fixed sat_update(Fixed prev, Fixed cred_u, Fixed sat_curr);

struct Weights {
  Fixed omega1;  // satisfaction
  Fixed omega2;  // authentication

  friend bool operator==(const Weights&, const Weights&) = default;
};

/// Component-wise means; throws std::invalid_argument on an empty set.
Weights global_weights(std::span<const Weights> registrations);

/// (w1 * sat + w2 * auth) / (w1 + w2); throws if both weights are zero.
Fixed overall_trust(Fixed sat, Fixed auth, Weights w);

struct Score {
  Fixed value;
  std::uint64_t count = 0;

  friend bool operator==(const Score&, const Score&) = default;
};

using PairKey = std::pair<Address, Address>;

/// Pairwise scores, registered weights and the derived per-CSP trust.
///
/// cred is keyed (user, foreign), auth (home, foreign), sat (foreign, home):
/// the scored party comes first so that the means are range scans.
class TrustState {
 public:
  static constexpr Fixed kInitialCred = Fixed::one();
  static constexpr Fixed kInitialAuth = Fixed::zero();
  static constexpr Fixed kInitialSat = Fixed::zero();

  void register_csp(const Address& csp, Weights declared);
  bool is_registered(const Address& csp) const { return declared_.count(csp) != 0; }

  /// Folds one on-chain rating: a foreign-role rating updates the user's
  /// credibility, then the home CSP's authentication score; a home-role
  /// rating updates satisfaction with the foreign CSP.
  void apply_feedback(const ledger::FeedbackPayload& feedback);

  /// Starts a new epoch: pairwise scores go back to their initial values.
  void start_epoch(std::uint64_t epoch);
  std::uint64_t epoch() const { return epoch_; }

  Fixed cred_user(const Address& user) const;
  Fixed auth_score(const Address& home) const;
  Fixed sat_score(const Address& foreign) const;
  /// Cached overall trust; zero for an unregistered address.
  Fixed trust(const Address& csp) const;
  /// Recomputes overall trust from the scores, bypassing the cache.
  Fixed compute_trust(const Address& csp) const;
  /// Whether any authentication or satisfaction data exists for the CSP.
  bool has_observations(const Address& csp) const;

  Weights weights() const;
  std::size_t csp_count() const { return declared_.size(); }
  const std::map<Address, Weights>& declared() const { return declared_; }
  const std::map<PairKey, Score>& cred_scores() const { return cred_; }
  const std::map<PairKey, Score>& auth_scores() const { return auth_; }
  const std::map<PairKey, Score>& sat_scores() const { return sat_; }
  const std::map<Address, Fixed>& trust_cache() const { return cache_; }
  /// Users with at least one credibility rating.
  std::vector<Address> rated_users() const;

  friend bool operator==(const TrustState& a, const TrustState& b) {
    return a.epoch_ == b.epoch_ && a.declared_ == b.declared_ && a.cred_ == b.cred_ &&
           a.auth_ == b.auth_ && a.sat_ == b.sat_ && a.cache_ == b.cache_;
  }

 private:
  void refresh_cache();

  std::uint64_t epoch_ = 0;
  std::map<Address, Weights> declared_;
  std::map<PairKey, Score> cred_;
  std::map<PairKey, Score> auth_;
  std::map<PairKey, Score> sat_;
  std::map<Address, Fixed> cache_;
};

/// Epoch index of a block height; epoch_blocks == 0 means a single epoch.
std::uint64_t epoch_of(std::uint64_t height, std::uint64_t epoch_blocks);

/// Applies the trust-relevant transactions of one block in order.
void apply_block(TrustState& state, const ledger::Block& block, std::uint64_t epoch_blocks);

/// Folds every registration and rating of the canonical chain in order.
TrustState replay_from_chain(const ledger::Chain& chain, std::uint64_t epoch_blocks = 0);

}  // namespace ctsim::trust
