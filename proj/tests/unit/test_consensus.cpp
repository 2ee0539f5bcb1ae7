#include <gtest/gtest.h>

#include "ctsim/consensus.hpp"
#include "support.hpp"

namespace ctsim::consensus {
namespace {

using testing::Federation3;
using testing::fx;

TEST(Consensus, PrefixValueMatchesReference) {
  const Digest d = crypto::hash("abc");
  EXPECT_EQ(prefix_value(d, 64).raw(), 728394910590);
  EXPECT_EQ(prefix_value(d, 128).raw(), 728394910590);
  EXPECT_EQ(prefix_value(Digest{}, 64), Fixed::zero());
  Digest ones;
  ones.bytes.fill(0xff);
  EXPECT_EQ(prefix_value(ones, 64).raw(), Fixed::kScale - 1);
}

TEST(Consensus, PrefixBelowIsExact) {
  const Digest d = crypto::hash("abc");
  // The floored value sits just below the true prefix, so it is not "below" it.
  EXPECT_FALSE(prefix_below(d, 64, Fixed::from_raw(728394910590)));
  EXPECT_TRUE(prefix_below(d, 64, Fixed::from_raw(728394910591)));
  EXPECT_FALSE(prefix_below(Digest{}, 64, Fixed::zero()));
  EXPECT_TRUE(prefix_below(Digest{}, 128, Fixed::ulp()));
}

TEST(Consensus, TimeFactorScalesAndCaps) {
  ConsensusParams p;
  p.time_cap = 4;
  EXPECT_EQ(time_factor(p, 450), fx("1.5"));
  EXPECT_EQ(time_factor(p, 0), Fixed::zero());
  EXPECT_EQ(time_factor(p, -5), Fixed::zero());
  EXPECT_EQ(time_factor(p, 1'000'000), fx("4"));
}

TEST(Consensus, DifficultyMatchesReference) {
  ConsensusParams p;
  p.base_target = fx("0.6");
  EXPECT_EQ(csp_difficulty(p, time_factor(p, 450), fx("0.3"), fx("0.8")).raw(), 216000000000);
  EXPECT_EQ(csp_difficulty(p, fx("64"), Fixed::one(), Fixed::one()),
            Fixed::one() - Fixed::ulp());
  EXPECT_EQ(csp_difficulty(p, fx("3"), fx("0.5"), Fixed::zero()), Fixed::zero());
}

TEST(Consensus, CalibrationMatchesReference) {
  const StakeTrust four[] = {{fx("0.25"), fx("0.5")},
                             {fx("0.25"), fx("0.5")},
                             {fx("0.25"), fx("0.5")},
                             {fx("0.25"), fx("0.5")}};
  EXPECT_EQ(calibrate_base_target(four).raw(), 999999999999);
  const StakeTrust two[] = {{fx("0.5"), fx("0.9")}, {fx("0.5"), fx("0.2")}};
  EXPECT_EQ(calibrate_base_target(two).raw(), 909090909090);
  const StakeTrust none[] = {{fx("0.5"), Fixed::zero()}};
  const Fixed d = calibrate_base_target(none);
  EXPECT_GT(d, Fixed::zero());
  EXPECT_LT(d, Fixed::one());
}

TEST(Consensus, ParamsEncodingIsCanonicalAndStrict) {
  ConsensusParams p;
  p.base_target = fx("0.75");
  p.epoch_blocks = 40;
  p.trust_overrides[crypto::address_of_label("x")] = Fixed::zero();
  const Bytes enc = p.encode();
  EXPECT_EQ(ConsensusParams::decode(enc), p);
  EXPECT_EQ(ConsensusParams::decode(enc).encode(), enc);

  std::string text(enc.begin(), enc.end());
  const Bytes spaced = [&] {
    std::string s = text + " ";
    return Bytes(s.begin(), s.end());
  }();
  EXPECT_THROW(ConsensusParams::decode(spaced), DecodeError);
  EXPECT_THROW(ConsensusParams::decode(as_bytes("{}")), DecodeError);
  EXPECT_THROW(ConsensusParams::decode(as_bytes("not json")), DecodeError);
}

TEST(Consensus, ParamsValidation) {
  ConsensusParams p;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  EXPECT_NO_THROW(p.validate(true));
  p.base_target = fx("0.5");
  EXPECT_NO_THROW(p.validate());
  ConsensusParams bad = p;
  bad.prefix_bits = 32;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = p;
  bad.base_target = Fixed::one();
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = p;
  bad.bootstrap_trust = fx("1.5");
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = p;
  bad.slot_ms = 0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Consensus, GenesisCommitsToParams) {
  Federation3 f;
  EXPECT_EQ(check_genesis(f.genesis, f.params), Reason::Ok);
  ConsensusParams other = f.params;
  other.block_interval_ms = 400;
  EXPECT_EQ(check_genesis(f.genesis, other), Reason::BadGenesis);
  ledger::Block g = f.genesis;
  g.header.timestamp = 5;
  EXPECT_EQ(check_genesis(g, f.params), Reason::BadGenesis);

  const ReplicaState s = genesis_state(f.genesis, f.params);
  EXPECT_EQ(s.height, 0u);
  EXPECT_EQ(s.csps.size(), 3u);
  for (const auto& [addr, csp] : s.csps) {
    EXPECT_EQ(csp.stake, Fixed::ratio(1, 3));
    EXPECT_EQ(consensus_trust(f.params, s, addr), f.params.bootstrap_trust);
  }
}

TEST(Consensus, TrustOverrideWins) {
  Federation3 f;
  f.params.trust_overrides[Federation3::addr(f.b)] = Fixed::zero();
  f.genesis = make_genesis(f.params, f.genesis.txs);
  const ReplicaState s = genesis_state(f.genesis, f.params);
  EXPECT_EQ(consensus_trust(f.params, s, Federation3::addr(f.b)), Fixed::zero());
  EXPECT_EQ(consensus_trust(f.params, s, Federation3::addr(f.a)), f.params.bootstrap_trust);
}

TEST(Consensus, EligibilityIsDeterministicAndMonotoneInTime) {
  Federation3 f;
  const ReplicaState s = genesis_state(f.genesis, f.params);
  const auto& csp = s.csps.at(Federation3::addr(f.a));
  const Fixed t = consensus_trust(f.params, s, Federation3::addr(f.a));
  const Eligibility early = check_eligibility(f.params, csp, t, f.a.public_key, 100);
  const Eligibility later = check_eligibility(f.params, csp, t, f.a.public_key, 5000);
  EXPECT_EQ(early.prf, later.prf);
  EXPECT_EQ(early.prf, crypto::hash_concat(f.a.public_key.span(), csp.prf_old.span()));
  EXPECT_LE(early.d_csp, later.d_csp);
  if (early.eligible) EXPECT_TRUE(later.eligible);
}

TEST(Consensus, ZeroTrustIsNeverEligible) {
  Federation3 f;
  const ReplicaState s = genesis_state(f.genesis, f.params);
  const auto& csp = s.csps.at(Federation3::addr(f.a));
  for (Millis now : {100, 10'000, 1'000'000}) {
    EXPECT_FALSE(check_eligibility(f.params, csp, Fixed::zero(), f.a.public_key, now).eligible);
  }
}

TEST(Consensus, ValidateBlockReasons) {
  Federation3 f;
  const ReplicaState s = genesis_state(f.genesis, f.params);
  const ledger::Block good = testing::mine(f.params, s, f.a, {});
  EXPECT_EQ(validate_block(good, f.params, s), Reason::Ok);

  ledger::Block bad = good;
  bad.header.prev_block.bytes[0] ^= 1;
  EXPECT_EQ(validate_block(bad, f.params, s), Reason::BadLink);
  bad = good;
  bad.header.tx_root.bytes[0] ^= 1;
  EXPECT_EQ(validate_block(bad, f.params, s), Reason::BadTxRoot);
  bad = good;
  bad.header.timestamp = 0;
  EXPECT_EQ(validate_block(bad, f.params, s), Reason::Timestamp);
  bad = good;
  bad.header.base_target = fx("0.5");
  EXPECT_EQ(validate_block(bad, f.params, s), Reason::BadTarget);
  bad = good;
  bad.header.generator_pub = testing::key(99).public_key;
  EXPECT_EQ(validate_block(bad, f.params, s), Reason::UnknownGenerator);
  bad = good;
  bad.header.prf.bytes[0] ^= 1;
  EXPECT_EQ(validate_block(bad, f.params, s), Reason::PrfMismatch);
  bad = good;
  bad.header.sig.bytes[7] ^= 1;
  EXPECT_EQ(validate_block(bad, f.params, s), Reason::BadSignature);

  // Claiming the block earlier than its generator was eligible.
  bad = good;
  bad.header.timestamp = 1;
  bad.header.sig = crypto::sign(f.a, bad.hash());
  const auto& csp = s.csps.at(Federation3::addr(f.a));
  if (!check_eligibility(f.params, csp, f.params.bootstrap_trust, f.a.public_key, 1).eligible) {
    EXPECT_EQ(validate_block(bad, f.params, s), Reason::NotEligible);
  }
}

TEST(Consensus, NextStateTracksGenerator) {
  Federation3 f;
  const ReplicaState s0 = genesis_state(f.genesis, f.params);
  const ledger::Block b1 = testing::mine(f.params, s0, f.b, {});
  const ReplicaState s1 = next_state(s0, b1, f.params);
  EXPECT_EQ(s1.height, 1u);
  EXPECT_EQ(s1.block_hash, b1.hash());
  EXPECT_EQ(s1.timestamp, b1.header.timestamp);
  const auto& gen = s1.csps.at(Federation3::addr(f.b));
  EXPECT_EQ(gen.last_generated_height, 1u);
  EXPECT_EQ(gen.last_generated_ms, b1.header.timestamp);
  EXPECT_EQ(gen.prf_old, b1.header.prf);
  EXPECT_EQ(s1.cumulative_trust, s0.cumulative_trust + f.params.bootstrap_trust);
  EXPECT_EQ(s1.csps.at(Federation3::addr(f.a)), s0.csps.at(Federation3::addr(f.a)));
}

TEST(Consensus, ForkChoiceOrder) {
  Digest low;
  Digest high;
  high.bytes[0] = 1;
  const TipMetrics tall{5, fx("0.1"), high};
  const TipMetrics trusted{4, fx("3"), low};
  const TipMetrics tie_low{4, fx("3"), low};
  const TipMetrics tie_high{4, fx("3"), high};
  EXPECT_TRUE(better_tip(tall, trusted));
  EXPECT_TRUE(better_tip(tie_low, tie_high));
  EXPECT_FALSE(better_tip(tie_high, tie_low));
  EXPECT_FALSE(better_tip(tie_low, tie_low));
  const TipMetrics tips[] = {tie_high, tall, tie_low};
  EXPECT_EQ(resolve(tips), 1u);
  EXPECT_THROW(resolve(std::span<const TipMetrics>()), std::invalid_argument);
}

}  // namespace
}  // namespace ctsim::consensus
