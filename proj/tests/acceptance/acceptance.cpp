// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ctsim/chain.hpp"
#include "ctsim/ledger_file.hpp"
#include "ctsim/report.hpp"
#include "ctsim/scenario.hpp"
#include "ctsim/sim.hpp"
#include "ctsim/trust.hpp"
#include "ctsim_tools/commands.hpp"

namespace {

using namespace ctsim;
using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

sim::WorldConfig four_nodes(std::uint64_t seed) {
  sim::WorldConfig cfg;
  cfg.seed = seed;
  for (int i = 0; i < 4; ++i) {
    sim::NodeSpec spec;
    spec.name = "n" + std::to_string(i);
    spec.stake = Fixed::ratio(1, 4);
    cfg.nodes.push_back(spec);
  }
  return cfg;
}

const ledger::Chain& best_chain(const sim::World& world, std::size_t* index = nullptr) {
  std::vector<consensus::TipMetrics> tips;
  for (std::size_t i = 0; i < world.node_count(); ++i) {
    tips.push_back(world.node(i).replica->tip_metrics());
  }
  const std::size_t best = consensus::resolve(tips);
  if (index != nullptr) *index = best;
  return world.node(best).replica->chain();
}

std::map<crypto::Address, std::uint64_t> generator_counts(const ledger::Chain& chain) {
  std::map<crypto::Address, std::uint64_t> counts;
  for (std::size_t h = 1; h < chain.blocks().size(); ++h) {
    ++counts[crypto::address_of(chain.blocks()[h].header.generator_pub)];
  }
  return counts;
}

scenario::Scenario load(const std::string& name) {
  return scenario::load_scenario(std::filesystem::path(CTSIM_SOURCE_DIR) / "scenarios" / name);
}

// 1. Mean inter-block time of an honest 4-node run within 30% of 300 ms.
Verdict block_interval() {
  const auto start = Clock::now();
  sim::World world(four_nodes(2024));
  Millis t = 0;
  while (best_chain(world).height() < 520) {
    t += 10'000;
    world.run_until(t);
  }
  const auto& blocks = best_chain(world).blocks();
  const std::size_t n = blocks.size() - 1;
  const double mean = static_cast<double>(blocks[n].header.timestamp - blocks[1].header.timestamp) /
                      static_cast<double>(n - 1);
  const double target = static_cast<double>(world.params().block_interval_ms);
  const double elapsed = seconds_since(start);
  const bool pass = n >= 500 && mean >= 0.7 * target && mean <= 1.3 * target && elapsed < 10;
  return {pass, fmt("%zu blocks, mean interval %.1f ms (target %.0f), %.2f s", n, mean, target,
                    elapsed)};
}

// 2. Random feedback sequences keep every score in [0, 1].
Verdict trust_closure() {
  const auto start = Clock::now();
  Rng rng(77);
  std::vector<crypto::Address> csps;
  std::vector<crypto::Address> users;
  for (int i = 0; i < 5; ++i) csps.push_back(crypto::address_of_label("csp" + std::to_string(i)));
  for (int i = 0; i < 8; ++i) users.push_back(crypto::address_of_label("user" + std::to_string(i)));
  auto random_unit = [&] {
    switch (rng.below(4)) {
      case 0:
        return Fixed::zero();
      case 1:
        return Fixed::one();
      default:
        return Fixed::from_raw(static_cast<std::int64_t>(rng.below(Fixed::kScale + 1)));
    }
  };
  auto in_unit = [](Fixed x) { return x.in_unit_interval(); };

  std::uint64_t violations = 0;
  std::uint64_t steps = 0;
  const int sequences = 100'000;
  for (int s = 0; s < sequences; ++s) {
    trust::TrustState state;
    const std::size_t n_csps = 2 + rng.below(4);
    for (std::size_t i = 0; i < n_csps; ++i) {
      trust::Weights w{random_unit(), random_unit()};
      if (w.omega1 == Fixed::zero() && w.omega2 == Fixed::zero()) w.omega1 = Fixed::one();
      state.register_csp(csps[i], w);
    }
    const std::size_t len = 1 + rng.below(12);
    for (std::size_t k = 0; k < len; ++k, ++steps) {
      ledger::FeedbackPayload fb;
      fb.rater = csps[rng.below(n_csps)];
      fb.subject = csps[rng.below(n_csps)];
      fb.user = users[rng.below(users.size())];
      fb.label = static_cast<std::uint8_t>(rng.below(5));
      fb.role = rng.below(2) == 0 ? ledger::FeedbackRole::Home : ledger::FeedbackRole::Foreign;
      state.apply_feedback(fb);
      for (const auto* scores : {&state.cred_scores(), &state.auth_scores(), &state.sat_scores()}) {
        for (const auto& [key, score] : *scores) violations += in_unit(score.value) ? 0 : 1;
      }
      for (const auto& [csp, value] : state.trust_cache()) {
        violations += in_unit(value) ? 0 : 1;
        violations += value == state.compute_trust(csp) ? 0 : 1;
      }
    }
    // The update rules directly, at arbitrary points of the unit square.
    const Fixed a = random_unit(), b = random_unit(), c = random_unit();
    violations += in_unit(trust::cred_update(a, b, c)) ? 0 : 1;
    violations += in_unit(trust::auth_update(a, b)) ? 0 : 1;
    violations += in_unit(trust::sat_update(a, b, c)) ? 0 : 1;
  }
  const double elapsed = seconds_since(start);
  return {violations == 0 && elapsed < 5,
          fmt("%d sequences, %llu feedback steps, %llu violations, %.2f s", sequences,
              static_cast<unsigned long long>(steps), static_cast<unsigned long long>(violations),
              elapsed)};
}

// 3. Incremental trust equals a replay of the persisted ledger.
Verdict replay_oracle() {
  const auto start = Clock::now();
  int equal = 0;
  int runs = 0;
  std::uint64_t feedback_txs = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed, ++runs) {
    auto sc = load("iaas_federation.json");
    sc.world.seed = seed;
    if (seed % 2 == 0) sc.world.params.epoch_blocks = 40;
    auto run = scenario::run_scenario(sc);
    const Bytes bytes = ledger::encode_ledger(run.ledger.params, run.ledger.blocks);
    const auto file = ledger::decode_ledger(bytes);
    ledger::Chain chain;
    bool ok = chain.apply_genesis(file.blocks.front()).ok();
    for (std::size_t h = 1; ok && h < file.blocks.size(); ++h) {
      ok = chain.apply_block(file.blocks[h]).ok();
    }
    for (const auto& b : file.blocks) {
      for (const auto& tx : b.txs) feedback_txs += tx.kind == ledger::TxKind::Feedback ? 1 : 0;
    }
    const auto replayed = trust::replay_from_chain(chain, file.params.epoch_blocks);
    const auto& incremental = *run.world->node(run.source_node).replica->tip_state().trust;
    // Every replica must also agree with a replay of its own chain.
    bool all_nodes = true;
    for (std::size_t i = 0; i < run.world->node_count(); ++i) {
      const auto& r = *run.world->node(i).replica;
      all_nodes = all_nodes &&
                  *r.tip_state().trust == trust::replay_from_chain(r.chain(), file.params.epoch_blocks);
    }
    if (ok && all_nodes && replayed == incremental) ++equal;
  }
  const double elapsed = seconds_since(start);
  return {equal == runs && feedback_txs > 0 && elapsed < 30,
          fmt("%d/%d runs bit-exact, %llu feedback txs replayed, %.2f s", equal, runs,
              static_cast<unsigned long long>(feedback_txs), elapsed)};
}

// 4. Constant feedback converges to cred = T*x and auth = x within 1e-12.
Verdict convergence() {
  Rng rng(4);
  const Int128 S = Fixed::kScale;
  Int128 worst = 0;  // in units of 1e-24
  int cases = 0;
  for (int i = 0; i < 1000; ++i, ++cases) {
    const Fixed t = Fixed::from_raw(static_cast<std::int64_t>(rng.below(Fixed::kScale + 1)));
    const Fixed x = Fixed::from_raw(static_cast<std::int64_t>(rng.below(Fixed::kScale + 1)));
    for (Fixed start : {Fixed::zero(), Fixed::one()}) {
      Fixed cred = start;
      Fixed auth = start;
      for (int k = 0; k < 50; ++k) {
        cred = trust::cred_update(cred, t, x);
        auth = trust::auth_update(auth, x);
      }
      // Exact distance to the real-valued fixed points.
      Int128 dc = static_cast<Int128>(cred.raw()) * S - static_cast<Int128>(t.raw()) * x.raw();
      Int128 da = (static_cast<Int128>(auth.raw()) - x.raw()) * S;
      if (dc < 0) dc = -dc;
      if (da < 0) da = -da;
      worst = std::max({worst, dc, da});
    }
  }
  const Int128 tolerance = S;  // 1e-12 expressed in 1e-24 units
  return {worst <= tolerance,
          fmt("%d (T, x) pairs from both ends, worst error %.3e", cases,
              static_cast<double>(worst) / 1e24)};
}

// 5. Overall trust identities, exact in fixed point.
Verdict trust_identities() {
  Rng rng(5);
  int failures = 0;
  const int pairs = 1000;
  for (int i = 0; i < pairs; ++i) {
    const Fixed sat = Fixed::from_raw(static_cast<std::int64_t>(rng.below(Fixed::kScale + 1)));
    const Fixed auth = Fixed::from_raw(static_cast<std::int64_t>(rng.below(Fixed::kScale + 1)));
    const Fixed w = Fixed::from_raw(1 + static_cast<std::int64_t>(rng.below(Fixed::kScale)));
    const Fixed both[] = {sat, auth};
    if (trust::overall_trust(sat, auth, {w, w}) != mean(std::span<const Fixed>(both))) ++failures;
    if (trust::overall_trust(sat, auth, {w, Fixed::zero()}) != sat) ++failures;
  }
  return {failures == 0, fmt("%d random pairs, %d mismatches", pairs, failures)};
}

// 6. Every single-byte mutation of a valid ledger fails verification.
Verdict tamper_detection() {
  const auto start = Clock::now();
  auto sc = load("iaas_federation.json");
  sc.duration_ms = 20'000;
  auto run = scenario::run_scenario(sc);
  const Bytes clean = ledger::encode_ledger(run.ledger.params, run.ledger.blocks);
  const auto dir = std::filesystem::temp_directory_path() / "ctsim_acceptance";
  std::filesystem::create_directories(dir);
  const auto path = dir / "tamper.ctl";
  std::ostringstream sink;
  crypto::SignatureCache cache;

  ledger::write_file_bytes(path, clean);
  if (tools::cmd_verify(path, sink, sink, &cache) != 0) {
    return {false, "the unmodified ledger does not verify"};
  }
  Rng rng(6);
  int detected = 0;
  const int mutations = 1000;
  for (int i = 0; i < mutations; ++i) {
    Bytes mutated = clean;
    mutated[rng.below(mutated.size())] ^= static_cast<std::uint8_t>(1 + rng.below(255));
    ledger::write_file_bytes(path, mutated);
    if (tools::cmd_verify(path, sink, sink, &cache) == tools::kExitVerifyFailed) ++detected;
  }
  std::filesystem::remove(path);
  return {detected == mutations,
          fmt("%d/%d mutations of a %zu-byte, %zu-block ledger detected, %.2f s", detected,
              mutations, clean.size(), run.ledger.blocks.size(), seconds_since(start))};
}

// 7. A double-issuing home CSP never gets one token included or granted twice.
Verdict double_issuance() {
  int clean_runs = 0;
  std::uint64_t attempts = 0;
  std::uint64_t granted = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto sc = load("double_issuer.json");
    sc.world.seed = seed;
    auto run = scenario::run_scenario(sc);
    bool ok = true;
    for (std::size_t i = 0; i < run.world->node_count(); ++i) {
      std::map<crypto::Digest, int> inclusions;
      for (const auto& b : run.world->node(i).replica->chain().blocks()) {
        for (const auto& tx : b.txs) {
          if (tx.kind != ledger::TxKind::Token) continue;
          for (const auto& out : tx.outputs) ok = ok && ++inclusions[out.token.token_id] == 1;
        }
      }
    }
    std::map<crypto::Digest, int> grants;
    for (const auto& req : run.world->federation().requests()) {
      if (req.clone_of) ++attempts;
      if (req.state == federation::RequestState::Granted && req.token_id) {
        ++granted;
        ok = ok && ++grants[*req.token_id] == 1;
      }
    }
    if (ok) ++clean_runs;
  }
  return {clean_runs == 10 && attempts > 0,
          fmt("%d/10 seeds clean; %llu replay attempts, %llu grants", clean_runs,
              static_cast<unsigned long long>(attempts), static_cast<unsigned long long>(granted))};
}

// 8. Partition 2+2 for 20 intervals, heal, converge within 10 intervals.
Verdict fork_convergence() {
  int converged = 0;
  Millis slowest = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    sim::World world(four_nodes(seed * 101));
    const Millis interval = world.params().block_interval_ms;
    const Millis split = 3'000;
    const Millis heal = split + 20 * interval;
    world.schedule(split, sim::PartitionChange{{{0, 1}, {2, 3}}});
    world.schedule(heal, sim::PartitionChange{});
    world.run_until(heal - 1);
    const auto before = world.tips();
    const bool diverged = before[0] != before[2];
    world.run_until(heal);
    std::optional<Millis> at;
    while (world.now() <= heal + 10 * interval && world.step()) {
      const auto tips = world.tips();
      if (std::all_of(tips.begin(), tips.end(), [&](const auto& t) { return t == tips[0]; }) &&
          world.node(0).replica->height() > 0) {
        at = world.now();
        break;
      }
    }
    if (diverged && at && *at <= heal + 10 * interval) {
      ++converged;
      slowest = std::max(slowest, *at - heal);
    }
  }
  return {converged == 10,
          fmt("%d/10 seeds converged after heal, slowest %lld ms", converged,
              static_cast<long long>(slowest))};
}

// 9. A CSP with permanent trust 0 produces no accepted blocks.
Verdict zero_trust() {
  auto cfg = four_nodes(9);
  cfg.nodes[3].trust_override = Fixed::zero();
  sim::World world(cfg);
  world.run_until(500 * world.params().block_interval_ms);
  std::size_t best = 0;
  const auto& chain = best_chain(world, &best);
  const auto counts = generator_counts(chain);
  const auto it = counts.find(world.node(3).address);
  const std::uint64_t on_chain = it == counts.end() ? 0 : it->second;
  const std::uint64_t generated = world.node(3).blocks_generated;
  return {on_chain == 0 && generated == 0 && chain.height() > 0,
          fmt("%llu blocks over 500 intervals; zero-trust CSP: %llu on chain, %llu generated",
              static_cast<unsigned long long>(chain.height()),
              static_cast<unsigned long long>(on_chain),
              static_cast<unsigned long long>(generated))};
}

double production_share(sim::WorldConfig cfg, std::size_t target, std::uint64_t min_blocks) {
  sim::World world(std::move(cfg));
  Millis t = 0;
  while (best_chain(world).height() < min_blocks) {
    t += 20'000;
    world.run_until(t);
  }
  const auto& chain = best_chain(world);
  const auto counts = generator_counts(chain);
  auto it = counts.find(world.node(target).address);
  return static_cast<double>(it == counts.end() ? 0 : it->second) /
         static_cast<double>(chain.height());
}

// 10. Production share strictly increases in stake and in trust.
Verdict monotonicity() {
  const auto start = Clock::now();
  const std::uint64_t blocks = 2000;
  std::vector<double> by_stake;
  for (const char* x : {"0.1", "0.2", "0.4"}) {
    auto cfg = four_nodes(10);
    const Fixed stake = Fixed::parse(x);
    cfg.nodes[0].stake = stake;
    for (int i = 1; i < 4; ++i) {
      cfg.nodes[i].stake = Fixed::from_raw((Fixed::kScale - stake.raw()) / 3);
    }
    for (auto& n : cfg.nodes) n.trust_override = Fixed::ratio(1, 2);
    by_stake.push_back(production_share(cfg, 0, blocks));
  }
  std::vector<double> by_trust;
  for (const char* t : {"0.2", "0.5", "0.9"}) {
    auto cfg = four_nodes(11);
    for (auto& n : cfg.nodes) n.trust_override = Fixed::ratio(1, 2);
    cfg.nodes[0].trust_override = Fixed::parse(t);
    by_trust.push_back(production_share(cfg, 0, blocks));
  }
  const bool pass = by_stake[0] < by_stake[1] && by_stake[1] < by_stake[2] &&
                    by_trust[0] < by_trust[1] && by_trust[1] < by_trust[2];
  return {pass, fmt("stake 0.1/0.2/0.4 -> %.3f/%.3f/%.3f; trust 0.2/0.5/0.9 -> %.3f/%.3f/%.3f; "
                    ">= %llu blocks each, %.2f s",
                    by_stake[0], by_stake[1], by_stake[2], by_trust[0], by_trust[1], by_trust[2],
                    static_cast<unsigned long long>(blocks), seconds_since(start))};
}

}  // namespace

int main(int argc, char** argv) {
  // Optional criterion numbers restrict the run, e.g. "ctsim_acceptance 4 6".
  std::set<std::size_t> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoul(argv[i]));
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"block-interval calibration", block_interval},
      {"trust closure fuzz", trust_closure},
      {"replay oracle", replay_oracle},
      {"fixed-point convergence", convergence},
      {"overall trust identities", trust_identities},
      {"tamper detection", tamper_detection},
      {"double issuance", double_issuance},
      {"fork convergence", fork_convergence},
      {"zero-trust exclusion", zero_trust},
      {"eligibility monotonicity", monotonicity},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && only.count(i + 1) == 0) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += v.pass ? 0 : 1;
    std::printf("criterion %zu %s: %s (%s)\n", i + 1, criteria[i].first, v.pass ? "PASS" : "FAIL",
                v.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
