#include <benchmark/benchmark.h>

#include <vector>

#include "ctsim/trust.hpp"

namespace {

using namespace ctsim;

void BM_ScoreUpdates(benchmark::State& state) {
  Fixed cred = Fixed::one();
  Fixed sat = Fixed::zero();
  const Fixed t = Fixed::parse("0.61");
  const Fixed x = Fixed::parse("0.7");
  for (auto _ : state) {
    cred = trust::cred_update(cred, t, x);
    sat = trust::sat_update(sat, cred, x);
    benchmark::DoNotOptimize(cred);
    benchmark::DoNotOptimize(sat);
  }
}
BENCHMARK(BM_ScoreUpdates);

// One rating folded into a state with n CSPs and 4n users already rated.
void BM_ApplyFeedback(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<crypto::Address> csps;
  std::vector<crypto::Address> users;
  for (std::size_t i = 0; i < n; ++i) csps.push_back(crypto::address_of_label("c" + std::to_string(i)));
  for (std::size_t i = 0; i < 4 * n; ++i) users.push_back(crypto::address_of_label("u" + std::to_string(i)));
  trust::TrustState ts;
  for (const auto& c : csps) ts.register_csp(c, {Fixed::ratio(1, 2), Fixed::ratio(1, 2)});
  Rng rng(3);
  auto random_feedback = [&] {
    ledger::FeedbackPayload p;
    const std::size_t a = rng.below(n);
    std::size_t b = rng.below(n - 1);
    if (b >= a) ++b;
    p.rater = csps[a];
    p.subject = csps[b];
    p.user = users[rng.below(users.size())];
    p.label = static_cast<std::uint8_t>(rng.below(5));
    p.role = rng.below(2) ? ledger::FeedbackRole::Home : ledger::FeedbackRole::Foreign;
    return p;
  };
  for (std::size_t i = 0; i < 20 * n; ++i) ts.apply_feedback(random_feedback());
  for (auto _ : state) ts.apply_feedback(random_feedback());
}
BENCHMARK(BM_ApplyFeedback)->Arg(4)->Arg(16)->Arg(64);

}  // namespace
