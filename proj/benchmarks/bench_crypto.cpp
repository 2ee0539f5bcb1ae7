#include <benchmark/benchmark.h>

#include "ctsim/crypto.hpp"

namespace {

using namespace ctsim;

crypto::KeyPair bench_key() {
  std::array<std::uint8_t, 32> seed{};
  seed[31] = 42;
  return crypto::generate_keypair(seed);
}

void BM_Sha256_1KiB(benchmark::State& state) {
  const Bytes data(1024, 0x5a);
  for (auto _ : state) benchmark::DoNotOptimize(crypto::hash(data));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) * 1024);
}
BENCHMARK(BM_Sha256_1KiB);

void BM_Sign(benchmark::State& state) {
  const auto key = bench_key();
  crypto::Digest d = crypto::hash("block header");
  for (auto _ : state) {
    benchmark::DoNotOptimize(crypto::sign(key, d));
    d.bytes[0]++;
  }
}
BENCHMARK(BM_Sign);

void BM_Verify(benchmark::State& state) {
  const auto key = bench_key();
  const crypto::Digest d = crypto::hash("block header");
  const auto sig = crypto::sign(key, d);
  for (auto _ : state) benchmark::DoNotOptimize(crypto::verify(key.public_key, d, sig));
}
BENCHMARK(BM_Verify);

void BM_VerifyCached(benchmark::State& state) {
  const auto key = bench_key();
  const crypto::Digest d = crypto::hash("block header");
  const auto sig = crypto::sign(key, d);
  crypto::SignatureCache cache;
  for (auto _ : state) benchmark::DoNotOptimize(cache.verify(key.public_key, d, sig));
}
BENCHMARK(BM_VerifyCached);

void BM_DeriveChild(benchmark::State& state) {
  const auto key = bench_key();
  std::uint32_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(crypto::derive_child_key(key, i++));
}
BENCHMARK(BM_DeriveChild);

void BM_EncryptDecrypt(benchmark::State& state) {
  const auto key = bench_key();
  Rng rng(1);
  const Bytes msg(static_cast<std::size_t>(state.range(0)), 0x11);
  for (auto _ : state) {
    auto ct = crypto::encrypt_for(key.public_key, msg, rng);
    benchmark::DoNotOptimize(crypto::decrypt(key.private_key, ct));
  }
}
BENCHMARK(BM_EncryptDecrypt)->Arg(64)->Arg(4096);

}  // namespace
