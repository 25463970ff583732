#include <benchmark/benchmark.h>

#include "edna/checkpoint.hpp"
#include "edna/rng.hpp"

namespace {

using namespace edna;

Checkpoint make_checkpoint(std::size_t params) {
  Checkpoint ckpt;
  ckpt.experiment_key = {"bench", 1, "mlp", "all"};
  ckpt.epoch = 5;
  ckpt.global_epoch = 5;
  Rng rng(11);
  ParameterSet::Tensor w{"W", {params / 2, 2}, std::vector<double>(params)};
  for (double& v : w.data) v = rng.uniform(-1, 1);
  ckpt.param_tensors.push_back(std::move(w));
  ckpt.optimizer = optim::make_optimizer("Adam", 1e-3, params);
  for (double& v : ckpt.optimizer.m) v = rng.uniform(-1, 1);
  for (double& v : ckpt.optimizer.v) v = rng.next_unit();
  ckpt.rng_state = rng.save_state();
  ckpt.config_hash = sha256(std::string_view("bench"));
  return ckpt;
}

void BM_EncodeCheckpoint(benchmark::State& state) {
  const Checkpoint ckpt = make_checkpoint(std::size_t(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(encode_checkpoint(ckpt));
  }
  state.SetBytesProcessed(state.iterations() *
                          std::int64_t(state.range(0)) * 8 * 3);
}
BENCHMARK(BM_EncodeCheckpoint)->Arg(1 << 10)->Arg(1 << 16);

void BM_DecodeCheckpoint(benchmark::State& state) {
  const auto bytes = encode_checkpoint(make_checkpoint(std::size_t(state.range(0))));
  for (auto _ : state) {
    benchmark::DoNotOptimize(decode_checkpoint(bytes));
  }
  state.SetBytesProcessed(state.iterations() * std::int64_t(bytes.size()));
}
BENCHMARK(BM_DecodeCheckpoint)->Arg(1 << 10)->Arg(1 << 16);

void BM_Sha256(benchmark::State& state) {
  Rng rng(3);
  std::vector<std::uint8_t> data(std::size_t(state.range(0)));
  for (auto& b : data) b = std::uint8_t(rng.below(256));
  for (auto _ : state) {
    benchmark::DoNotOptimize(sha256(data.data(), data.size()));
  }
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Sha256)->Arg(1 << 12)->Arg(1 << 20);

} // namespace

BENCHMARK_MAIN();
