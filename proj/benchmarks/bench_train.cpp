#include <benchmark/benchmark.h>

#include "edna/model.hpp"
#include "edna/optim.hpp"
#include "edna/rng.hpp"

namespace {

using namespace edna;

void BM_AdamStep(benchmark::State& state) {
  const std::size_t n = std::size_t(state.range(0));
  auto opt = optim::make_optimizer("Adam", 1e-3, n);
  std::vector<double> params(n, 0.1);
  std::vector<double> grads(n);
  Rng rng(1);
  for (double& g : grads) g = rng.uniform(-1, 1);
  for (auto _ : state) {
    optim::adam_step(opt, params, grads);
  }
  state.SetItemsProcessed(state.iterations() * std::int64_t(n));
}
BENCHMARK(BM_AdamStep)->Arg(1 << 10)->Arg(1 << 14);

void BM_MlpForwardBackward(benchmark::State& state) {
  const std::size_t batch = std::size_t(state.range(0));
  MLPClassifier model;
  setup_model(model,
              config::make_map({{"in_dim", config::ConfigNode(16)},
                                {"classes", config::ConfigNode(4)},
                                {"hidden", config::ConfigNode(32)}}),
              7);
  Rng rng(3);
  Matrix x(batch, 16);
  for (double& v : x.data()) v = rng.uniform(-1, 1);
  std::vector<std::int64_t> labels(batch);
  for (auto& l : labels) l = std::int64_t(rng.below(4));

  for (auto _ : state) {
    const ForwardResult res = model.forward(x);
    const auto loss = optim::cross_entropy(res.output.logits, labels);
    benchmark::DoNotOptimize(model.backward(x, loss.dlogits));
  }
  state.SetItemsProcessed(state.iterations() * std::int64_t(batch));
}
BENCHMARK(BM_MlpForwardBackward)->Arg(8)->Arg(64);

void BM_Softmax(benchmark::State& state) {
  Rng rng(5);
  std::vector<double> z(std::size_t(state.range(0)));
  for (double& v : z) v = rng.uniform(-5, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(optim::softmax(z));
  }
}
BENCHMARK(BM_Softmax)->Arg(10)->Arg(1000);

} // namespace

BENCHMARK_MAIN();
