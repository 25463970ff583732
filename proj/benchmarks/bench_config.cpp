#include <benchmark/benchmark.h>

#include "edna/config.hpp"

namespace {

const char* kConfigText = R"(EXECUTION:
  EPOCHS: 5
  TRAINER: ClassificationTrainer
  TRAINER_ARGS:
    accumulation_steps: 2
DATAREADER:
  DATASET_ARGS:
    label_name: digits
SAVE:
  MODEL_CORE_NAME: bench
  SAVE_FREQUENCY: 5
TRANSFORMATION:
  ARGS:
    normalization: [0.1307, 0.3081]
MODEL:
  MODEL_ARCH: MLPClassifier
  MODEL_KWARGS: {hidden: 16}
LOSS:
  - LOSSES: ['SoftmaxLogitsLoss']
    LAMBDA: [1.0]
OPTIMIZER:
  - OPTIMIZER: Adam
    BASE_LR: 1.0e-3
)";

const char* kOverrideText = R"(EXECUTION:
  EPOCHS: 10
SAVE:
  MODEL_VERSION: 2
OPTIMIZER:
  - OPTIMIZER: Adam
    BASE_LR: 1.0e-4
)";

void BM_ParseConfig(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(edna::config::parse_config(kConfigText));
  }
}
BENCHMARK(BM_ParseConfig);

void BM_MergeValidateHash(benchmark::State& state) {
  const auto base = edna::config::parse_config(kConfigText);
  const auto overlay = edna::config::parse_config(kOverrideText);
  const auto& schema = edna::config::pipeline_schema();
  for (auto _ : state) {
    edna::config::ConfigLayerStack stack;
    stack.layers = {base, overlay};
    stack.sources = {"base", "override"};
    const auto merged = edna::config::merge_layers(stack);
    const auto eff = edna::config::validate(
        edna::config::apply_defaults(merged, schema), schema);
    benchmark::DoNotOptimize(eff.hash);
  }
}
BENCHMARK(BM_MergeValidateHash);

void BM_CanonicalText(benchmark::State& state) {
  const auto& schema = edna::config::pipeline_schema();
  const auto eff = edna::config::validate(
      edna::config::apply_defaults(edna::config::parse_config(kConfigText),
                                   schema),
      schema);
  for (auto _ : state) {
    benchmark::DoNotOptimize(edna::config::canonical_text(eff.doc));
  }
}
BENCHMARK(BM_CanonicalText);

} // namespace

BENCHMARK_MAIN();
