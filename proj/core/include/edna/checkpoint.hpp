#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "edna/config.hpp"
#include "edna/model.hpp"
#include "edna/optim.hpp"
#include "edna/storage.hpp"

namespace edna {

/// Everything needed to resume a run bit-exactly: parameters, optimizer /
/// scheduler / lambda state, RNG state, counters, plugin states, and the
/// hash of the producing config.
struct Checkpoint {
  config::ExperimentKey experiment_key;
  std::int64_t epoch = 0; // completed epochs

  std::int64_t global_epoch = 0;
  std::int64_t global_batch = 0;
  std::int64_t accumulation_count = 0;

  std::vector<ParameterSet::Tensor> param_tensors;
  optim::OptimizerState optimizer;
  optim::SchedulerState scheduler;
  optim::LambdaSchedulerState lambda_scheduler;
  std::vector<std::vector<double>> lambdas; // per loss group
  std::string rng_state;
  Digest config_hash{};
  std::map<std::string, std::vector<std::uint8_t>> plugin_states;
};

/// Byte layout: "EDNA" magic, u16 LE format version, u32 LE manifest
/// length, UTF-8 manifest (canonical flow map with the tensor table of
/// contents), float64 LE tensor payloads in TOC order, trailing SHA-256
/// over all preceding bytes.
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);

/// Verifies the trailing digest before touching any field.
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

/// Key format: {experiment_key}/model/epoch{E}.ckpt under MODEL.
std::string checkpoint_key(const config::ExperimentKey& key,
                           std::int64_t epoch);

std::string write_checkpoint(const Checkpoint& ckpt, StorageBackend& backend);
Checkpoint read_checkpoint(const std::string& key,
                           const StorageBackend& backend);

} // namespace edna
