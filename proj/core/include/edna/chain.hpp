#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "edna/engine.hpp"

namespace edna {

enum class TriggerKind { Once, Periodic, OnUpstreamBatch };

struct StageTrigger {
  TriggerKind kind = TriggerKind::Once;
  double seconds = 1.0;      // periodic
  std::int64_t batch = 1;    // on_upstream_batch
};

struct StageSpec {
  std::string name;
  std::vector<std::string> config_layers; // paths, merge order
  Mode mode = Mode::Train;
  StageTrigger trigger;
  std::optional<std::string> upstream;
};

/// Ordered stages forming a DAG through `upstream` references.
struct ChainManifest {
  std::vector<StageSpec> stages;
};

/// Parse a manifest document (top-level CHAIN.STAGES list); config paths
/// are resolved relative to base_dir. Detects cycles, duplicate names, and
/// unknown upstream references.
ChainManifest parse_chain_manifest(const std::string& text,
                                   const std::string& base_dir);
ChainManifest load_chain_manifest(const std::string& path);

enum class StageStatus { Succeeded, Failed, Skipped };

struct ChainResult {
  std::map<std::string, StageStatus> statuses;
  std::map<std::string, std::string> errors; // failing stages only
  bool all_succeeded() const;
};

struct ChainOptions {
  std::string storage_root = "./edna_store";
  std::string work_dir = "./edna_chain";
  std::uint64_t seed_override = 0;
  bool has_seed_override = false;
  /// Called on every stage engine before apply (tests register
  /// user components here).
  std::function<void(Engine&, const StageSpec&)> customize;
};

/// Stages start in topological order. `once` stages run to completion
/// before dependents; periodic and batch-trigger stages consume their
/// upstream connector until it closes. Stage failure skips dependents.
ChainResult run_chain(const ChainManifest& manifest,
                      const ChainOptions& options);

} // namespace edna
