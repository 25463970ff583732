#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edna/config.hpp"
#include "edna/storage.hpp"

namespace edna {

/// A captured custom component: where it came from and its exact bytes.
struct ComponentSource {
  std::string kind;
  std::string name;
  std::string path;
  Digest digest{};
  std::vector<std::uint8_t> bytes;
};

/// Self-contained record of one run: re-merging layer_files through the
/// config module reproduces config_hash exactly.
struct ProvenanceBundle {
  std::string effective_config; // canonical text
  std::vector<std::pair<std::string, std::string>> layer_files; // origin, raw
  std::vector<ComponentSource> component_sources;
  std::string engine_version;
  std::int64_t seed = 0;
  Digest config_hash{};
};

/// Writes the bundle under CONFIG at `{experiment_key}/provenance/...` and
/// returns that key prefix.
std::string package_provenance(const ProvenanceBundle& bundle,
                               const config::ExperimentKey& key,
                               StorageBackend& backend);

ProvenanceBundle load_provenance(const std::string& bundle_prefix,
                                 const StorageBackend& backend);

/// Re-merges the stored layers and re-hashes stored sources; throws when
/// anything fails to reproduce.
void verify_provenance(const ProvenanceBundle& bundle);

} // namespace edna
