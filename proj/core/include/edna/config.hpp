#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "edna/config_node.hpp"
#include "edna/sha256.hpp"

namespace edna::config {

// ---------------------------------------------------------------------------
// Documents and layers
// ---------------------------------------------------------------------------

/// An ordered stack of config documents, base first. `sources` carries a
/// per-layer origin label (file path or literal tag) used in error messages
/// and provenance bundles.
struct ConfigLayerStack {
  std::vector<ConfigNode> layers;
  std::vector<std::string> sources;
  /// Raw layer texts, kept for provenance packaging.
  std::vector<std::string> texts;
};

/// Validated, default-filled, null-free document plus the digest of its
/// canonical serialization.
struct EffectiveConfig {
  ConfigNode doc;
  Digest hash{};
  std::string canonical_text;
};

/// Identity of one experiment: every stored artifact is keyed under the
/// canonical form `{core_name}-v{version}-{backbone}-{qualifier}`.
struct ExperimentKey {
  std::string core_name;
  std::int64_t version = 1;
  std::string backbone;
  std::string qualifier;

  std::string canonical() const;

  bool operator==(const ExperimentKey&) const = default;
};

struct DiffEntry {
  std::string path;
  /// Canonical text of the value; empty optional means absent on that side.
  std::optional<std::string> old_value;
  std::optional<std::string> new_value;

  bool operator==(const DiffEntry&) const = default;
};

// ---------------------------------------------------------------------------
// Schema
// ---------------------------------------------------------------------------

enum class FieldKind { String, Integer, Real, Boolean, List, Map, Any };

/// Recursive field specification. Map fields either enumerate `children`
/// (closed: unknown keys rejected) or set `open` (free-form keyword maps).
/// List fields validate every element against `item`.
struct FieldSpec {
  FieldKind kind = FieldKind::Any;
  bool required = false;
  bool open = false;
  std::optional<ConfigNode> default_value;
  std::vector<std::pair<std::string, FieldSpec>> children;
  std::vector<FieldSpec> item; // 0 or 1 entries; vector dodges recursion

  const FieldSpec* child(const std::string& key) const;
};

/// Top-level schema: section name -> spec.
struct SchemaSpec {
  FieldSpec root; // Map spec whose children are the sections

  /// Document containing every default, recursively assembled.
  ConfigNode default_document() const;
};

/// The built-in pipeline schema (sections, types, defaults).
const SchemaSpec& pipeline_schema();

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Parse one document in the supported subset (maps, lists, scalars,
/// comments, flow collections). Empty text yields an empty map.
ConfigNode parse_config(const std::string& text);

/// Recursive merge: map-on-map merges, overlay scalar/list replaces,
/// overlay null deletes the key. Total on valid documents.
ConfigNode deep_merge(const ConfigNode& base, const ConfigNode& overlay);

/// Strict left fold of deep_merge over the stack; residual nulls stripped.
ConfigNode merge_layers(const ConfigLayerStack& stack);

/// Fill every schema default absent from doc; user values never overwritten.
ConfigNode apply_defaults(const ConfigNode& doc, const SchemaSpec& schema);

/// Type-check against the schema and produce the canonical form + hash.
/// Integer values in real-typed fields are promoted to reals first.
EffectiveConfig validate(const ConfigNode& doc, const SchemaSpec& schema);

/// Read the SAVE identity fields into an ExperimentKey.
ExperimentKey derive_experiment_key(const EffectiveConfig& cfg);

/// Deterministic, path-sorted change list; empty iff hashes are equal.
std::vector<DiffEntry> diff(const EffectiveConfig& a, const EffectiveConfig& b);

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

/// Canonical block serialization: sorted keys, shortest round-trip reals,
/// re-parseable by parse_config.
std::string canonical_text(const ConfigNode& node);

/// Canonical single-line flow form ({k: v, ...}); used for connector
/// payloads and checkpoint manifests.
std::string canonical_flow_text(const ConfigNode& node);

/// Scalar formatting shared by both writers (reals as shortest round-trip).
std::string scalar_text(const ConfigNode& node);

/// Parse a single flow-form value (scalar, [..], or {..}).
ConfigNode parse_flow_text(const std::string& text);

/// Remove map entries whose value is null, recursively.
ConfigNode strip_nulls(const ConfigNode& node);

/// Load a layer stack from files; origin label = the path.
ConfigLayerStack load_layer_files(const std::vector<std::string>& paths);

} // namespace edna::config
