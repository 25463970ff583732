#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "edna/config_node.hpp"
#include "edna/matrix.hpp"
#include "edna/rng.hpp"

namespace edna {

/// Keyword maps flowing from config into components (crawler args, model
/// kwargs, plugin args). Always a map-typed ConfigNode.
using Kwargs = config::ConfigNode;

/// One data sample: a feature vector plus one or more named integer labels.
struct SampleRecord {
  std::vector<double> features;
  std::map<std::string, std::int64_t> labels;
};

struct SampleSet {
  std::vector<SampleRecord> records;
  std::size_t feature_dim = 0;
  std::map<std::string, std::int64_t> class_counts;

  bool empty() const { return records.empty(); }
};

/// A batch ready for a model: features (B x D), the primary label column,
/// and the remaining label columns keyed by name.
struct Batch {
  Matrix features;
  std::vector<std::int64_t> labels;
  std::map<std::string, std::vector<std::int64_t>> datalabels;

  std::size_t size() const { return features.rows(); }
};

enum class TransformKind { Identity, Normalize, Scale };

struct TransformSpec {
  TransformKind kind = TransformKind::Identity;
  std::vector<double> mean;
  std::vector<double> std;
  double factor = 1.0;
};

/// Directory-poll data source for streaming deploys. Each file is consumed
/// exactly once; records use the connector line format.
struct StreamSource {
  std::string directory;
  double poll_interval_s = 0.05;
  std::set<std::string> seen;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Construct the SampleSet invariants (feature_dim, class_counts) from raw
/// records. Errors on ragged features, non-finite values, or fewer than two
/// classes for any label.
SampleSet build_sample_set(std::vector<SampleRecord> records);

/// Built-in crawlers, callable directly; the registry wraps these.
SampleSet crawl_synthetic_gaussian(const Kwargs& args);
SampleSet crawl_csv_file(const Kwargs& args);
SampleSet crawl_inline(std::vector<SampleRecord> records);

/// Returns records from files not yet seen, lexicographic file order;
/// unreadable files are skipped with a warning line to stderr.
std::vector<SampleRecord> poll_stream(StreamSource& src);

SampleRecord transform(const SampleRecord& rec, const TransformSpec& spec);
SampleRecord transform_chain(const SampleRecord& rec,
                             const std::vector<TransformSpec>& specs);

/// Build a TransformSpec from a TRANSFORMATION.ARGS map (normalization,
/// scale); image-specific args are inert.
TransformSpec transform_from_args(const Kwargs& args);

/// Deterministic batching. When shuffling, the permutation is a pure
/// function of (seed, epoch); the final partial batch is kept.
std::vector<Batch> batch_iter(const SampleSet& set,
                              const std::vector<TransformSpec>& transforms,
                              const std::string& primary_label,
                              std::int64_t batch_size, bool shuffle,
                              std::uint64_t seed, std::uint64_t epoch);

/// Serialize/parse one record as a canonical flow map; the stream and
/// file-handoff line formats build on this.
config::ConfigNode record_to_node(const SampleRecord& rec);
SampleRecord record_from_node(const config::ConfigNode& node);

} // namespace edna
