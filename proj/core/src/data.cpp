#include "edna/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "edna/config.hpp"

namespace fs = std::filesystem;

namespace edna {

using config::ConfigNode;

namespace {

std::int64_t kw_int(const Kwargs& args, const std::string& key,
                    std::int64_t def) {
  const ConfigNode* n = args.find(key);
  return n == nullptr ? def : n->as_int();
}

double kw_real(const Kwargs& args, const std::string& key, double def) {
  const ConfigNode* n = args.find(key);
  return n == nullptr ? def : n->as_real();
}

std::string kw_string(const Kwargs& args, const std::string& key,
                      const std::string& def) {
  const ConfigNode* n = args.find(key);
  return n == nullptr ? def : n->as_string();
}

} // namespace

SampleSet build_sample_set(std::vector<SampleRecord> records) {
  SampleSet set;
  if (records.empty()) {
    throw Error("sample set must contain at least one record");
  }
  set.feature_dim = records.front().features.size();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const SampleRecord& r = records[i];
    if (r.features.size() != set.feature_dim) {
      throw Error("record " + std::to_string(i) + " has " +
                  std::to_string(r.features.size()) + " features, expected " +
                  std::to_string(set.feature_dim));
    }
    for (double v : r.features) {
      if (!std::isfinite(v)) {
        throw Error("record " + std::to_string(i) +
                    " contains a non-finite feature");
      }
    }
    if (r.labels.empty()) {
      throw Error("record " + std::to_string(i) + " has no labels");
    }
    for (const auto& [name, cls] : r.labels) {
      if (cls < 0) {
        throw Error("record " + std::to_string(i) + " label '" + name +
                    "' is negative");
      }
      auto& count = set.class_counts[name];
      count = std::max(count, cls + 1);
    }
  }
  for (const auto& [name, classes] : set.class_counts) {
    if (classes < 2) {
      throw Error("label '" + name + "' has " + std::to_string(classes) +
                  " class(es); at least 2 required");
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (records[i].labels.find(name) == records[i].labels.end()) {
        throw Error("record " + std::to_string(i) + " is missing label '" +
                    name + "'");
      }
    }
  }
  set.records = std::move(records);
  return set;
}

SampleSet crawl_synthetic_gaussian(const Kwargs& args) {
  const std::int64_t n_samples = kw_int(args, "n_samples", 512);
  const std::int64_t n_features = kw_int(args, "n_features", 2);
  const std::int64_t n_classes = kw_int(args, "n_classes", 2);
  const double class_sep = kw_real(args, "class_sep", 2.0);
  const double sigma = kw_real(args, "std", 0.25);
  const std::int64_t seed = kw_int(args, "seed", 42);
  const std::string label_name = kw_string(args, "label_name", "label");

  if (n_classes < 2) throw Error("synthetic_gaussian: n_classes must be >= 2");
  if (n_samples < n_classes) {
    throw Error("synthetic_gaussian: need at least one sample per class");
  }
  if (n_features < 1) throw Error("synthetic_gaussian: n_features must be >= 1");
  if (sigma <= 0.0) throw Error("synthetic_gaussian: std must be > 0");

  // Consecutive class means are class_sep apart, advancing one coordinate
  // axis per class (cycling through axes).
  std::vector<std::vector<double>> means(n_classes,
                                         std::vector<double>(n_features, 0.0));
  for (std::int64_t c = 1; c < n_classes; ++c) {
    means[c] = means[c - 1];
    means[c][(c - 1) % n_features] += class_sep;
  }

  Rng rng{std::uint64_t(seed)};
  std::vector<SampleRecord> records;
  records.reserve(n_samples);
  for (std::int64_t i = 0; i < n_samples; ++i) {
    const std::int64_t cls = i % n_classes;
    SampleRecord rec;
    rec.features.resize(n_features);
    for (std::int64_t d = 0; d < n_features; ++d) {
      rec.features[d] = means[cls][d] + sigma * rng.normal();
    }
    rec.labels[label_name] = cls;
    records.push_back(std::move(rec));
  }
  return build_sample_set(std::move(records));
}

namespace {

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  for (std::string& s : out) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
      s.erase(s.begin());
    }
    while (!s.empty() &&
           (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
      s.pop_back();
    }
  }
  return out;
}

bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

} // namespace

SampleSet crawl_csv_file(const Kwargs& args) {
  const std::string path = kw_string(args, "path", "");
  const std::string label_name = kw_string(args, "label_name", "label");
  if (path.empty()) throw Error("csv_file: 'path' argument required");

  std::ifstream f(path);
  if (!f) throw Error("csv_file: cannot open " + path);

  std::vector<std::string> lines;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.empty()) throw Error("csv_file: " + path + " is empty");

  // Header detection: a non-numeric first row names the columns.
  std::vector<std::string> header = split_csv_row(lines.front());
  bool has_header = false;
  for (const std::string& cell : header) {
    double ignored;
    if (!parse_number(cell, ignored)) {
      has_header = true;
      break;
    }
  }

  // Label column from 'label_column' (name with a header, index otherwise);
  // default is the last column.
  std::size_t label_idx = header.size() - 1;
  const ConfigNode* label_col = args.find("label_column");
  if (label_col != nullptr) {
    if (label_col->is_string()) {
      if (!has_header) {
        throw Error("csv_file: label_column by name requires a header row");
      }
      auto it =
          std::find(header.begin(), header.end(), label_col->as_string());
      if (it == header.end()) {
        throw Error("csv_file: label column '" + label_col->as_string() +
                    "' not in header");
      }
      label_idx = std::size_t(it - header.begin());
    } else {
      label_idx = std::size_t(label_col->as_int());
    }
  }

  std::vector<SampleRecord> records;
  for (std::size_t row = has_header ? 1 : 0; row < lines.size(); ++row) {
    const std::vector<std::string> cells = split_csv_row(lines[row]);
    if (cells.size() != header.size()) {
      throw Error("csv_file: row " + std::to_string(row + 1) + " has " +
                  std::to_string(cells.size()) + " columns, expected " +
                  std::to_string(header.size()));
    }
    if (label_idx >= cells.size()) {
      throw Error("csv_file: label column index out of range");
    }
    SampleRecord rec;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      double v;
      if (!parse_number(cells[i], v)) {
        throw Error("csv_file: row " + std::to_string(row + 1) +
                    ": cannot parse '" + cells[i] + "' as a number");
      }
      if (i == label_idx) {
        const double rounded = std::nearbyint(v);
        if (rounded != v) {
          throw Error("csv_file: row " + std::to_string(row + 1) +
                      ": label must be an integer, got " + cells[i]);
        }
        rec.labels[label_name] = std::int64_t(rounded);
      } else {
        rec.features.push_back(v);
      }
    }
    records.push_back(std::move(rec));
  }
  return build_sample_set(std::move(records));
}

SampleSet crawl_inline(std::vector<SampleRecord> records) {
  return build_sample_set(std::move(records));
}

std::vector<SampleRecord> poll_stream(StreamSource& src) {
  std::vector<SampleRecord> out;
  if (!fs::is_directory(src.directory)) {
    throw Error("poll_stream: not a directory: " + src.directory);
  }
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(src.directory)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name == "STOP" || name == "END") continue;
    if (src.seen.count(name) != 0) continue;
    names.push_back(name);
  }
  std::sort(names.begin(), names.end());
  for (const std::string& name : names) {
    const fs::path path = fs::path(src.directory) / name;
    std::ifstream f(path);
    if (!f) {
      std::cerr << "warning: skipping unreadable stream file " << path << "\n";
      src.seen.insert(name);
      continue;
    }
    std::string line;
    bool ok = true;
    std::vector<SampleRecord> file_records;
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      const std::size_t tab = line.find('\t');
      const std::string payload =
          tab == std::string::npos ? line : line.substr(tab + 1);
      try {
        file_records.push_back(
            record_from_node(config::parse_flow_text(payload)));
      } catch (const std::exception& e) {
        std::cerr << "warning: skipping malformed stream file " << path << ": "
                  << e.what() << "\n";
        ok = false;
        break;
      }
    }
    if (ok) {
      for (auto& r : file_records) out.push_back(std::move(r));
    }
    src.seen.insert(name);
  }
  return out;
}

SampleRecord transform(const SampleRecord& rec, const TransformSpec& spec) {
  SampleRecord out = rec;
  switch (spec.kind) {
    case TransformKind::Identity:
      break;
    case TransformKind::Normalize: {
      const std::size_t d = rec.features.size();
      const bool broadcast = spec.mean.size() == 1;
      if (!broadcast && spec.mean.size() != d) {
        throw Error("normalize: mean length " +
                    std::to_string(spec.mean.size()) +
                    " does not match feature dim " + std::to_string(d));
      }
      if (spec.std.size() != spec.mean.size()) {
        throw Error("normalize: mean/std length mismatch");
      }
      for (double s : spec.std) {
        if (s <= 0.0) throw Error("normalize: std entries must be > 0");
      }
      for (std::size_t i = 0; i < d; ++i) {
        const double m = broadcast ? spec.mean[0] : spec.mean[i];
        const double s = broadcast ? spec.std[0] : spec.std[i];
        out.features[i] = (rec.features[i] - m) / s;
      }
      break;
    }
    case TransformKind::Scale:
      for (double& v : out.features) v *= spec.factor;
      break;
  }
  return out;
}

SampleRecord transform_chain(const SampleRecord& rec,
                             const std::vector<TransformSpec>& specs) {
  SampleRecord out = rec;
  for (const TransformSpec& spec : specs) {
    out = transform(out, spec);
  }
  return out;
}

TransformSpec transform_from_args(const Kwargs& args) {
  TransformSpec spec;
  const ConfigNode* norm = args.find("normalization");
  if (norm != nullptr) {
    const auto& l = norm->as_list();
    if (l.size() < 2) {
      throw Error("normalization needs [mean, std]");
    }
    spec.kind = TransformKind::Normalize;
    spec.mean = {l[0].as_real()};
    spec.std = {l[1].as_real()};
    if (l.size() > 2) {
      std::cerr << "note: normalization has " << l.size()
                << " values; entries past [mean, std] are ignored\n";
    }
    return spec;
  }
  const ConfigNode* scale = args.find("scale");
  if (scale != nullptr) {
    spec.kind = TransformKind::Scale;
    spec.factor = scale->as_real();
    return spec;
  }
  // Image-specific args (i_shape, channels, h_flip) are inert here.
  for (const auto& e : args.as_map()) {
    if (e.key == "i_shape" || e.key == "channels" || e.key == "h_flip") {
      std::cerr << "note: transformation arg '" << e.key
                << "' has no effect on tabular data\n";
    }
  }
  return spec;
}

std::vector<Batch> batch_iter(const SampleSet& set,
                              const std::vector<TransformSpec>& transforms,
                              const std::string& primary_label,
                              std::int64_t batch_size, bool shuffle,
                              std::uint64_t seed, std::uint64_t epoch) {
  if (set.empty()) throw Error("batch_iter: empty sample set");
  if (batch_size < 1) throw Error("batch_iter: batch_size must be >= 1");
  if (set.class_counts.find(primary_label) == set.class_counts.end()) {
    throw Error("batch_iter: label '" + primary_label +
                "' not present in sample set");
  }

  std::vector<std::size_t> order(set.records.size());
  std::iota(order.begin(), order.end(), 0);
  if (shuffle) {
    Rng rng = Rng::substream(seed, epoch);
    rng.shuffle(order);
  }

  std::vector<std::string> other_labels;
  for (const auto& [name, _] : set.class_counts) {
    if (name != primary_label) other_labels.push_back(name);
  }

  std::vector<Batch> batches;
  const std::size_t n = order.size();
  for (std::size_t start = 0; start < n; start += std::size_t(batch_size)) {
    const std::size_t b = std::min(std::size_t(batch_size), n - start);
    Batch batch;
    batch.features = Matrix(b, set.feature_dim);
    batch.labels.resize(b);
    for (const std::string& name : other_labels) {
      batch.datalabels[name].resize(b);
    }
    for (std::size_t i = 0; i < b; ++i) {
      const SampleRecord rec =
          transform_chain(set.records[order[start + i]], transforms);
      for (std::size_t d = 0; d < set.feature_dim; ++d) {
        batch.features.at(i, d) = rec.features[d];
      }
      batch.labels[i] = rec.labels.at(primary_label);
      for (const std::string& name : other_labels) {
        batch.datalabels[name][i] = rec.labels.at(name);
      }
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

config::ConfigNode record_to_node(const SampleRecord& rec) {
  ConfigNode::List feats;
  for (double v : rec.features) feats.push_back(ConfigNode(v));
  ConfigNode labels = ConfigNode::map();
  for (const auto& [name, cls] : rec.labels) {
    labels.set(name, ConfigNode(cls));
  }
  ConfigNode node = ConfigNode::map();
  node.set("features", ConfigNode(std::move(feats)));
  node.set("labels", std::move(labels));
  return node;
}

SampleRecord record_from_node(const config::ConfigNode& node) {
  SampleRecord rec;
  const ConfigNode* feats = node.find("features");
  if (feats == nullptr || !feats->is_list()) {
    throw Error("record: 'features' list missing");
  }
  for (const ConfigNode& v : feats->as_list()) {
    rec.features.push_back(v.as_real());
  }
  const ConfigNode* labels = node.find("labels");
  if (labels != nullptr) {
    for (const auto& e : labels->as_map()) {
      rec.labels[e.key] = e.value.as_int();
    }
  }
  return rec;
}

} // namespace edna
