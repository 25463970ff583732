#include "edna/provenance.hpp"

namespace edna {

using config::ConfigNode;

namespace {

std::string padded_index(std::size_t i) {
  std::string s = std::to_string(i);
  while (s.size() < 3) s.insert(s.begin(), '0');
  return s;
}

} // namespace

std::string package_provenance(const ProvenanceBundle& bundle,
                               const config::ExperimentKey& key,
                               StorageBackend& backend) {
  const std::string prefix = key.canonical() + "/provenance";

  ConfigNode manifest = ConfigNode::map();
  manifest.set("ENGINE_VERSION", ConfigNode(bundle.engine_version));
  manifest.set("SEED", ConfigNode(bundle.seed));
  manifest.set("CONFIG_HASH", ConfigNode(to_hex(bundle.config_hash)));

  ConfigNode::List layers;
  for (std::size_t i = 0; i < bundle.layer_files.size(); ++i) {
    const std::string layer_key = prefix + "/layers/" + padded_index(i) + ".yml";
    backend.put_text(Category::CONFIG, layer_key, bundle.layer_files[i].second);
    ConfigNode entry = ConfigNode::map();
    entry.set("ORIGIN", ConfigNode(bundle.layer_files[i].first));
    entry.set("KEY", ConfigNode(layer_key));
    layers.push_back(std::move(entry));
  }
  manifest.set("LAYERS", ConfigNode(std::move(layers)));

  ConfigNode::List sources;
  for (std::size_t i = 0; i < bundle.component_sources.size(); ++i) {
    const ComponentSource& src = bundle.component_sources[i];
    const std::string src_key = prefix + "/sources/" + padded_index(i);
    backend.put(Category::CONFIG, src_key, src.bytes);
    ConfigNode entry = ConfigNode::map();
    entry.set("KIND", ConfigNode(src.kind));
    entry.set("NAME", ConfigNode(src.name));
    entry.set("PATH", ConfigNode(src.path));
    entry.set("DIGEST", ConfigNode(to_hex(src.digest)));
    entry.set("KEY", ConfigNode(src_key));
    sources.push_back(std::move(entry));
  }
  manifest.set("SOURCES", ConfigNode(std::move(sources)));

  backend.put_text(Category::CONFIG, prefix + "/effective.yml",
                   bundle.effective_config);
  backend.put_text(Category::CONFIG, prefix + "/bundle.yml",
                   config::canonical_text(manifest));
  return prefix;
}

ProvenanceBundle load_provenance(const std::string& bundle_prefix,
                                 const StorageBackend& backend) {
  const ConfigNode manifest = config::parse_config(
      backend.get_text(Category::CONFIG, bundle_prefix + "/bundle.yml"));

  ProvenanceBundle bundle;
  const ConfigNode* version = manifest.find("ENGINE_VERSION");
  const ConfigNode* seed = manifest.find("SEED");
  const ConfigNode* hash = manifest.find("CONFIG_HASH");
  if (version == nullptr || seed == nullptr || hash == nullptr) {
    throw CorruptRecordError("provenance manifest missing fields");
  }
  bundle.engine_version = version->as_string();
  bundle.seed = seed->as_int();
  bundle.config_hash = digest_from_hex(hash->as_string());
  bundle.effective_config =
      backend.get_text(Category::CONFIG, bundle_prefix + "/effective.yml");

  const ConfigNode* layers = manifest.find("LAYERS");
  if (layers != nullptr) {
    for (const ConfigNode& entry : layers->as_list()) {
      const std::string origin = entry.find("ORIGIN")->as_string();
      const std::string key = entry.find("KEY")->as_string();
      bundle.layer_files.emplace_back(origin,
                                      backend.get_text(Category::CONFIG, key));
    }
  }
  const ConfigNode* sources = manifest.find("SOURCES");
  if (sources != nullptr) {
    for (const ConfigNode& entry : sources->as_list()) {
      ComponentSource src;
      src.kind = entry.find("KIND")->as_string();
      src.name = entry.find("NAME")->as_string();
      src.path = entry.find("PATH")->as_string();
      src.digest = digest_from_hex(entry.find("DIGEST")->as_string());
      src.bytes = backend.get(Category::CONFIG, entry.find("KEY")->as_string());
      bundle.component_sources.push_back(std::move(src));
    }
  }
  return bundle;
}

void verify_provenance(const ProvenanceBundle& bundle) {
  config::ConfigLayerStack stack;
  for (const auto& [origin, text] : bundle.layer_files) {
    try {
      stack.layers.push_back(config::parse_config(text));
    } catch (const ParseError& e) {
      throw Error("provenance layer '" + origin + "': " + e.what());
    }
    stack.sources.push_back(origin);
    stack.texts.push_back(text);
  }
  const ConfigNode merged = config::merge_layers(stack);
  const config::EffectiveConfig eff = config::validate(
      config::apply_defaults(merged, config::pipeline_schema()),
      config::pipeline_schema());
  if (eff.hash != bundle.config_hash) {
    throw CorruptRecordError(
        "provenance bundle does not reproduce its config hash");
  }
  for (const ComponentSource& src : bundle.component_sources) {
    if (sha256(src.bytes) != src.digest) {
      throw CorruptRecordError("component source '" + src.name +
                               "' digest mismatch (" + src.path + ")");
    }
  }
}

} // namespace edna
