#include <algorithm>
#include <fstream>
#include <sstream>

#include "edna/config.hpp"

namespace edna::config {

ConfigNode deep_merge(const ConfigNode& base, const ConfigNode& overlay) {
  if (!overlay.is_map() || !base.is_map()) {
    // Scalar or list overlays replace wholesale.
    return overlay;
  }
  ConfigNode result = base;
  for (const auto& entry : overlay.as_map()) {
    if (entry.value.is_null()) {
      result.erase(entry.key);
    } else if (entry.value.is_map()) {
      const ConfigNode* existing = result.find(entry.key);
      const ConfigNode base_child = (existing != nullptr && existing->is_map())
                                        ? *existing
                                        : ConfigNode::map();
      result.set(entry.key, deep_merge(base_child, entry.value));
    } else {
      result.set(entry.key, entry.value);
    }
  }
  return result;
}

ConfigNode strip_nulls(const ConfigNode& node) {
  if (node.is_map()) {
    ConfigNode out = ConfigNode::map();
    for (const auto& entry : node.as_map()) {
      if (entry.value.is_null()) continue;
      out.set(entry.key, strip_nulls(entry.value));
    }
    return out;
  }
  if (node.is_list()) {
    ConfigNode::List out;
    for (const auto& item : node.as_list()) {
      out.push_back(strip_nulls(item));
    }
    return ConfigNode(std::move(out));
  }
  return node;
}

ConfigNode merge_layers(const ConfigLayerStack& stack) {
  if (stack.layers.empty()) {
    throw Error("merge_layers requires at least one layer");
  }
  ConfigNode acc = ConfigNode::map();
  for (const ConfigNode& layer : stack.layers) {
    acc = deep_merge(acc, layer);
  }
  return strip_nulls(acc);
}

ConfigLayerStack load_layer_files(const std::vector<std::string>& paths) {
  ConfigLayerStack stack;
  for (const std::string& path : paths) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
      throw Error("cannot open config file: " + path);
    }
    std::ostringstream buf;
    buf << f.rdbuf();
    std::string text = buf.str();
    try {
      stack.layers.push_back(parse_config(text));
    } catch (const ParseError& e) {
      throw Error(path + ": " + e.what());
    }
    stack.sources.push_back(path);
    stack.texts.push_back(std::move(text));
  }
  return stack;
}

namespace {

std::string value_text(const ConfigNode& node) {
  if (node.is_map() || node.is_list()) return canonical_flow_text(node);
  return scalar_text(node);
}

void diff_walk(const std::string& path, const ConfigNode* a,
               const ConfigNode* b, std::vector<DiffEntry>& out) {
  if (a == nullptr && b == nullptr) return;
  if (a != nullptr && b != nullptr) {
    if (a->is_map() && b->is_map()) {
      std::vector<std::string> keys;
      for (const auto& e : a->as_map()) keys.push_back(e.key);
      for (const auto& e : b->as_map()) {
        if (a->find(e.key) == nullptr) keys.push_back(e.key);
      }
      std::sort(keys.begin(), keys.end());
      for (const std::string& k : keys) {
        const std::string child = path.empty() ? k : path + "." + k;
        diff_walk(child, a->find(k), b->find(k), out);
      }
      return;
    }
    if (a->is_list() && b->is_list()) {
      const auto& la = a->as_list();
      const auto& lb = b->as_list();
      const std::size_t n = std::max(la.size(), lb.size());
      for (std::size_t i = 0; i < n; ++i) {
        diff_walk(path + "[" + std::to_string(i) + "]",
                  i < la.size() ? &la[i] : nullptr,
                  i < lb.size() ? &lb[i] : nullptr, out);
      }
      return;
    }
    if (*a == *b) return;
    out.push_back(DiffEntry{path, value_text(*a), value_text(*b)});
    return;
  }
  if (a != nullptr) {
    out.push_back(DiffEntry{path, value_text(*a), std::nullopt});
  } else {
    out.push_back(DiffEntry{path, std::nullopt, value_text(*b)});
  }
}

} // namespace

std::vector<DiffEntry> diff(const EffectiveConfig& a,
                            const EffectiveConfig& b) {
  std::vector<DiffEntry> out;
  diff_walk("", &a.doc, &b.doc, out);
  std::sort(out.begin(), out.end(),
            [](const DiffEntry& x, const DiffEntry& y) { return x.path < y.path; });
  return out;
}

} // namespace edna::config
