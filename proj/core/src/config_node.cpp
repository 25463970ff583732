#include "edna/config_node.hpp"

#include <algorithm>

namespace edna::config {

bool ConfigNode::as_bool() const {
  if (!is_bool()) throw Error("expected boolean, got " + type_name());
  return std::get<bool>(value);
}

std::int64_t ConfigNode::as_int() const {
  if (!is_int()) throw Error("expected integer, got " + type_name());
  return std::get<std::int64_t>(value);
}

double ConfigNode::as_real() const {
  if (is_int()) return double(std::get<std::int64_t>(value));
  if (!is_real()) throw Error("expected real, got " + type_name());
  return std::get<double>(value);
}

const std::string& ConfigNode::as_string() const {
  if (!is_string()) throw Error("expected string, got " + type_name());
  return std::get<std::string>(value);
}

const ConfigNode::List& ConfigNode::as_list() const {
  if (!is_list()) throw Error("expected list, got " + type_name());
  return std::get<List>(value);
}

ConfigNode::List& ConfigNode::as_list() {
  if (!is_list()) throw Error("expected list, got " + type_name());
  return std::get<List>(value);
}

const ConfigNode::Map& ConfigNode::as_map() const {
  if (!is_map()) throw Error("expected map, got " + type_name());
  return std::get<Map>(value);
}

ConfigNode::Map& ConfigNode::as_map() {
  if (!is_map()) throw Error("expected map, got " + type_name());
  return std::get<Map>(value);
}

const ConfigNode* ConfigNode::find(const std::string& key) const {
  if (!is_map()) return nullptr;
  for (const Entry& e : std::get<Map>(value)) {
    if (e.key == key) return &e.value;
  }
  return nullptr;
}

ConfigNode* ConfigNode::find(const std::string& key) {
  if (!is_map()) return nullptr;
  for (Entry& e : std::get<Map>(value)) {
    if (e.key == key) return &e.value;
  }
  return nullptr;
}

void ConfigNode::set(const std::string& key, ConfigNode node) {
  Map& m = as_map();
  for (Entry& e : m) {
    if (e.key == key) {
      e.value = std::move(node);
      return;
    }
  }
  m.push_back(Entry{key, std::move(node)});
}

bool ConfigNode::erase(const std::string& key) {
  Map& m = as_map();
  auto it = std::find_if(m.begin(), m.end(),
                         [&](const Entry& e) { return e.key == key; });
  if (it == m.end()) return false;
  m.erase(it);
  return true;
}

const ConfigNode* ConfigNode::at_path(const std::string& path) const {
  const ConfigNode* cur = this;
  std::size_t i = 0;
  while (i < path.size()) {
    if (path[i] == '.') {
      ++i;
      continue;
    }
    if (path[i] == '[') {
      const std::size_t close = path.find(']', i);
      if (close == std::string::npos) return nullptr;
      const std::string idx_text = path.substr(i + 1, close - i - 1);
      if (!cur->is_list()) return nullptr;
      std::size_t idx = 0;
      try {
        idx = std::stoul(idx_text);
      } catch (...) {
        return nullptr;
      }
      const List& l = cur->as_list();
      if (idx >= l.size()) return nullptr;
      cur = &l[idx];
      i = close + 1;
      continue;
    }
    std::size_t end = i;
    while (end < path.size() && path[end] != '.' && path[end] != '[') ++end;
    cur = cur->find(path.substr(i, end - i));
    if (cur == nullptr) return nullptr;
    i = end;
  }
  return cur;
}

bool ConfigNode::operator==(const ConfigNode& other) const {
  // Maps compare as unordered key/value sets; entry order is presentation.
  if (is_map() && other.is_map()) {
    const Map& a = std::get<Map>(value);
    const Map& b = std::get<Map>(other.value);
    if (a.size() != b.size()) return false;
    for (const Entry& e : a) {
      const ConfigNode* match = other.find(e.key);
      if (match == nullptr || !(e.value == *match)) return false;
    }
    return true;
  }
  if (is_list() && other.is_list()) {
    const List& a = std::get<List>(value);
    const List& b = std::get<List>(other.value);
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!(a[i] == b[i])) return false;
    }
    return true;
  }
  return value == other.value;
}

std::string ConfigNode::type_name() const {
  switch (value.index()) {
    case 0: return "null";
    case 1: return "boolean";
    case 2: return "integer";
    case 3: return "real";
    case 4: return "string";
    case 5: return "list";
    case 6: return "map";
  }
  return "unknown";
}

ConfigNode make_map(
    std::initializer_list<std::pair<std::string, ConfigNode>> entries) {
  ConfigNode node = ConfigNode::map();
  for (const auto& [k, v] : entries) {
    node.set(k, v);
  }
  return node;
}

ConfigNode make_list(std::initializer_list<ConfigNode> items) {
  ConfigNode::List l;
  for (const auto& item : items) l.push_back(item);
  return ConfigNode(std::move(l));
}

} // namespace edna::config
