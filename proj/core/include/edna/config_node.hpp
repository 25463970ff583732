#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <variant>
#include <vector>

#include "edna/error.hpp"

namespace edna::config {

/// One node of a configuration document: null, scalar, list, or map.
/// Maps preserve insertion order (canonical serialization sorts on write,
/// so document identity never depends on it).
struct ConfigNode {
  struct Entry;
  using List = std::vector<ConfigNode>;
  using Map = std::vector<Entry>;
  using Value =
      std::variant<std::monostate, bool, std::int64_t, double, std::string,
                   List, Map>;

  Value value;

  ConfigNode() : value(std::monostate{}) {}
  ConfigNode(bool b) : value(b) {}
  ConfigNode(std::int64_t i) : value(i) {}
  ConfigNode(int i) : value(std::int64_t(i)) {}
  ConfigNode(double d) : value(d) {}
  ConfigNode(const char* s) : value(std::string(s)) {}
  ConfigNode(std::string s) : value(std::move(s)) {}
  ConfigNode(List l) : value(std::move(l)) {}
  ConfigNode(Map m) : value(std::move(m)) {}

  static ConfigNode null() { return ConfigNode(); }
  static ConfigNode map() { return ConfigNode(Map{}); }
  static ConfigNode list() { return ConfigNode(List{}); }

  bool is_null() const { return std::holds_alternative<std::monostate>(value); }
  bool is_bool() const { return std::holds_alternative<bool>(value); }
  bool is_int() const { return std::holds_alternative<std::int64_t>(value); }
  bool is_real() const { return std::holds_alternative<double>(value); }
  bool is_string() const { return std::holds_alternative<std::string>(value); }
  bool is_list() const { return std::holds_alternative<List>(value); }
  bool is_map() const { return std::holds_alternative<Map>(value); }
  bool is_scalar() const { return !is_list() && !is_map(); }

  bool as_bool() const;
  std::int64_t as_int() const;
  /// Accepts integer nodes too (promoted).
  double as_real() const;
  const std::string& as_string() const;
  const List& as_list() const;
  List& as_list();
  const Map& as_map() const;
  Map& as_map();

  /// Map lookup by key; nullptr when absent or not a map.
  const ConfigNode* find(const std::string& key) const;
  ConfigNode* find(const std::string& key);

  /// Map insert-or-assign preserving entry order for existing keys.
  void set(const std::string& key, ConfigNode node);
  bool erase(const std::string& key);

  /// Dotted-path lookup with [i] list indices, e.g. "OPTIMIZER[0].BASE_LR".
  const ConfigNode* at_path(const std::string& path) const;

  bool operator==(const ConfigNode& other) const;

  /// Human label for error messages ("integer", "map", ...).
  std::string type_name() const;
};

struct ConfigNode::Entry {
  std::string key;
  ConfigNode value;

  bool operator==(const Entry& other) const = default;
};

/// Convenience builder for literal maps in code and tests.
ConfigNode make_map(
    std::initializer_list<std::pair<std::string, ConfigNode>> entries);
ConfigNode make_list(std::initializer_list<ConfigNode> items);

} // namespace edna::config
