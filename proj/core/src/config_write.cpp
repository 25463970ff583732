#include <algorithm>
#include <charconv>
#include <cmath>
#include <string>

#include "edna/config.hpp"

namespace edna::config {

namespace {

bool is_keyword_token(const std::string& s) {
  return s == "true" || s == "false" || s == "True" || s == "False" ||
         s == "TRUE" || s == "FALSE" || s == "null" || s == "Null" ||
         s == "NULL" || s == "~";
}

bool parses_as_number(const std::string& s) {
  if (s.empty()) return false;
  std::size_t i = 0;
  if (s[i] == '+' || s[i] == '-') ++i;
  if (i >= s.size()) return false;
  bool any_digit = false;
  for (; i < s.size(); ++i) {
    const char c = s[i];
    if (c >= '0' && c <= '9') {
      any_digit = true;
    } else if (c != '.' && c != 'e' && c != 'E' && c != '+' && c != '-') {
      return false;
    }
  }
  return any_digit;
}

bool needs_quotes(const std::string& s) {
  if (s.empty()) return true;
  if (is_keyword_token(s) || parses_as_number(s)) return true;
  if (s.front() == ' ' || s.back() == ' ') return true;
  if (s == "-" || s.rfind("- ", 0) == 0) return true;
  static const std::string reserved_first = "[]{}#&*?|>%@`!\"'";
  if (reserved_first.find(s.front()) != std::string::npos) return true;
  for (char c : s) {
    if (c == ':' || c == '#' || c == ',' || c == '[' || c == ']' ||
        c == '{' || c == '}' || c == '"' || c == '\n' || c == '\t' ||
        c == '\r') {
      return true;
    }
  }
  return false;
}

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out.push_back(c);
    }
  }
  out.push_back('"');
  return out;
}

std::string string_text(const std::string& s) {
  return needs_quotes(s) ? quoted(s) : s;
}

std::string real_text(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string out(buf, res.ptr);
  // Keep the real/integer distinction through a round-trip.
  if (out.find('.') == std::string::npos &&
      out.find('e') == std::string::npos &&
      out.find("inf") == std::string::npos &&
      out.find("nan") == std::string::npos) {
    out += ".0";
  }
  return out;
}

std::vector<const ConfigNode::Entry*> sorted_entries(const ConfigNode& m) {
  std::vector<const ConfigNode::Entry*> out;
  for (const auto& e : m.as_map()) out.push_back(&e);
  std::sort(out.begin(), out.end(),
            [](const ConfigNode::Entry* a, const ConfigNode::Entry* b) {
              return a->key < b->key;
            });
  return out;
}

void write_flow(const ConfigNode& node, std::string& out) {
  if (node.is_map()) {
    out.push_back('{');
    bool first = true;
    for (const auto* e : sorted_entries(node)) {
      if (!first) out += ", ";
      first = false;
      out += string_text(e->key);
      out += ": ";
      write_flow(e->value, out);
    }
    out.push_back('}');
    return;
  }
  if (node.is_list()) {
    out.push_back('[');
    bool first = true;
    for (const auto& item : node.as_list()) {
      if (!first) out += ", ";
      first = false;
      write_flow(item, out);
    }
    out.push_back(']');
    return;
  }
  out += scalar_text(node);
}

void write_block_map(const ConfigNode& node, int indent, std::string& out);
void write_block_list(const ConfigNode& node, int indent, std::string& out);

void write_block_value(const std::string& key, const ConfigNode& v, int indent,
                       std::string& out) {
  const std::string pad(indent, ' ');
  if (v.is_map()) {
    if (v.as_map().empty()) {
      out += pad + string_text(key) + ": {}\n";
    } else {
      out += pad + string_text(key) + ":\n";
      write_block_map(v, indent + 2, out);
    }
  } else if (v.is_list()) {
    if (v.as_list().empty()) {
      out += pad + string_text(key) + ": []\n";
    } else {
      out += pad + string_text(key) + ":\n";
      write_block_list(v, indent + 2, out);
    }
  } else {
    out += pad + string_text(key) + ": " + scalar_text(v) + "\n";
  }
}

void write_block_map(const ConfigNode& node, int indent, std::string& out) {
  for (const auto* e : sorted_entries(node)) {
    write_block_value(e->key, e->value, indent, out);
  }
}

void write_block_list(const ConfigNode& node, int indent, std::string& out) {
  const std::string pad(indent, ' ');
  for (const auto& item : node.as_list()) {
    if (item.is_map() && !item.as_map().empty()) {
      // Render the map at indent+2 and splice "- " into the first line.
      std::string sub;
      write_block_map(item, indent + 2, sub);
      sub[indent] = '-';
      sub[indent + 1] = ' ';
      out += sub;
    } else if (item.is_list() && !item.as_list().empty()) {
      std::string sub;
      write_block_list(item, indent + 2, sub);
      sub[indent] = '-';
      sub[indent + 1] = ' ';
      out += sub;
    } else if (item.is_map()) {
      out += pad + "- {}\n";
    } else if (item.is_list()) {
      out += pad + "- []\n";
    } else {
      out += pad + "- " + scalar_text(item) + "\n";
    }
  }
}

} // namespace

std::string scalar_text(const ConfigNode& node) {
  if (node.is_null()) return "null";
  if (node.is_bool()) return node.as_bool() ? "true" : "false";
  if (node.is_int()) return std::to_string(node.as_int());
  if (node.is_real()) return real_text(std::get<double>(node.value));
  if (node.is_string()) return string_text(node.as_string());
  throw Error("scalar_text called on a " + node.type_name());
}

std::string canonical_text(const ConfigNode& node) {
  if (!node.is_map()) {
    throw Error("canonical_text requires a map document, got " +
                node.type_name());
  }
  std::string out;
  write_block_map(node, 0, out);
  return out;
}

std::string canonical_flow_text(const ConfigNode& node) {
  std::string out;
  write_flow(node, out);
  return out;
}

} // namespace edna::config
