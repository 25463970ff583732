#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#include "edna/config.hpp"

namespace edna::config {

namespace {

struct Line {
  int indent = 0;
  std::string content; // comment-stripped, trimmed right, without indent
  int number = 0;      // 1-based
};

bool is_digit(char c) { return c >= '0' && c <= '9'; }

/// Strip a trailing comment, honoring single and double quotes.
std::string strip_comment(const std::string& raw) {
  char quote = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const char c = raw[i];
    if (quote != 0) {
      if (c == '\\' && quote == '"' && i + 1 < raw.size()) {
        ++i;
      } else if (c == quote) {
        quote = 0;
      }
      continue;
    }
    if (c == '\'' || c == '"') {
      quote = c;
    } else if (c == '#') {
      return raw.substr(0, i);
    }
  }
  return raw;
}

std::vector<Line> preprocess(const std::string& text) {
  std::vector<Line> lines;
  std::size_t start = 0;
  int number = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string raw = text.substr(start, end - start);
    ++number;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();

    std::size_t i = 0;
    while (i < raw.size() && raw[i] == ' ') ++i;
    if (i < raw.size() && raw[i] == '\t') {
      throw ParseError("tab character in indentation", number, int(i) + 1);
    }
    std::string body = strip_comment(raw.substr(i));
    while (!body.empty() && (body.back() == ' ' || body.back() == '\t')) {
      body.pop_back();
    }
    if (!body.empty()) {
      lines.push_back(Line{int(i), std::move(body), number});
    }
    if (end == text.size()) break;
    start = end + 1;
  }
  return lines;
}

// -----------------------------------------------------------------------
// Scalar classification (decimal ints, reals with optional exponent,
// true/false, null/~, everything else a string)
// -----------------------------------------------------------------------

bool looks_like_int(const std::string& s) {
  std::size_t i = 0;
  if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
  if (i >= s.size()) return false;
  for (; i < s.size(); ++i) {
    if (!is_digit(s[i])) return false;
  }
  return true;
}

bool looks_like_real(const std::string& s) {
  std::size_t i = 0;
  if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
  bool digits_before = false, dot = false, digits_after = false;
  while (i < s.size() && is_digit(s[i])) {
    digits_before = true;
    ++i;
  }
  if (i < s.size() && s[i] == '.') {
    dot = true;
    ++i;
    while (i < s.size() && is_digit(s[i])) {
      digits_after = true;
      ++i;
    }
  }
  if (!digits_before && !digits_after) return false;
  bool exponent = false;
  if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
    exponent = true;
    ++i;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
    if (i >= s.size() || !is_digit(s[i])) return false;
    while (i < s.size() && is_digit(s[i])) ++i;
  }
  if (i != s.size()) return false;
  return dot || exponent; // otherwise it is an integer
}

bool is_bool_token(const std::string& s, bool& out) {
  if (s == "true" || s == "True" || s == "TRUE") {
    out = true;
    return true;
  }
  if (s == "false" || s == "False" || s == "FALSE") {
    out = false;
    return true;
  }
  return false;
}

bool is_null_token(const std::string& s) {
  return s == "null" || s == "Null" || s == "NULL" || s == "~";
}

ConfigNode classify_scalar(const std::string& token, int line, int col) {
  if (is_null_token(token)) return ConfigNode::null();
  bool b;
  if (is_bool_token(token, b)) return ConfigNode(b);
  if (looks_like_int(token)) {
    errno = 0;
    char* end = nullptr;
    const long long v = std::strtoll(token.c_str(), &end, 10);
    if (errno == ERANGE) {
      throw ParseError("integer out of range: " + token, line, col);
    }
    return ConfigNode(std::int64_t(v));
  }
  if (looks_like_real(token)) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (errno == ERANGE && (v == HUGE_VAL || v == -HUGE_VAL)) {
      throw ParseError("real out of range: " + token, line, col);
    }
    return ConfigNode(v);
  }
  return ConfigNode(token);
}

// -----------------------------------------------------------------------
// Flow values: scalars, [..], {..}
// -----------------------------------------------------------------------

class FlowParser {
public:
  FlowParser(const std::string& text, int line, int col_base)
      : text_(text), line_(line), col_base_(col_base) {}

  ConfigNode parse_all() {
    ConfigNode v = parse_value(/*in_flow=*/false);
    skip_spaces();
    if (pos_ != text_.size()) {
      fail("unexpected trailing characters");
    }
    return v;
  }

  ConfigNode parse_value(bool in_flow) {
    skip_spaces();
    if (pos_ >= text_.size()) fail("expected a value");
    const char c = text_[pos_];
    if (c == '[') return parse_flow_list();
    if (c == '{') return parse_flow_map();
    if (c == '"') return ConfigNode(parse_double_quoted());
    if (c == '\'') return ConfigNode(parse_single_quoted());
    return parse_bare(in_flow);
  }

private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(msg, line_, col_base_ + int(pos_));
  }

  void skip_spaces() {
    while (pos_ < text_.size() && text_[pos_] == ' ') ++pos_;
  }

  void expect(char c) {
    if (pos_ >= text_.size() || text_[pos_] != c) {
      fail(std::string("expected '") + c + "'");
    }
    ++pos_;
  }

  ConfigNode parse_flow_list() {
    expect('[');
    ConfigNode::List items;
    skip_spaces();
    if (pos_ < text_.size() && text_[pos_] == ']') {
      ++pos_;
      return ConfigNode(std::move(items));
    }
    while (true) {
      items.push_back(parse_value(/*in_flow=*/true));
      skip_spaces();
      if (pos_ >= text_.size()) fail("unterminated flow list");
      if (text_[pos_] == ',') {
        ++pos_;
        continue;
      }
      if (text_[pos_] == ']') {
        ++pos_;
        return ConfigNode(std::move(items));
      }
      fail("expected ',' or ']' in flow list");
    }
  }

  ConfigNode parse_flow_map() {
    expect('{');
    ConfigNode node = ConfigNode::map();
    skip_spaces();
    if (pos_ < text_.size() && text_[pos_] == '}') {
      ++pos_;
      return node;
    }
    while (true) {
      skip_spaces();
      std::string key;
      if (pos_ < text_.size() && (text_[pos_] == '"' || text_[pos_] == '\'')) {
        key = text_[pos_] == '"' ? parse_double_quoted() : parse_single_quoted();
      } else {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && text_[pos_] != ':' && text_[pos_] != ',' &&
               text_[pos_] != '}') {
          ++pos_;
        }
        key = trim(text_.substr(start, pos_ - start));
        if (key.empty()) fail("empty key in flow map");
      }
      skip_spaces();
      expect(':');
      ConfigNode value = parse_value(/*in_flow=*/true);
      if (node.find(key) != nullptr) {
        fail("duplicate key '" + key + "'");
      }
      node.set(key, std::move(value));
      skip_spaces();
      if (pos_ >= text_.size()) fail("unterminated flow map");
      if (text_[pos_] == ',') {
        ++pos_;
        continue;
      }
      if (text_[pos_] == '}') {
        ++pos_;
        return node;
      }
      fail("expected ',' or '}' in flow map");
    }
  }

  std::string parse_double_quoted() {
    expect('"');
    std::string out;
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '"') {
        ++pos_;
        return out;
      }
      if (c == '\\') {
        ++pos_;
        if (pos_ >= text_.size()) fail("unterminated escape");
        switch (text_[pos_]) {
          case 'n': out.push_back('\n'); break;
          case 't': out.push_back('\t'); break;
          case 'r': out.push_back('\r'); break;
          case '\\': out.push_back('\\'); break;
          case '"': out.push_back('"'); break;
          default: fail("unsupported escape sequence");
        }
        ++pos_;
        continue;
      }
      out.push_back(c);
      ++pos_;
    }
    fail("unterminated double-quoted string");
  }

  std::string parse_single_quoted() {
    expect('\'');
    std::string out;
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '\'') {
        if (pos_ + 1 < text_.size() && text_[pos_ + 1] == '\'') {
          out.push_back('\'');
          pos_ += 2;
          continue;
        }
        ++pos_;
        return out;
      }
      out.push_back(c);
      ++pos_;
    }
    fail("unterminated single-quoted string");
  }

  ConfigNode parse_bare(bool in_flow) {
    const std::size_t start = pos_;
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (in_flow && (c == ',' || c == ']' || c == '}' || c == ':')) break;
      ++pos_;
    }
    const std::string token = trim(text_.substr(start, pos_ - start));
    if (token.empty()) fail("empty scalar");
    return classify_scalar(token, line_, col_base_ + int(start));
  }

  static std::string trim(std::string s) {
    std::size_t b = 0, e = s.size();
    while (b < e && s[b] == ' ') ++b;
    while (e > b && s[e - 1] == ' ') --e;
    return s.substr(b, e - b);
  }

  const std::string& text_;
  std::size_t pos_ = 0;
  int line_;
  int col_base_;
};

// -----------------------------------------------------------------------
// Block structure
// -----------------------------------------------------------------------

class BlockParser {
public:
  explicit BlockParser(std::vector<Line> lines) : lines_(std::move(lines)) {}

  ConfigNode parse_document() {
    if (lines_.empty()) return ConfigNode::map();
    ConfigNode root = parse_block(lines_[0].indent);
    if (pos_ < lines_.size()) {
      throw ParseError("content at unexpected indentation",
                       lines_[pos_].number, lines_[pos_].indent + 1);
    }
    if (!root.is_map()) {
      throw ParseError("document root must be a map", lines_[0].number, 1);
    }
    return root;
  }

private:
  static bool is_dash_line(const std::string& content) {
    return content == "-" || content.rfind("- ", 0) == 0;
  }

  ConfigNode parse_block(int indent) {
    if (is_dash_line(lines_[pos_].content)) return parse_list(indent);
    return parse_map(indent);
  }

  /// Split "KEY: value" at the first top-level colon (quote-aware); a colon
  /// either ends the line or is followed by a space.
  bool split_key_value(const Line& line, std::string& key, std::string& rest,
                       int& value_col) {
    const std::string& s = line.content;
    std::size_t i = 0;
    std::string parsed_key;
    if (s[0] == '"' || s[0] == '\'') {
      const char quote = s[0];
      std::size_t j = 1;
      std::string out;
      while (j < s.size()) {
        if (quote == '\'' && s[j] == '\'' && j + 1 < s.size() &&
            s[j + 1] == '\'') {
          out.push_back('\'');
          j += 2;
          continue;
        }
        if (s[j] == quote) break;
        if (quote == '"' && s[j] == '\\' && j + 1 < s.size()) {
          out.push_back(s[j + 1]);
          j += 2;
          continue;
        }
        out.push_back(s[j]);
        ++j;
      }
      if (j >= s.size()) {
        throw ParseError("unterminated quoted key", line.number,
                         line.indent + 1);
      }
      parsed_key = out;
      i = j + 1;
      while (i < s.size() && s[i] == ' ') ++i;
      if (i >= s.size() || s[i] != ':') return false;
    } else {
      char q = 0;
      int depth = 0;
      std::size_t colon = std::string::npos;
      for (; i < s.size(); ++i) {
        const char c = s[i];
        if (q != 0) {
          if (c == q) q = 0;
          continue;
        }
        if (c == '\'' || c == '"') {
          q = c;
        } else if (c == '[' || c == '{') {
          ++depth;
        } else if (c == ']' || c == '}') {
          --depth;
        } else if (c == ':' && depth == 0) {
          if (i + 1 == s.size() || s[i + 1] == ' ') {
            colon = i;
            break;
          }
        }
      }
      if (colon == std::string::npos) return false;
      parsed_key = s.substr(0, colon);
      while (!parsed_key.empty() && parsed_key.back() == ' ') {
        parsed_key.pop_back();
      }
      if (parsed_key.empty()) {
        throw ParseError("empty key", line.number, line.indent + 1);
      }
      i = colon;
    }
    // i points at the colon
    key = parsed_key;
    std::size_t v = i + 1;
    while (v < s.size() && s[v] == ' ') ++v;
    rest = s.substr(v);
    value_col = line.indent + int(v) + 1;
    return true;
  }

  ConfigNode parse_map(int indent) {
    ConfigNode node = ConfigNode::map();
    while (pos_ < lines_.size() && lines_[pos_].indent == indent &&
           !is_dash_line(lines_[pos_].content)) {
      const Line line = lines_[pos_];
      std::string key, rest;
      int value_col = 0;
      if (!split_key_value(line, key, rest, value_col)) {
        throw ParseError("expected 'key: value'", line.number,
                         line.indent + 1);
      }
      if (node.find(key) != nullptr) {
        throw ParseError("duplicate key '" + key + "'", line.number,
                         line.indent + 1);
      }
      ++pos_;
      ConfigNode value;
      if (!rest.empty()) {
        FlowParser fp(rest, line.number, value_col);
        value = fp.parse_all();
        if (pos_ < lines_.size() && lines_[pos_].indent > indent) {
          throw ParseError("unexpected indentation under scalar value",
                           lines_[pos_].number, lines_[pos_].indent + 1);
        }
      } else if (pos_ < lines_.size() && lines_[pos_].indent > indent) {
        value = parse_block(lines_[pos_].indent);
      } else {
        value = ConfigNode::null();
      }
      node.set(key, std::move(value));
    }
    if (pos_ < lines_.size() && lines_[pos_].indent > indent) {
      throw ParseError("bad indentation", lines_[pos_].number,
                       lines_[pos_].indent + 1);
    }
    return node;
  }

  ConfigNode parse_list(int indent) {
    ConfigNode::List items;
    while (pos_ < lines_.size() && lines_[pos_].indent == indent &&
           is_dash_line(lines_[pos_].content)) {
      const Line line = lines_[pos_];
      if (line.content == "-") {
        ++pos_;
        if (pos_ < lines_.size() && lines_[pos_].indent > indent) {
          items.push_back(parse_block(lines_[pos_].indent));
        } else {
          items.push_back(ConfigNode::null());
        }
        continue;
      }
      std::string rest = line.content.substr(2);
      std::size_t lead = 0;
      while (lead < rest.size() && rest[lead] == ' ') ++lead;
      rest = rest.substr(lead);
      const int rest_indent = indent + 2 + int(lead);
      // Map entries and nested lists continue on following lines at the
      // rewritten indent; plain scalars are complete on this line.
      std::string key_probe, rest_probe;
      int col_probe = 0;
      Line rewritten{rest_indent, rest, line.number};
      const bool nested_dash = is_dash_line(rest);
      bool map_item = false;
      if (!nested_dash) {
        map_item = split_key_value(rewritten, key_probe, rest_probe, col_probe);
      }
      if (nested_dash || map_item) {
        lines_[pos_] = rewritten;
        items.push_back(parse_block(rest_indent));
      } else {
        FlowParser fp(rest, line.number, rest_indent + 1);
        items.push_back(fp.parse_all());
        ++pos_;
        if (pos_ < lines_.size() && lines_[pos_].indent > indent) {
          throw ParseError("unexpected indentation under list item",
                           lines_[pos_].number, lines_[pos_].indent + 1);
        }
      }
    }
    if (pos_ < lines_.size() && lines_[pos_].indent > indent) {
      throw ParseError("bad indentation in list", lines_[pos_].number,
                       lines_[pos_].indent + 1);
    }
    return ConfigNode(std::move(items));
  }

  std::vector<Line> lines_;
  std::size_t pos_ = 0;
};

} // namespace

ConfigNode parse_config(const std::string& text) {
  BlockParser parser(preprocess(text));
  return parser.parse_document();
}

ConfigNode parse_flow_text(const std::string& text) {
  FlowParser fp(text, 1, 1);
  return fp.parse_all();
}

} // namespace edna::config
