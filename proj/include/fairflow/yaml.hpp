#pragma once

#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fairflow/errors.hpp"

namespace fairflow::yaml {

// Parser for the YAML subset used by configuration files: block mappings,
// block sequences, flow sequences of scalars, quoted and plain scalars,
// comments. Anchors, aliases, tags, flow mappings, block scalars and
// multi-document streams are rejected. Indentation is spaces only.

using json = nlohmann::json;

namespace detail {

struct Line {
  int indent = 0;
  std::string text;  // content with indent stripped, comment removed
  int number = 0;    // 1-based line number in the source
};

[[noreturn]] inline void fail(int line, const std::string& msg) {
  raise(Errc::ParseError, "line " + std::to_string(line) + ": " + msg);
}

inline std::string strip_comment(const std::string& s, int lineno) {
  std::string out;
  out.reserve(s.size());
  char quote = '\0';
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (quote != '\0') {
      out.push_back(c);
      if (quote == '"' && c == '\\' && i + 1 < s.size()) {
        out.push_back(s[++i]);
      } else if (c == quote) {
        if (quote == '\'' && i + 1 < s.size() && s[i + 1] == '\'') {
          out.push_back(s[++i]);  // '' escape inside single quotes
        } else {
          quote = '\0';
        }
      }
      continue;
    }
    if (c == '\'' || c == '"') {
      quote = c;
      out.push_back(c);
      continue;
    }
    if (c == '#' && (i == 0 || s[i - 1] == ' ' || s[i - 1] == '\t')) break;
    if (c == '\t') fail(lineno, "tab character; indent and separate with spaces");
    out.push_back(c);
  }
  if (quote != '\0') fail(lineno, "unterminated quoted string");
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

inline std::vector<Line> split_lines(const std::string& text) {
  std::vector<Line> lines;
  int number = 0;
  std::size_t pos = 0;
  bool first = true;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string raw = text.substr(pos, end - pos);
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    ++number;
    pos = end + 1;
    if (pos > text.size() && raw.empty()) break;
    std::string content = strip_comment(raw, number);
    if (content.empty()) continue;
    int indent = 0;
    while (indent < static_cast<int>(content.size()) && content[indent] == ' ')
      ++indent;
    std::string body = content.substr(indent);
    if (body.empty()) continue;
    if (first && body == "---") {  // optional document start marker
      first = false;
      continue;
    }
    first = false;
    if (body == "---" || body == "...")
      fail(number, "multi-document streams are not supported");
    if (body[0] == '%') fail(number, "directives are not supported");
    lines.push_back(Line{indent, std::move(body), number});
  }
  return lines;
}

inline void check_plain(const std::string& s, int lineno) {
  if (s.empty()) return;
  const char c = s[0];
  if (c == '&' || c == '*')
    fail(lineno, "anchors and aliases are not supported");
  if (c == '!') fail(lineno, "tags are not supported");
  if (c == '{') fail(lineno, "flow mappings are not supported");
  if (c == '|' || c == '>') fail(lineno, "block scalars are not supported");
  if (c == '?') fail(lineno, "complex mapping keys are not supported");
}

inline json parse_scalar(const std::string& s, int lineno);

inline json parse_flow_sequence(const std::string& s, int lineno) {
  // s starts with '[' and must end with ']'
  json arr = json::array();
  std::size_t i = 1;
  auto skip_spaces = [&] {
    while (i < s.size() && s[i] == ' ') ++i;
  };
  skip_spaces();
  if (i < s.size() && s[i] == ']') {
    if (i + 1 != s.size()) fail(lineno, "trailing content after ']'");
    return arr;
  }
  while (true) {
    skip_spaces();
    if (i >= s.size()) fail(lineno, "unterminated flow sequence");
    std::string item;
    if (s[i] == '[') {
      int depth = 0;
      std::size_t start = i;
      for (; i < s.size(); ++i) {
        if (s[i] == '[') ++depth;
        if (s[i] == ']' && --depth == 0) {
          ++i;
          break;
        }
      }
      if (depth != 0) fail(lineno, "unterminated nested flow sequence");
      arr.push_back(parse_flow_sequence(s.substr(start, i - start), lineno));
    } else if (s[i] == '\'' || s[i] == '"') {
      const char q = s[i];
      std::size_t start = i++;
      while (i < s.size()) {
        if (q == '"' && s[i] == '\\') {
          i += 2;
          continue;
        }
        if (s[i] == q) {
          if (q == '\'' && i + 1 < s.size() && s[i + 1] == '\'') {
            i += 2;
            continue;
          }
          ++i;
          break;
        }
        ++i;
      }
      arr.push_back(parse_scalar(s.substr(start, i - start), lineno));
    } else {
      std::size_t start = i;
      while (i < s.size() && s[i] != ',' && s[i] != ']') ++i;
      item = s.substr(start, i - start);
      while (!item.empty() && item.back() == ' ') item.pop_back();
      if (item.empty()) fail(lineno, "empty item in flow sequence");
      arr.push_back(parse_scalar(item, lineno));
    }
    skip_spaces();
    if (i >= s.size()) fail(lineno, "unterminated flow sequence");
    if (s[i] == ',') {
      ++i;
      continue;
    }
    if (s[i] == ']') {
      if (i + 1 != s.size()) fail(lineno, "trailing content after ']'");
      return arr;
    }
    fail(lineno, "expected ',' or ']' in flow sequence");
  }
}

inline std::string decode_double_quoted(const std::string& s, int lineno) {
  std::string out;
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    char c = s[i];
    if (c == '\\') {
      if (i + 2 >= s.size() + 1) fail(lineno, "dangling escape");
      char e = s[++i];
      switch (e) {
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        case 'r': out.push_back('\r'); break;
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        case '0': out.push_back('\0'); break;
        default: fail(lineno, std::string("unsupported escape \\") + e);
      }
    } else {
      out.push_back(c);
    }
  }
  return out;
}

inline json parse_scalar(const std::string& s, int lineno) {
  if (s.empty()) return json();  // null
  if (s[0] == '"') {
    if (s.size() < 2 || s.back() != '"') fail(lineno, "unterminated string");
    return json(decode_double_quoted(s, lineno));
  }
  if (s[0] == '\'') {
    if (s.size() < 2 || s.back() != '\'') fail(lineno, "unterminated string");
    std::string out;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
      if (s[i] == '\'' && s[i + 1] == '\'') ++i;
      out.push_back(s[i]);
    }
    return json(out);
  }
  if (s[0] == '[') return parse_flow_sequence(s, lineno);
  check_plain(s, lineno);
  if (s == "null" || s == "~") return json();
  if (s == "true") return json(true);
  if (s == "false") return json(false);
  // integer?
  {
    std::size_t p = (s[0] == '+' || s[0] == '-') ? 1 : 0;
    bool digits = p < s.size();
    for (std::size_t i = p; i < s.size(); ++i)
      if (!std::isdigit(static_cast<unsigned char>(s[i]))) {
        digits = false;
        break;
      }
    if (digits) {
      std::int64_t v = 0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec == std::errc() && ptr == s.data() + s.size()) return json(v);
      if (s[0] != '-') {
        // beyond int64 range: seeds span the full unsigned 64-bit range
        std::uint64_t u = 0;
        auto [uptr, uec] = std::from_chars(s.data() + p, s.data() + s.size(), u);
        if (uec == std::errc() && uptr == s.data() + s.size()) return json(u);
      }
      fail(lineno, "integer out of range: " + s);
    }
  }
  // float?
  {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc() && ptr == s.data() + s.size()) {
      if (!std::isfinite(v)) fail(lineno, "non-finite number: " + s);
      return json(v);
    }
  }
  return json(s);
}

class Parser {
 public:
  explicit Parser(std::vector<Line> lines) : lines_(std::move(lines)) {}

  json run() {
    if (lines_.empty()) return json::object();
    json doc = parse_node(lines_[0].indent);
    if (pos_ != lines_.size())
      fail(lines_[pos_].number, "unexpected de-indented content");
    return doc;
  }

 private:
  const Line& cur() const { return lines_[pos_]; }
  bool done() const { return pos_ >= lines_.size(); }

  static bool is_seq_item(const std::string& body) {
    return body == "-" || body.rfind("- ", 0) == 0;
  }

  // Splits "key: value" / "key:"; returns false when the line is not a
  // mapping entry.
  static bool split_entry(const std::string& body, std::string& key,
                          std::string& value) {
    char quote = '\0';
    for (std::size_t i = 0; i < body.size(); ++i) {
      const char c = body[i];
      if (quote != '\0') {
        if (quote == '"' && c == '\\') {
          ++i;
        } else if (c == quote) {
          quote = '\0';
        }
        continue;
      }
      if (c == '\'' || c == '"') {
        quote = c;
        continue;
      }
      if (c == ':' && (i + 1 == body.size() || body[i + 1] == ' ')) {
        key = body.substr(0, i);
        while (!key.empty() && key.back() == ' ') key.pop_back();
        value = (i + 1 < body.size()) ? body.substr(i + 2) : std::string();
        std::size_t lead = value.find_first_not_of(' ');
        value = (lead == std::string::npos) ? std::string() : value.substr(lead);
        return !key.empty();
      }
    }
    return false;
  }

  json parse_node(int indent) {
    if (is_seq_item(cur().text)) return parse_sequence(indent);
    return parse_mapping(indent);
  }

  json parse_mapping(int indent) {
    json obj = json::object();
    while (!done() && cur().indent == indent && !is_seq_item(cur().text)) {
      const Line line = cur();
      std::string key, value;
      if (!split_entry(line.text, key, value)) {
        check_plain(line.text, line.number);
        fail(line.number, "expected 'key: value'");
      }
      check_plain(key, line.number);
      json jkey = parse_scalar(key, line.number);
      std::string key_str = jkey.is_string() ? jkey.get<std::string>() : key;
      if (obj.contains(key_str))
        fail(line.number, "duplicate key '" + key_str + "'");
      ++pos_;
      if (!value.empty()) {
        obj[key_str] = parse_scalar(value, line.number);
      } else if (!done() && cur().indent > indent) {
        obj[key_str] = parse_node(cur().indent);
      } else if (!done() && cur().indent == indent && is_seq_item(cur().text)) {
        obj[key_str] = parse_sequence(indent);
      } else {
        obj[key_str] = json();
      }
    }
    if (!done() && cur().indent > indent)
      fail(cur().number, "unexpected indentation");
    return obj;
  }

  json parse_sequence(int indent) {
    json arr = json::array();
    while (!done() && cur().indent == indent && is_seq_item(cur().text)) {
      const Line line = cur();
      std::string rest = line.text == "-" ? "" : line.text.substr(2);
      std::size_t lead = rest.find_first_not_of(' ');
      int extra = 2 + static_cast<int>(lead == std::string::npos ? 0 : lead);
      rest = (lead == std::string::npos) ? std::string() : rest.substr(lead);
      if (rest.empty()) {
        ++pos_;
        if (!done() && cur().indent > indent) {
          arr.push_back(parse_node(cur().indent));
        } else {
          arr.push_back(json());
        }
        continue;
      }
      std::string key, value;
      if (split_entry(rest, key, value)) {
        // "- key: value": rewrite as a mapping whose first line sits at the
        // key's column, then continue that mapping with the following lines.
        lines_[pos_] = Line{indent + extra, rest, line.number};
        arr.push_back(parse_mapping(indent + extra));
      } else {
        ++pos_;
        arr.push_back(parse_scalar(rest, line.number));
      }
    }
    if (!done() && cur().indent > indent)
      fail(cur().number, "unexpected indentation");
    return arr;
  }

  std::vector<Line> lines_;
  std::size_t pos_ = 0;
};

inline void emit_scalar(std::ostream& os, const json& v) {
  if (v.is_null()) {
    os << "null";
  } else if (v.is_boolean()) {
    os << (v.get<bool>() ? "true" : "false");
  } else if (v.is_string()) {
    const std::string& s = v.get_ref<const std::string&>();
    bool plain = !s.empty() && (std::isalpha(static_cast<unsigned char>(s[0])) ||
                                s[0] == '_');
    for (char c : s)
      plain = plain && (std::isalnum(static_cast<unsigned char>(c)) ||
                        c == '_' || c == '-' || c == '.' || c == '/');
    if (plain && s != "true" && s != "false" && s != "null")
      os << s;
    else
      os << json(s).dump();  // JSON string quoting is valid YAML
  } else {
    os << v.dump();
  }
}

inline void emit_node(std::ostream& os, const json& v, int indent) {
  const std::string pad(indent, ' ');
  if (v.is_object()) {
    for (auto it = v.begin(); it != v.end(); ++it) {
      os << pad;
      emit_scalar(os, json(it.key()));
      const json& val = it.value();
      if (val.is_object() && !val.empty()) {
        os << ":\n";
        emit_node(os, val, indent + 2);
      } else if (val.is_array() && !val.empty() && (val[0].is_object() || val[0].is_array())) {
        os << ":\n";
        emit_node(os, val, indent);
      } else if (val.is_array()) {
        os << ": [";
        for (std::size_t i = 0; i < val.size(); ++i) {
          if (i) os << ", ";
          emit_scalar(os, val[i]);
        }
        os << "]\n";
      } else {
        os << ": ";
        emit_scalar(os, val);
        os << "\n";
      }
    }
  } else if (v.is_array()) {
    for (const json& item : v) {
      if (item.is_object() && !item.empty()) {
        os << pad << "-";
        bool first = true;
        for (auto it = item.begin(); it != item.end(); ++it) {
          json one = json::object();
          one[it.key()] = it.value();
          if (first) {
            std::ostringstream sub;
            emit_node(sub, one, indent + 2);
            os << sub.str().substr(indent + 1);
            first = false;
          } else {
            emit_node(os, one, indent + 2);
          }
        }
      } else {
        os << pad << "- ";
        emit_scalar(os, item);
        os << "\n";
      }
    }
  } else {
    os << pad;
    emit_scalar(os, v);
    os << "\n";
  }
}

}  // namespace detail

/// Parses a YAML-subset document into a JSON value.
inline json parse(const std::string& text) {
  return detail::Parser(detail::split_lines(text)).run();
}

/// Loads and parses a YAML-subset file.
inline json parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::IoError, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

/// Emits a JSON value as a YAML-subset document (keys in nlohmann's sorted
/// order). parse(emit(x)) == x for values representable in the subset.
inline std::string emit(const json& v) {
  std::ostringstream os;
  detail::emit_node(os, v, 0);
  return os.str();
}

}  // namespace fairflow::yaml
