#pragma once

#include <cstdlib>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ironia/detail/text.hpp"
#include "ironia/error.hpp"

namespace ironia::detail {

// Reader for the small TOML subset used by run configs: [section] headers,
// key = value lines, '#' comments, and values that are quoted strings,
// integers, floats, booleans, or single-line arrays of those.

using Scalar = std::variant<std::string, long long, double, bool>;

struct ConfigValue {
  std::variant<Scalar, std::vector<Scalar>> value;
  int line = 0;
};

using ConfigTable = std::map<std::string, ConfigValue>;  // "section.key" -> value

inline std::string strip_comment(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
    if (line[i] == '#' && !in_string) return std::string(line.substr(0, i));
  }
  return std::string(line);
}

inline Scalar parse_scalar(std::string_view raw, int line_no) {
  const std::string s = trim(raw);
  auto fail = [&](const std::string& what) {
    return Error(ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": " + what);
  };
  if (s.empty()) throw fail("missing value");
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') throw fail("unterminated string");
    std::string out;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
      if (s[i] == '\\' && i + 2 < s.size()) {
        char n = s[++i];
        out.push_back(n == 'n' ? '\n' : n == 't' ? '\t' : n);
      } else {
        out.push_back(s[i]);
      }
    }
    return out;
  }
  if (s == "true") return true;
  if (s == "false") return false;
  char* end = nullptr;
  if (s.find_first_of(".eE") == std::string::npos) {
    long long v = std::strtoll(s.c_str(), &end, 10);
    if (end && *end == '\0') return v;
  }
  double d = std::strtod(s.c_str(), &end);
  if (end && *end == '\0') return d;
  throw fail("cannot parse value '" + s + "'");
}

inline std::vector<std::string> split_array_items(std::string_view body) {
  std::vector<std::string> items;
  std::string cur;
  bool in_string = false;
  for (char c : body) {
    if (c == '"') in_string = !in_string;
    if (c == ',' && !in_string) {
      items.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!trim(cur).empty()) items.push_back(cur);
  return items;
}

inline ConfigTable parse_keyvalue(std::string_view text) {
  ConfigTable table;
  std::string section;
  int line_no = 0;
  for (const auto& raw_line : split_lines(text)) {
    ++line_no;
    const std::string line = trim(strip_comment(raw_line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw Error(ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": bad section header");
      }
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const std::string full = section.empty() ? key : section + "." + key;
    if (table.count(full)) {
      throw Error(ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": duplicate key " + full);
    }
    ConfigValue cv;
    cv.line = line_no;
    if (!value.empty() && value.front() == '[') {
      if (value.back() != ']') {
        throw Error(ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": unterminated array");
      }
      std::vector<Scalar> items;
      for (const auto& item : split_array_items(std::string_view(value).substr(1, value.size() - 2))) {
        items.push_back(parse_scalar(item, line_no));
      }
      cv.value = std::move(items);
    } else {
      cv.value = parse_scalar(value, line_no);
    }
    table[full] = std::move(cv);
  }
  return table;
}

}  // namespace ironia::detail
