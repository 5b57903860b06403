#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "v2ir/common.hpp"

namespace v2ir {

// key=value configuration text: one pair per line, `#` starts a comment,
// blank lines ignored, duplicate keys rejected. Consumers `take` the keys
// they understand and then call `expect_empty`, so unknown keys are errors.
class ConfigMap {
 public:
  static ConfigMap parse_text(const std::string& text, const std::string& origin = "<text>") {
    ConfigMap cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      const std::size_t eq = trimmed.find('=');
      require_data(eq != std::string::npos,
                   origin + ":" + std::to_string(lineno) + ": expected key=value");
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      require_data(!key.empty(), origin + ":" + std::to_string(lineno) + ": empty key");
      for (const auto& [k, v] : cfg.items_)
        require_data(k != key, origin + ": duplicate key " + key);
      cfg.items_.emplace_back(key, value);
    }
    return cfg;
  }

  static ConfigMap parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require_data(in.good(), path + ": cannot open config");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str(), path);
  }

  std::optional<std::string> take(const std::string& key) {
    for (auto it = items_.begin(); it != items_.end(); ++it)
      if (it->first == key) {
        std::string v = it->second;
        items_.erase(it);
        return v;
      }
    return std::nullopt;
  }

  std::string take_or(const std::string& key, const std::string& fallback) {
    auto v = take(key);
    return v ? *v : fallback;
  }

  double take_double(const std::string& key, double fallback) {
    auto v = take(key);
    if (!v) return fallback;
    try {
      std::size_t pos = 0;
      const double d = std::stod(*v, &pos);
      require_data(pos == v->size(), "");
      return d;
    } catch (const std::exception&) {
      throw data_error(origin_ + ": key " + key + " is not a number: " + *v);
    }
  }

  long long take_int(const std::string& key, long long fallback) {
    auto v = take(key);
    if (!v) return fallback;
    try {
      std::size_t pos = 0;
      const long long i = std::stoll(*v, &pos);
      require_data(pos == v->size(), "");
      return i;
    } catch (const std::exception&) {
      throw data_error(origin_ + ": key " + key + " is not an integer: " + *v);
    }
  }

  std::uint64_t take_u64(const std::string& key, std::uint64_t fallback) {
    auto v = take(key);
    if (!v) return fallback;
    try {
      std::size_t pos = 0;
      const unsigned long long i = std::stoull(*v, &pos);
      require_data(pos == v->size(), "");
      return i;
    } catch (const std::exception&) {
      throw data_error(origin_ + ": key " + key + " is not an unsigned integer: " + *v);
    }
  }

  bool take_bool(const std::string& key, bool fallback) {
    auto v = take(key);
    if (!v) return fallback;
    if (*v == "1" || *v == "true") return true;
    if (*v == "0" || *v == "false") return false;
    throw data_error(origin_ + ": key " + key + " is not a boolean: " + *v);
  }

  void expect_empty() const {
    if (items_.empty()) return;
    std::string keys;
    for (const auto& [k, v] : items_) keys += (keys.empty() ? "" : ", ") + k;
    throw data_error(origin_ + ": unknown keys: " + keys);
  }

  bool empty() const { return items_.empty(); }
  std::size_t size() const { return items_.size(); }
  const std::string& origin() const { return origin_; }

  static std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r')) ++a;
    while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
    return s.substr(a, b - a);
  }

 private:
  std::vector<std::pair<std::string, std::string>> items_;
  std::string origin_;
};

// Splits a comma-separated list, trimming each element; empty elements are
// rejected, an empty string yields an empty list.
inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  if (ConfigMap::trim(s).empty()) return out;
  while (true) {
    const std::size_t comma = s.find(',', start);
    const std::string item = ConfigMap::trim(
        comma == std::string::npos ? s.substr(start) : s.substr(start, comma - start));
    require_data(!item.empty(), "list has an empty element: " + s);
    out.push_back(item);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace v2ir
