#pragma once

// Minimal `key = value` config files: '#' starts a comment, blank lines are
// ignored, keys are unique.

#include "sigver/common.hpp"

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>

namespace sigver {

class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in) {
    KeyValueConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto eq = line.find('=');
      const std::string key = trim(line.substr(0, eq));
      if (eq == std::string::npos) {
        if (!key.empty()) throw ParseError(line_no, "expected key = value");
        continue;
      }
      if (key.empty()) throw ParseError(line_no, "empty key");
      if (!cfg.values_.emplace(key, trim(line.substr(eq + 1))).second) {
        throw ParseError(line_no, "duplicate key '" + key + "'");
      }
    }
    return cfg;
  }

  static KeyValueConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config " + path.string());
    try {
      return parse(in);
    } catch (const ParseError& e) {
      throw Error(path.string() + ": " + e.what());
    }
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  /// Overwrites `target` when the key is present.
  template <class T>
  void get(const std::string& key, T& target) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return;
    used_.insert(key);
    const std::string& v = it->second;
    if constexpr (std::is_same_v<T, std::string>) {
      target = v;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (v == "true" || v == "1" || v == "yes") {
        target = true;
      } else if (v == "false" || v == "0" || v == "no") {
        target = false;
      } else {
        throw Error("config key '" + key + "': expected a boolean, got '" + v + "'");
      }
    } else {
      T parsed{};
      const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), parsed);
      if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw Error("config key '" + key + "': cannot parse '" + v + "'");
      }
      target = parsed;
    }
  }

  /// Throws on keys no get() call has consumed.
  void reject_unknown() const {
    for (const auto& [k, v] : values_) {
      if (!used_.count(k)) throw Error("unknown config key '" + k + "'");
    }
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

}  // namespace sigver
