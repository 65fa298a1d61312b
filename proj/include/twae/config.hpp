#pragma once

// Plain-text `key = value` configuration files with `#` comments.

#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>

#include "twae/common.hpp"

namespace twae {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct ConfigEntry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

/// Parses `key = value` lines. Blank lines and text after `#` are ignored;
/// a repeated key or a line without `=` is an error.
inline std::vector<ConfigEntry> parse_config(std::istream& in, const std::string& name = "config") {
  std::vector<ConfigEntry> out;
  std::map<std::string, std::size_t> seen;
  std::string raw;
  for (std::size_t line = 1; std::getline(in, raw); ++line) {
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string text = detail::trim(raw);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError(name + ":" + std::to_string(line) + ": expected key = value");
    ConfigEntry e{detail::trim(std::string_view(text).substr(0, eq)), detail::trim(std::string_view(text).substr(eq + 1)),
                  line};
    if (e.key.empty()) throw ConfigError(name + ":" + std::to_string(line) + ": empty key");
    if (auto it = seen.find(e.key); it != seen.end())
      throw ConfigError(name + ":" + std::to_string(line) + ": key '" + e.key + "' already set on line " +
                        std::to_string(it->second));
    seen[e.key] = line;
    out.push_back(std::move(e));
  }
  return out;
}

inline std::vector<ConfigEntry> load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_config(in, path.string());
}

inline void write_config(std::ostream& os, const std::map<std::string, std::string>& values) {
  for (const auto& [k, v] : values) os << k << " = " << v << '\n';
}

}  // namespace twae
