#pragma once

#include <charconv>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <type_traits>

#include "cratergan/common.hpp"

namespace cratergan {

/// Sectioned key-value text in the TOML style:
///
///   # comment
///   [sim]
///   width_px = 256
///   edge_decay = 0.1
///
/// Values may be bare or double-quoted strings. Keys before any section
/// header belong to the "" section.
struct ConfigDocument {
  std::map<std::string, std::map<std::string, std::string>> sections;

  static ConfigDocument parse(const std::string& text);
  static ConfigDocument load(const std::string& path);

  /// Applies "section.key=value" (or "key=value" for the root section).
  void set_override(const std::string& assignment);

  std::string render() const;
};

namespace detail {

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
  if constexpr (std::is_same_v<T, std::string>) {
    return text;
  } else if constexpr (std::is_same_v<T, bool>) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw ConfigError("config key '" + key + "': expected true/false, got '" + text + "'");
  } else {
    std::istringstream in(text);
    T v{};
    in >> v;
    if (in.fail() || !(in >> std::ws).eof()) {
      throw ConfigError("config key '" + key + "': cannot parse '" + text + "'");
    }
    return v;
  }
}

template <typename T>
std::string format_value(const T& v) {
  if constexpr (std::is_same_v<T, std::string>) {
    return "\"" + v + "\"";
  } else if constexpr (std::is_same_v<T, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_floating_point_v<T>) {
    char buf[32];  // shortest text that parses back to the same value
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
  } else {
    return std::to_string(v);
  }
}

}  // namespace detail

/// Assigns every entry of `values` onto the fields `cfg.visit` exposes.
/// Unknown keys are errors.
template <typename Config>
void assign_fields(Config& cfg, const std::map<std::string, std::string>& values,
                   const std::string& section) {
  for (const auto& [key, text] : values) {
    bool found = false;
    cfg.visit([&](const char* name, auto& field) {
      if (key == name) {
        field = detail::parse_value<std::remove_reference_t<decltype(field)>>(
            section + "." + key, text);
        found = true;
      }
    });
    if (!found) throw ConfigError("unknown config key '" + section + "." + key + "'");
  }
}

template <typename Config>
std::map<std::string, std::string> field_values(const Config& cfg) {
  std::map<std::string, std::string> out;
  // visit is non-const so that assign_fields can share it.
  Config copy = cfg;
  copy.visit([&](const char* name, auto& field) { out[name] = detail::format_value(field); });
  return out;
}

/// One-section rendering, suitable for embedding in checkpoints.
template <typename Config>
std::string render_fields(const Config& cfg, const std::string& section) {
  ConfigDocument doc;
  auto& sec = doc.sections[section];
  for (auto& [k, v] : field_values(cfg)) {
    if (v.size() >= 2 && v.front() == '"') v = v.substr(1, v.size() - 2);
    sec[k] = v;
  }
  return doc.render();
}

template <typename Config>
Config parse_fields(const std::string& text, const std::string& section) {
  Config cfg;
  auto doc = ConfigDocument::parse(text);
  auto it = doc.sections.find(section);
  if (it != doc.sections.end()) assign_fields(cfg, it->second, section);
  return cfg;
}

}  // namespace cratergan
