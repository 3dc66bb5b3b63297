#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace mvmc {

/// Flat TOML subset: [section] headers, key = value pairs, # comments.
/// Values are stored as strings with typed accessors. Enough for the config
/// and manifest files this project reads and writes.
class TomlTable {
 public:
  static TomlTable parse(const std::string& text);
  static TomlTable load(const std::string& path);

  bool has(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback = "") const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& section, const std::string& key,
                       std::int64_t fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;

  void set(const std::string& section, const std::string& key, const std::string& value);
  void set(const std::string& section, const std::string& key, double value);
  void set(const std::string& section, const std::string& key, std::int64_t value);
  void set(const std::string& section, const std::string& key, bool value);

  std::string serialize() const;
  void save(const std::string& path) const;

  const std::map<std::string, std::map<std::string, std::string>>& sections() const {
    return sections_;
  }

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

/// Shortest round-trip decimal representation (deterministic output files).
std::string format_double(double value);

}  // namespace mvmc
