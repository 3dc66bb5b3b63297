#include "mvmc/toml.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "mvmc/error.hpp"

namespace mvmc {

std::string format_double(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

TomlTable TomlTable::parse(const std::string& text) {
  TomlTable table;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      const auto close = line.find(']');
      if (close == std::string::npos) {
        throw InvalidConfig("toml line " + std::to_string(lineno) + ": unterminated section");
      }
      section = trim(line.substr(1, close - 1));
      table.sections_[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidConfig("toml line " + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    table.sections_[section][key] = value;
  }
  return table;
}

TomlTable TomlTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingInput("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

bool TomlTable::has(const std::string& section, const std::string& key) const {
  const auto s = sections_.find(section);
  return s != sections_.end() && s->second.count(key) > 0;
}

std::string TomlTable::get_string(const std::string& section, const std::string& key,
                                  const std::string& fallback) const {
  const auto s = sections_.find(section);
  if (s == sections_.end()) return fallback;
  const auto k = s->second.find(key);
  return k == s->second.end() ? fallback : k->second;
}

double TomlTable::get_double(const std::string& section, const std::string& key,
                             double fallback) const {
  if (!has(section, key)) return fallback;
  return std::stod(get_string(section, key));
}

std::int64_t TomlTable::get_int(const std::string& section, const std::string& key,
                                std::int64_t fallback) const {
  if (!has(section, key)) return fallback;
  return std::stoll(get_string(section, key));
}

bool TomlTable::get_bool(const std::string& section, const std::string& key,
                         bool fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get_string(section, key);
  if (v == "true") return true;
  if (v == "false") return false;
  throw InvalidConfig("expected true/false for " + section + "." + key);
}

void TomlTable::set(const std::string& section, const std::string& key,
                    const std::string& value) {
  sections_[section][key] = value;
}
void TomlTable::set(const std::string& section, const std::string& key, double value) {
  sections_[section][key] = format_double(value);
}
void TomlTable::set(const std::string& section, const std::string& key, std::int64_t value) {
  sections_[section][key] = std::to_string(value);
}
void TomlTable::set(const std::string& section, const std::string& key, bool value) {
  sections_[section][key] = value ? "true" : "false";
}

std::string TomlTable::serialize() const {
  std::ostringstream out;
  bool first = true;
  for (const auto& [section, keys] : sections_) {
    if (!first) out << "\n";
    first = false;
    if (!section.empty()) out << "[" << section << "]\n";
    for (const auto& [key, value] : keys) {
      const bool quote = value.empty() || value.find_first_not_of(
                                              "0123456789+-.eEtruefals_") != std::string::npos;
      out << key << " = " << (quote ? "\"" + value + "\"" : value) << "\n";
    }
  }
  return out.str();
}

void TomlTable::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << serialize();
}

}  // namespace mvmc
