#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "tiersim/types.hpp"

namespace tiersim {

// Flat `key = value` config files. Lines starting with '#' and blank lines
// are ignored; keys are case-sensitive.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SimError(ErrorCode::ConfigError, "cannot open " + path);
    KeyValueConfig cfg;
    cfg.parse_stream(in, path);
    return cfg;
  }

  static KeyValueConfig from_string(const std::string& text) {
    std::istringstream in(text);
    KeyValueConfig cfg;
    cfg.parse_stream(in, "<string>");
    return cfg;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& dflt) const {
    auto it = values_.find(key);
    return it == values_.end() ? dflt : it->second;
  }

  double get_double(const std::string& key, double dflt) const {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    try {
      return std::stod(it->second);
    } catch (const std::exception&) {
      throw SimError(ErrorCode::ConfigError, "bad numeric value for " + key);
    }
  }

  std::int64_t get_int(const std::string& key, std::int64_t dflt) const {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    try {
      return std::stoll(it->second);
    } catch (const std::exception&) {
      throw SimError(ErrorCode::ConfigError, "bad integer value for " + key);
    }
  }

  bool get_bool(const std::string& key, bool dflt) const {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw SimError(ErrorCode::ConfigError, "bad boolean value for " + key);
  }

  // Sizes accept a numeric value with an optional KiB/MiB/GiB/TiB suffix
  // (or KB/MB/GB/TB treated the same, 1024-based).
  Bytes get_bytes(const std::string& key, Bytes dflt) const {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    return parse_bytes(it->second, key);
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  const std::map<std::string, std::string>& values() const { return values_; }

  static Bytes parse_bytes(const std::string& text, const std::string& key) {
    size_t pos = 0;
    double num = 0.0;
    try {
      num = std::stod(text, &pos);
    } catch (const std::exception&) {
      throw SimError(ErrorCode::ConfigError, "bad size value for " + key);
    }
    std::string suffix = text.substr(pos);
    while (!suffix.empty() && suffix.front() == ' ') suffix.erase(suffix.begin());
    double mult = 1.0;
    if (suffix == "" || suffix == "B") mult = 1.0;
    else if (suffix == "KiB" || suffix == "KB") mult = 1024.0;
    else if (suffix == "MiB" || suffix == "MB") mult = 1024.0 * 1024.0;
    else if (suffix == "GiB" || suffix == "GB") mult = 1024.0 * 1024.0 * 1024.0;
    else if (suffix == "TiB" || suffix == "TB") mult = 1024.0 * 1024.0 * 1024.0 * 1024.0;
    else throw SimError(ErrorCode::ConfigError, "unknown size suffix '" + suffix + "' for " + key);
    return static_cast<Bytes>(num * mult);
  }

 private:
  void parse_stream(std::istream& in, const std::string& origin) {
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      size_t start = line.find_first_not_of(" \t\r");
      if (start == std::string::npos) continue;
      if (line[start] == '#') continue;
      size_t eq = line.find('=');
      if (eq == std::string::npos) {
        throw SimError(ErrorCode::ConfigError,
                       origin + ":" + std::to_string(lineno) + ": expected key = value");
      }
      auto trim = [](std::string s) {
        size_t a = s.find_first_not_of(" \t\r");
        size_t b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
      };
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (key.empty()) {
        throw SimError(ErrorCode::ConfigError,
                       origin + ":" + std::to_string(lineno) + ": empty key");
      }
      values_[key] = value;
    }
  }

  std::map<std::string, std::string> values_;
};

enum class PlacementMode { HdfsAllHdd, StaticTiered };

inline PlacementMode placement_mode_from_string(const std::string& s) {
  if (s == "hdfs" || s == "all-hdd") return PlacementMode::HdfsAllHdd;
  if (s == "tiered" || s == "static-tiered") return PlacementMode::StaticTiered;
  throw SimError(ErrorCode::ConfigError, "unknown placement mode '" + s + "'");
}

inline const char* placement_mode_name(PlacementMode m) {
  return m == PlacementMode::HdfsAllHdd ? "hdfs" : "tiered";
}

struct TierConfig {
  Bytes capacity = 0;
  double read_bw = 0.0;   // bytes/second
  double write_bw = 0.0;  // bytes/second
};

// Cluster-wide configuration. Bandwidth defaults are plumbing values, not
// measured claims; every emitted report records the values used.
struct ClusterConfig {
  int node_count = 11;
  TierConfig tiers[kTierCount] = {
      {4 * kGiB, 2000.0 * kMiB, 1000.0 * kMiB},   // memory
      {64 * kGiB, 500.0 * kMiB, 300.0 * kMiB},    // ssd
      {400 * kGiB, 150.0 * kMiB, 90.0 * kMiB},    // hdd
  };
  int access_history_k = 12;
  std::uint64_t seed = 1;
  PlacementMode placement_mode = PlacementMode::StaticTiered;
  bool tier_aware = true;
  int default_replication = 3;

  static ClusterConfig from_kv(const KeyValueConfig& kv) {
    ClusterConfig c;
    c.node_count = static_cast<int>(kv.get_int("node_count", c.node_count));
    const char* names[kTierCount] = {"memory", "ssd", "hdd"};
    for (int i = 0; i < kTierCount; ++i) {
      std::string n = names[i];
      c.tiers[i].capacity = kv.get_bytes(n + "_capacity", c.tiers[i].capacity);
      c.tiers[i].read_bw =
          kv.get_double(n + "_read_bw_mib", c.tiers[i].read_bw / kMiB) * kMiB;
      c.tiers[i].write_bw =
          kv.get_double(n + "_write_bw_mib", c.tiers[i].write_bw / kMiB) * kMiB;
    }
    c.access_history_k = static_cast<int>(kv.get_int("k", c.access_history_k));
    c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<std::int64_t>(c.seed)));
    c.placement_mode =
        placement_mode_from_string(kv.get_string("placement_mode", placement_mode_name(c.placement_mode)));
    c.tier_aware = kv.get_bool("tier_aware", c.tier_aware);
    c.default_replication =
        static_cast<int>(kv.get_int("replication", c.default_replication));
    if (c.node_count < 1) throw SimError(ErrorCode::ConfigError, "node_count must be >= 1");
    if (c.access_history_k < 1) throw SimError(ErrorCode::ConfigError, "k must be >= 1");
    return c;
  }

  static ClusterConfig from_file(const std::string& path) {
    return from_kv(KeyValueConfig::from_file(path));
  }
};

}  // namespace tiersim
