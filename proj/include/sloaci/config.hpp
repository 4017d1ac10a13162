#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sloaci/types.hpp"

namespace sloaci {

/// Flat key=value settings with dotted keys. Each entry remembers where it
/// came from so conflicts can name both sources.
class ConfigMap {
 public:
  struct Entry {
    std::string value;
    std::string source;
  };

  /// Sets a key from `source`. Setting the same key twice from one source
  /// layer with different values throws ConfigError naming both places.
  void set(const std::string& key, const std::string& value, const std::string& source);

  /// Parses `key=value` lines; blank lines and `#` comments are skipped.
  static ConfigMap parse(const std::string& text, const std::string& source_name);
  static ConfigMap load(const std::string& path);

  /// Entries of `over` replace ours (flags over file).
  void override_with(const ConfigMap& over);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  const std::map<std::string, Entry>& entries() const { return entries_; }

  std::optional<std::string> get(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::size_t get_count(const std::string& key, std::size_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::string> get_list(const std::string& key) const;

  /// Every key the harness understands; unknown keys are rejected.
  static const std::vector<std::string>& known_keys();
  void check_known() const;

 private:
  std::map<std::string, Entry> entries_;
};

std::vector<std::string> split_list(const std::string& text, char sep = ',');

}  // namespace sloaci
