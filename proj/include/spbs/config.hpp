#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spbs/common.hpp"

namespace spbs {

// Flat "key = value" config file. Later sets win, so CLI flags applied after
// a file override it.
class KeyValueConfig {
 public:
  static KeyValueConfig from_file(const std::string& path);
  static KeyValueConfig from_string(const std::string& text);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::string> get_list(const std::string& key,
                                    const std::vector<std::string>& fallback) const;

  // Sorted "key = value" lines.
  std::string serialize() const;
  const std::map<std::string, std::string>& values() const { return values_; }

  // Rejects keys outside the known set (typo guard).
  void require_known(const std::vector<std::string>& known) const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace spbs
