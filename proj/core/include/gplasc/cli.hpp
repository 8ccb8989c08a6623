// ============================================================================
// cli.hpp - subcommand front end: config parsing, dispatch, report emission
//
// Exit codes: 0 success, 1 assertion or runtime failure, 2 usage/config error.
// Every report embeds the fully resolved config; re-running a command from a
// report's embedded config reproduces the report byte-for-byte.
// ============================================================================
#pragma once

#include "gplasc/common.hpp"
#include "gplasc/serialize.hpp"

#include <filesystem>
#include <map>
#include <set>
#include <string>

namespace gplasc {

// Flat key-value config: one `key = value` per line, `#` comments. Typed
// getters record every resolved value (defaults included) for the report's
// config echo, and parse errors carry the offending line number.
class ConfigMap {
 public:
  ConfigMap() = default;
  static ConfigMap parse_file(const std::filesystem::path& path);
  static ConfigMap parse_string(const std::string& text);

  void set(const std::string& key, const std::string& value);  // CLI override
  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_double_list(const std::string& key,
                                      const std::string& fallback) const;
  std::vector<std::string> get_string_list(const std::string& key,
                                           const std::string& fallback) const;

  // Rejects keys outside the subcommand's vocabulary (typos fail loudly).
  void restrict_keys(const std::set<std::string>& known) const;

  Json echo() const;  // resolved key -> value strings, sorted

 private:
  int line_of(const std::string& key) const;

  std::map<std::string, std::string> values_;
  std::map<std::string, int> lines_;
  mutable std::map<std::string, std::string> resolved_;
};

int cmd_etf(int h, int count, std::uint64_t seed, const std::filesystem::path& out);
int cmd_verify(const ConfigMap& cfg, const std::filesystem::path& out);
int cmd_toy(const ConfigMap& cfg, const std::filesystem::path& out);
int cmd_continual(const ConfigMap& cfg, const std::filesystem::path& out);
int cmd_sweep(const ConfigMap& cfg, const std::filesystem::path& out);

int run_cli(int argc, const char* const* argv);

}  // namespace gplasc
