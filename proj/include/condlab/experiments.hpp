#pragma once

// Experiment harness: a static registry of named, seeded, config-driven
// experiments. Each run writes plot-ready CSV artifacts plus a manifest with
// one explicit pass/fail entry per registered check; CSV bytes are
// reproducible for a fixed config + seed (timestamps live only in the
// manifest).

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace condlab::experiments {

inline constexpr const char* kToolVersion = "0.1.0";

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flat key = value configuration. '#' starts a comment; keys must be known
/// to the experiment being run. Typed getters report the offending field.
class Config {
 public:
  static Config from_file(const std::string& path);

  void merge_defaults(const std::map<std::string, std::string>& defaults);
  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  double get_double(const std::string& key) const;
  long get_long(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key) const;

  const std::map<std::string, std::string>& entries() const { return kv_; }
  /// Sorted key=value dump; hashing it pins defaults plus overrides.
  std::string canonical_dump() const;
  std::string hash_hex() const;  // FNV-1a 64 of the canonical dump

 private:
  std::map<std::string, std::string> kv_;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  std::map<std::string, double> values;
};

struct ExperimentInfo {
  std::string name;
  std::string description;
  std::string anchor;  // which claim of the theory the experiment exercises
};

struct ExperimentSpec {
  std::string name;
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;  // overrides the config's seed
  std::string out_dir = ".";
};

struct RunManifest {
  std::string tool_version;
  std::string generator;
  std::string experiment;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string started_at;
  std::string finished_at;
  std::vector<CheckResult> checks;
  std::vector<std::string> artifacts;  // paths relative to the output dir

  bool all_passed() const;
  nlohmann::json to_json() const;
};

/// Registered experiments, sorted by name.
std::vector<ExperimentInfo> list_experiments();

/// Dispatch, execute, write artifacts + manifest.json under spec.out_dir.
/// Unknown names raise std::invalid_argument listing the registry; config
/// problems raise ConfigError with the field path.
RunManifest run_experiment(const ExperimentSpec& spec);

/// Default configuration of a registered experiment (exposed for tests and
/// for generating template config files).
std::map<std::string, std::string> experiment_defaults(const std::string& name);

}  // namespace condlab::experiments
