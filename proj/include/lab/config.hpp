#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace lab {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ExperimentKind {
  OnlineGridworld,
  OfflineGridworld,
  Cartpole,
  RmseCurve,
  TimeBench,
  LossDiag,
};

ExperimentKind experiment_kind_from_string(const std::string& name);
std::string to_string(ExperimentKind kind);

/// Flat key/value configuration. Defaults per experiment kind follow the
/// hyper-parameter table; unknown keys are rejected at parse time.
class RunConfig {
 public:
  explicit RunConfig(ExperimentKind kind);

  ExperimentKind kind() const { return kind_; }

  /// Throws ConfigError for unknown keys or malformed values.
  void set(const std::string& key, const std::string& value);
  void load_file(const std::string& path);

  /// Divide the big training budgets by 10 (CI profile).
  void apply_fast_profile();

  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  int get_int(const std::string& key) const;
  std::int64_t get_i64(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::vector<int> get_int_list(const std::string& key) const;

  std::vector<std::uint64_t> seeds;
  std::string out_dir;

  /// Sorted "key=value" lines over every resolved key.
  std::string canonical() const;
  std::uint64_t hash() const;  // FNV-1a over canonical form

 private:
  ExperimentKind kind_;
  std::map<std::string, std::string> values_;

  void validate(const std::string& key, const std::string& value) const;
};

std::uint64_t fnv1a(const std::string& data);

}  // namespace lab
