#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "h3trans/dataingest.hpp"
#include "h3trans/evaluator.hpp"
#include "h3trans/model.hpp"
#include "h3trans/trainer.hpp"

namespace h3t {

struct ConfigKey {
  std::string_view name;
  std::string_view default_value;
  std::string_view doc;
};

/// Every accepted key with its default and a one-line description.
const std::vector<ConfigKey>& config_keys();

/// Flat key=value configuration. Unknown keys are rejected; every key has a
/// default.
class RunConfig {
 public:
  RunConfig();

  /// Reads `key = value` lines; '#' starts a comment.
  static RunConfig load(const std::filesystem::path& path);
  static RunConfig parse(std::istream& in, const std::string& source_name = "<config>");

  void set(const std::string& key, const std::string& value);
  /// "key=value" override.
  void apply_override(const std::string& assignment);
  const std::string& get(const std::string& key) const;
  /// True once a file or override gave the key a value.
  bool assigned(const std::string& key) const { return assigned_.count(key) > 0; }

  std::int64_t get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::string> get_list(const std::string& key) const;

  ingest::GenConfig gen_config() const;
  model::ModelConfig model_config() const;
  train::TrainConfig train_config() const;
  eval::EvalConfig eval_config() const;

  /// Every key in table order, one `key=value` per line.
  void dump(std::ostream& out) const;

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> assigned_;
};

}  // namespace h3t
