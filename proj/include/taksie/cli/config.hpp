#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "taksie/gen/generator.hpp"
#include "taksie/policy/policy.hpp"
#include "taksie/repr/encoder.hpp"
#include "taksie/rollout/rollout.hpp"
#include "taksie/select/subgoals.hpp"

namespace taksie::cli {

struct Config {
  std::uint64_t seed = 1;
  std::filesystem::path out = "runs/default";

  std::size_t demos_per_task = 50;
  double speed_min = 0.5;
  double speed_max = 2.0;

  repr::ReprConfig repr;
  select::SelectionParams selection;
  gen::GenTrainConfig gen;
  policy::PolicyTrainConfig policy;
  std::size_t lcbc_steps = 30000;

  rollout::SuiteConfig suite;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Every settable key with its type name, e.g. {"eval.lambda", "unsigned integer"}.
const std::vector<std::pair<std::string, std::string>>& config_keys();

// Short flag names accepted in place of the dotted key.
std::string canonical_key(const std::string& key);

void set_value(Config& c, const std::string& key, const std::string& value);
std::string get_value(const Config& c, const std::string& key);

// "key = value" lines; '#' starts a comment; blank lines ignored.
std::map<std::string, std::string> parse_kv(const std::string& text);

// Defaults, then the file entries, then the overrides.
Config parse_config(const std::string& file_text, const std::map<std::string, std::string>& overrides = {});
Config load_config(const std::filesystem::path* file, const std::map<std::string, std::string>& overrides = {});

// Canonical "key = value" listing of every key.
std::string dump_config(const Config& c);

}  // namespace taksie::cli
