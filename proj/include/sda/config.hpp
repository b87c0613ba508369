#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>

#include "sda/trainer.hpp"

namespace sda {

// Dotted-key configuration with documented defaults. Unknown keys are
// rejected; the hash of the effective configuration is embedded in every
// artifact a run produces.
class RunConfig {
 public:
  RunConfig();  // defaults only

  // "key = value" lines, '#' comments. Values override defaults.
  static RunConfig load(const std::filesystem::path& path);
  static RunConfig from_string(const std::string& text);

  // Keys and default values, for --help and the example config.
  static const std::map<std::string, std::string>& defaults();

  std::string get(const std::string& key) const;
  long get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::array<double, 3> get_ratios(const std::string& key) const;

  void set(const std::string& key, const std::string& value);

  // FNV-1a over the sorted effective key=value pairs.
  std::string hash() const;

  TrainerConfig trainer_config() const;
  int max_len() const { return static_cast<int>(get_int("max_len")); }
  int vocab_size() const { return static_cast<int>(get_int("vocab_size")); }
  uint64_t seed() const { return static_cast<uint64_t>(get_int("seed")); }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace sda
