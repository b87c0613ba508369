#include "sda/config.hpp"

#include <fstream>
#include <sstream>

#include "sda/util.hpp"

namespace sda {

const std::map<std::string, std::string>& RunConfig::defaults() {
  static const std::map<std::string, std::string> table = {
      {"seed", "42"},
      {"batch_size", "16"},
      {"max_len", "20"},
      {"vocab_size", "50000"},
      {"data.input", ""},
      {"data.split_ratios", "0.8,0.1,0.1"},
      {"run.out", "runs/sda"},
      {"encoder.hidden", "64"},
      {"encoder.embedding", "64"},
      {"generator.hidden", "64"},
      {"generator.min_steps", "10"},
      {"generator.max_steps", "30"},
      {"selector.target_fraction", "0.6"},
      {"vae.z_dim", "32"},
      {"vae.hidden", "64"},
      {"trainer.max_steps", "30000"},
      {"trainer.dialog_steps", "400"},
      {"trainer.disc_cycle", "6"},
      {"trainer.lr", "0.001"},
      {"trainer.selector_lr", "0.0001"},
      {"trainer.disc_lr", "0.001"},
      {"trainer.selector_weight_decay", "0.1"},
      {"trainer.window", "50"},
      {"trainer.lg_updates_generator", "false"},
      {"trainer.loss_weights.adv_quality", "1.0"},
      {"trainer.loss_weights.adv_repr", "1.0"},
      {"trainer.loss_weights.length_reg", "64.0"},
      {"trainer.loss_weights.dpp", "0.2"},
      {"trainer.loss_weights.vae", "1.0"},
      {"trainer.loss_weights.mle", "1.0"},
      {"augmenter.fraction", "0.6"},
      {"augmenter.multiplier", "10"},
      {"augmenter.kind", "mock"},
      {"augmenter.endpoint", ""},
      {"augmenter.pivot_lang", "de"},
      {"augmenter.max_inflight", "4"},
      {"augmenter.retries", "3"},
      {"metrics.embeddings_path", ""},
  };
  return table;
}

RunConfig::RunConfig() : values_(defaults()) {}

RunConfig RunConfig::from_string(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config line " + std::to_string(lineno) +
                       ": expected key = value");
    }
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      return s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    cfg.set(key, value);
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  return from_string(read_text_file(path));
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!defaults().count(key)) {
    throw UsageError("unknown config key: " + key);
  }
  values_[key] = value;
}

std::string RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw UsageError("unknown config key: " + key);
  return it->second;
}

long RunConfig::get_int(const std::string& key) const {
  const std::string v = get(key);
  try {
    size_t pos = 0;
    long out = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw UsageError("config key " + key + ": expected integer, got '" + v + "'");
  }
}

double RunConfig::get_double(const std::string& key) const {
  const std::string v = get(key);
  try {
    size_t pos = 0;
    double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw UsageError("config key " + key + ": expected number, got '" + v + "'");
  }
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string v = get(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw UsageError("config key " + key + ": expected true/false, got '" + v + "'");
}

std::array<double, 3> RunConfig::get_ratios(const std::string& key) const {
  const std::string v = get(key);
  std::array<double, 3> out{};
  std::istringstream ss(v);
  std::string part;
  int i = 0;
  while (std::getline(ss, part, ',')) {
    if (i >= 3) throw UsageError("config key " + key + ": expected three ratios");
    try {
      out[static_cast<size_t>(i++)] = std::stod(part);
    } catch (const std::exception&) {
      throw UsageError("config key " + key + ": bad ratio '" + part + "'");
    }
  }
  if (i != 3) throw UsageError("config key " + key + ": expected three ratios");
  return out;
}

std::string RunConfig::hash() const {
  uint64_t h = kFnvOffset;
  for (const auto& [key, value] : values_) {  // std::map: sorted
    h = fnv1a(key, h);
    h = fnv1a("=", h);
    h = fnv1a(value, h);
    h = fnv1a("\n", h);
  }
  return hex64(h);
}

TrainerConfig RunConfig::trainer_config() const {
  TrainerConfig tc;
  tc.seed = seed();
  tc.batch_size = static_cast<int>(get_int("batch_size"));
  tc.max_steps = get_int("trainer.max_steps");
  tc.disc_cycle = static_cast<int>(get_int("trainer.disc_cycle"));
  tc.lr = get_double("trainer.lr");
  tc.selector_lr = get_double("trainer.selector_lr");
  tc.disc_lr = get_double("trainer.disc_lr");
  tc.selector_weight_decay = get_double("trainer.selector_weight_decay");
  tc.window = static_cast<int>(get_int("trainer.window"));
  tc.target_fraction = get_double("selector.target_fraction");
  tc.lg_updates_generator = get_bool("trainer.lg_updates_generator");
  tc.weights.adv_quality = get_double("trainer.loss_weights.adv_quality");
  tc.weights.adv_repr = get_double("trainer.loss_weights.adv_repr");
  tc.weights.length_reg = get_double("trainer.loss_weights.length_reg");
  tc.weights.dpp = get_double("trainer.loss_weights.dpp");
  tc.weights.vae = get_double("trainer.loss_weights.vae");
  tc.weights.mle = get_double("trainer.loss_weights.mle");
  tc.encoder_hidden = static_cast<int>(get_int("encoder.hidden"));
  tc.embedding_dim = static_cast<int>(get_int("encoder.embedding"));
  tc.generator_hidden = static_cast<int>(get_int("generator.hidden"));
  tc.vae_hidden = static_cast<int>(get_int("vae.hidden"));
  tc.z_dim = static_cast<int>(get_int("vae.z_dim"));
  tc.min_decode = static_cast<int>(get_int("generator.min_steps"));
  tc.max_decode = static_cast<int>(get_int("generator.max_steps"));
  return tc;
}

}  // namespace sda
