#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "pc2dae/baselines.hpp"
#include "pc2dae/model.hpp"
#include "pc2dae/sim.hpp"
#include "pc2dae/trainer.hpp"

namespace pc2dae {

// "[section]" headers with "key = value" lines; '#' and ';' start comments.
// Unknown sections or keys are config errors so typos cannot silently fall
// back to defaults.
class ConfigFile {
 public:
  ConfigFile() = default;

  static ConfigFile parse_file(const std::string& path);
  static ConfigFile parse_text(const std::string& text);

  // CLI override entry point; same validation as parsed lines.
  void set(const std::string& section, const std::string& key,
           const std::string& value);

  bool has(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key,
                    double fallback) const;
  ad::Index get_index(const std::string& section, const std::string& key,
                      ad::Index fallback) const;
  std::uint64_t get_u64(const std::string& section, const std::string& key,
                        std::uint64_t fallback) const;
  bool get_bool(const std::string& section, const std::string& key,
                bool fallback) const;

  const std::map<std::string, std::map<std::string, std::string>>& sections()
      const {
    return sections_;
  }

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

// Everything one run needs, resolved from a ConfigFile plus defaults.
struct RunConfig {
  ad::Index scenario_duration = 7894;
  std::uint64_t scenario_seed = 1;

  CorruptionConfig corruption = CorruptionConfig::defaults();
  std::uint64_t corruption_seed = 2;

  ModelConfig model = ModelConfig::lean();
  std::uint64_t model_seed = 3;

  TrainConfig trainer;
  LossWeights loss_weights = LossWeights::for_variant(Variant::Lean);

  BaselineConfig baselines;
};

RunConfig resolve_run_config(const ConfigFile& file);

}  // namespace pc2dae
