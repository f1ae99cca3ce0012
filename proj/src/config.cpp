#include "pc2dae/config.hpp"

#include <array>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace pc2dae {

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"scenario", {"duration_s", "seed"}},
      {"corruption",
       {"preset", "noise_sigma", "drift_per_hour", "missing_rate", "seed"}},
      {"model",
       {"variant", "seed", "dropout", "softplus_beta", "smoothing_kernel"}},
      {"train",
       {"learning_rate", "beta1", "beta2", "eps", "batch_size", "max_epochs",
        "patience", "grad_clip_norm", "seed", "split_fraction", "mode"}},
      {"baselines",
       {"movavg_short", "movavg_long", "savgol_window", "savgol_order",
        "kalman_q", "kalman_r", "wavelet_levels"}},
  };
  return keys;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  const auto b = s.find_last_not_of(" \t\r");
  return (a == std::string::npos) ? std::string() : s.substr(a, b - a + 1);
}

void check_known(const std::string& section, const std::string& key) {
  const auto& keys = known_keys();
  const auto sec = keys.find(section);
  if (sec == keys.end()) {
    throw config_error("unknown config section [" + section + "]");
  }
  if (!key.empty() && sec->second.count(key) == 0) {
    throw config_error("unknown key '" + key + "' in section [" + section +
                       "]");
  }
}

}  // namespace

ConfigFile ConfigFile::parse_text(const std::string& text) {
  ConfigFile cfg;
  std::istringstream is(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(is, line)) {
    line_no += 1;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line.resize(comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw config_error("config line " + std::to_string(line_no) +
                           ": unterminated section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      check_known(section, "");
      cfg.sections_[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw config_error("config line " + std::to_string(line_no) +
                         ": expected 'key = value'");
    }
    if (section.empty()) {
      throw config_error("config line " + std::to_string(line_no) +
                         ": key outside any [section]");
    }
    cfg.set(section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

ConfigFile ConfigFile::parse_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw config_error("cannot open config file '" + path + "'");
  std::ostringstream buffer;
  buffer << is.rdbuf();
  return parse_text(buffer.str());
}

void ConfigFile::set(const std::string& section, const std::string& key,
                     const std::string& value) {
  check_known(section, key);
  if (key.empty()) throw config_error("empty config key in [" + section + "]");
  sections_[section][key] = value;
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
  const auto sec = sections_.find(section);
  return sec != sections_.end() && sec->second.count(key) > 0;
}

std::string ConfigFile::get_string(const std::string& section,
                                   const std::string& key,
                                   const std::string& fallback) const {
  const auto sec = sections_.find(section);
  if (sec == sections_.end()) return fallback;
  const auto it = sec->second.find(key);
  return it == sec->second.end() ? fallback : it->second;
}

namespace {

double parse_double(const std::string& section, const std::string& key,
                    const std::string& text) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0') {
    throw config_error("[" + section + "] " + key + " = '" + text +
                       "' is not a number");
  }
  return v;
}

}  // namespace

double ConfigFile::get_double(const std::string& section,
                              const std::string& key, double fallback) const {
  if (!has(section, key)) return fallback;
  return parse_double(section, key, get_string(section, key, ""));
}

ad::Index ConfigFile::get_index(const std::string& section,
                                const std::string& key,
                                ad::Index fallback) const {
  if (!has(section, key)) return fallback;
  const double v = parse_double(section, key, get_string(section, key, ""));
  const auto i = static_cast<ad::Index>(v);
  if (double(i) != v) {
    throw config_error("[" + section + "] " + key + " must be an integer");
  }
  return i;
}

std::uint64_t ConfigFile::get_u64(const std::string& section,
                                  const std::string& key,
                                  std::uint64_t fallback) const {
  if (!has(section, key)) return fallback;
  const std::string text = get_string(section, key, "");
  try {
    size_t used = 0;
    const std::uint64_t v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw config_error("[" + section + "] " + key + " = '" + text +
                       "' is not an unsigned integer");
  }
}

bool ConfigFile::get_bool(const std::string& section, const std::string& key,
                          bool fallback) const {
  if (!has(section, key)) return fallback;
  const std::string text = get_string(section, key, "");
  if (text == "1" || text == "true" || text == "yes") return true;
  if (text == "0" || text == "false" || text == "no") return false;
  throw config_error("[" + section + "] " + key + " = '" + text +
                     "' is not a boolean");
}

RunConfig resolve_run_config(const ConfigFile& file) {
  RunConfig run;

  run.scenario_duration =
      file.get_index("scenario", "duration_s", run.scenario_duration);
  run.scenario_seed = file.get_u64("scenario", "seed", run.scenario_seed);
  if (run.scenario_duration < kWindowLen) {
    throw config_error("[scenario] duration_s must be at least " +
                       std::to_string(kWindowLen));
  }

  const std::string preset =
      file.get_string("corruption", "preset", "defaults");
  if (preset == "defaults") {
    run.corruption = CorruptionConfig::defaults();
  } else if (preset == "identity") {
    run.corruption = CorruptionConfig::identity();
  } else {
    throw config_error("[corruption] preset must be defaults or identity");
  }
  run.corruption.noise_sigma =
      file.get_double("corruption", "noise_sigma", run.corruption.noise_sigma);
  run.corruption.drift_per_hour = file.get_double(
      "corruption", "drift_per_hour", run.corruption.drift_per_hour);
  run.corruption.missing_rate = file.get_double(
      "corruption", "missing_rate", run.corruption.missing_rate);
  run.corruption_seed = file.get_u64("corruption", "seed", run.corruption_seed);
  run.corruption.validate();

  const std::string variant_text =
      file.get_string("model", "variant", "lean");
  const Variant variant = variant_from_name(variant_text);
  switch (variant) {
    case Variant::Lean:
      run.model = ModelConfig::lean();
      break;
    case Variant::Wide:
      run.model = ModelConfig::wide();
      break;
    case Variant::UnconstrainedAblation:
      run.model = ModelConfig::ablation();
      break;
  }
  run.model.dropout = file.get_double("model", "dropout", run.model.dropout);
  run.model.softplus_beta =
      file.get_double("model", "softplus_beta", run.model.softplus_beta);
  run.model.smoothing_kernel = file.get_index("model", "smoothing_kernel",
                                              run.model.smoothing_kernel);
  run.model.validate();
  run.model_seed = file.get_u64("model", "seed", run.model_seed);
  run.loss_weights = LossWeights::for_variant(variant);

  TrainConfig& t = run.trainer;
  t.learning_rate = file.get_double("train", "learning_rate", t.learning_rate);
  t.beta1 = file.get_double("train", "beta1", t.beta1);
  t.beta2 = file.get_double("train", "beta2", t.beta2);
  t.eps = file.get_double("train", "eps", t.eps);
  t.batch_size = file.get_index("train", "batch_size", t.batch_size);
  t.max_epochs = file.get_index("train", "max_epochs", t.max_epochs);
  t.early_stop_patience =
      file.get_index("train", "patience", t.early_stop_patience);
  t.grad_clip_norm =
      file.get_double("train", "grad_clip_norm", t.grad_clip_norm);
  t.seed = file.get_u64("train", "seed", t.seed);
  t.split_fraction =
      file.get_double("train", "split_fraction", t.split_fraction);
  t.mode = train_mode_from_name(
      file.get_string("train", "mode", train_mode_name(t.mode)));
  t.validate();

  BaselineConfig& b = run.baselines;
  b.movavg_short = file.get_index("baselines", "movavg_short", b.movavg_short);
  b.movavg_long = file.get_index("baselines", "movavg_long", b.movavg_long);
  b.savgol_window =
      file.get_index("baselines", "savgol_window", b.savgol_window);
  b.savgol_order = file.get_index("baselines", "savgol_order", b.savgol_order);
  b.kalman_q = file.get_double("baselines", "kalman_q", b.kalman_q);
  b.kalman_r = file.get_double("baselines", "kalman_r", b.kalman_r);
  b.wavelet_levels =
      file.get_index("baselines", "wavelet_levels", b.wavelet_levels);
  b.validate();

  return run;
}

}  // namespace pc2dae
