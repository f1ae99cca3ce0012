#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "pc2dae/baselines.hpp"
#include "pc2dae/common.hpp"
#include "pc2dae/config.hpp"
#include "pc2dae/csv.hpp"
#include "pc2dae/metrics.hpp"
#include "pc2dae/pipeline.hpp"
#include "pc2dae/sim.hpp"
#include "pc2dae/trainer.hpp"

namespace {

using namespace pc2dae;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Timer {
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();

  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
  }
};

ConfigFile load_config(const std::string& path,
                       const std::vector<std::string>& overrides) {
  ConfigFile file =
      path.empty() ? ConfigFile() : ConfigFile::parse_file(path);
  for (const std::string& item : overrides) {
    const auto dot = item.find('.');
    const auto eq = item.find('=', dot == std::string::npos ? 0 : dot);
    if (dot == std::string::npos || eq == std::string::npos || dot > eq) {
      throw config_error("--set expects section.key=value, got '" + item +
                         "'");
    }
    file.set(item.substr(0, dot), item.substr(dot + 1, eq - dot - 1),
             item.substr(eq + 1));
  }
  return file;
}

nlohmann::json config_snapshot(const ConfigFile& file) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [section, kv] : file.sections()) {
    for (const auto& [key, value] : kv) j[section][key] = value;
  }
  return j;
}

void write_manifest(const std::string& path, const std::string& command,
                    const ConfigFile& file, const nlohmann::json& extra,
                    double wall_seconds) {
  nlohmann::json j;
  j["command"] = command;
  j["tool_version"] = kToolVersion;
  j["config"] = config_snapshot(file);
  j["wall_seconds"] = wall_seconds;
  for (const auto& [key, value] : extra.items()) j[key] = value;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw data_error("cannot write manifest '" + path + "'");
  os << j.dump(2) << '\n';
}

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw data_error("cannot create output directory '" + dir +
                     "': " + ec.message());
  }
}

SeriesFrame read_repaired(const std::string& path) {
  return repair_missing(read_csv(path));
}

struct SplitWindows {
  WindowBatch train;
  WindowBatch val;
  ScaleRecord scales;
};

// Chronological split, scales fitted on the training side only, oracle
// targets normalized with the same record.
SplitWindows prepare_training_windows(const SeriesFrame& noisy,
                                      const SeriesFrame* clean,
                                      const RunConfig& run) {
  auto [train_raw, val_raw] =
      chronological_split(noisy, run.trainer.split_fraction);
  auto [train_norm, scales] = normalize(train_raw);
  SeriesFrame val_norm = normalize_with(val_raw, scales);

  SplitWindows out;
  out.scales = scales;
  if (run.trainer.mode == TrainMode::Oracle) {
    if (clean == nullptr) {
      throw config_error("oracle training mode needs --clean ground truth");
    }
    auto [clean_train, clean_val] =
        chronological_split(*clean, run.trainer.split_fraction);
    SeriesFrame ct = normalize_with(clean_train, scales);
    SeriesFrame cv = normalize_with(clean_val, scales);
    out.train = make_windows(train_norm, kDefaultStride, &ct, true);
    out.val = make_windows(val_norm, kDefaultStride, &cv, true);
  } else {
    out.train = make_windows(train_norm, kDefaultStride, nullptr, true);
    out.val = make_windows(val_norm, kDefaultStride, nullptr, true);
  }
  return out;
}

void print_final_losses(const TrainResult& result) {
  if (result.log.empty()) {
    std::cout << "no epochs run\n";
    return;
  }
  const LossReport& val =
      result.log[static_cast<size_t>(result.best_epoch)].val;
  std::cout << "best epoch " << result.best_epoch << " validation losses:\n";
  for (int f = 0; f < kNumFamilies; ++f) {
    const auto fi = static_cast<size_t>(f);
    std::printf("  %-4s recon %.6f positivity %.6f smooth %.6f\n",
                family_name(static_cast<Family>(f)), val.recon[fi],
                val.positivity[fi], val.smooth[fi]);
  }
  std::printf("  total %.6f\n", val.total);
  std::printf("wall time %.1f s\n", result.wall_seconds);
}

int cmd_generate(const ConfigFile& file, const std::string& out_dir) {
  Timer timer;
  const RunConfig run = resolve_run_config(file);
  ensure_directory(out_dir);

  const PlumeScenario scenario =
      PlumeScenario::pinned(run.scenario_duration, run.scenario_seed);
  const SeriesFrame clean = generate_clean(scenario);
  const SeriesFrame noisy = corrupt(clean, run.corruption, run.corruption_seed);

  const std::string clean_path = out_dir + "/clean.csv";
  const std::string noisy_path = out_dir + "/noisy.csv";
  write_csv(clean, clean_path);
  write_csv(noisy, noisy_path);

  nlohmann::json extra;
  extra["outputs"] = {clean_path, noisy_path};
  extra["seeds"] = {{"scenario", run.scenario_seed},
                    {"corruption", run.corruption_seed}};
  extra["noise_sigma"] = run.corruption.noise_sigma;
  extra["duration_s"] = run.scenario_duration;
  write_manifest(out_dir + "/manifest.json", "generate", file, extra,
                 timer.seconds());
  std::cout << "wrote " << clean_path << " and " << noisy_path << " ("
            << run.scenario_duration << " samples)\n";
  return 0;
}

int cmd_train(const ConfigFile& file, const std::string& data_path,
              const std::string& clean_path, const std::string& out_dir) {
  Timer timer;
  const RunConfig run = resolve_run_config(file);
  ensure_directory(out_dir);

  const SeriesFrame noisy = read_repaired(data_path);
  SeriesFrame clean;
  const SeriesFrame* clean_ptr = nullptr;
  if (!clean_path.empty()) {
    clean = read_repaired(clean_path);
    if (clean.length() != noisy.length()) {
      throw data_error("clean and noisy frames differ in length");
    }
    clean_ptr = &clean;
  }

  SplitWindows windows = prepare_training_windows(noisy, clean_ptr, run);
  Pc2daeModel model(run.model, run.model_seed);
  TrainResult result =
      train(model, windows.train, windows.val, run.trainer, run.loss_weights);

  const std::string ckpt_path = out_dir + "/model.ckpt";
  model.save_checkpoint(ckpt_path);
  windows.scales.save(ckpt_path + ".scales");
  write_train_log(out_dir + "/train_log.jsonl", result.log);

  print_final_losses(result);

  nlohmann::json extra;
  extra["inputs"] = {data_path};
  if (!clean_path.empty()) extra["inputs"].push_back(clean_path);
  extra["outputs"] = {ckpt_path, ckpt_path + ".scales",
                      out_dir + "/train_log.jsonl"};
  extra["seeds"] = {{"model", run.model_seed}, {"train", run.trainer.seed}};
  extra["variant"] = variant_name(run.model.variant);
  extra["mode"] = train_mode_name(run.trainer.mode);
  extra["physics_weights"] = {run.loss_weights.lambda_positivity[0],
                              run.loss_weights.lambda_smooth[0]};
  extra["parameter_count"] = model.parameter_count();
  extra["epochs_run"] = result.log.size();
  extra["best_epoch"] = result.best_epoch;
  write_manifest(out_dir + "/manifest.json", "train", file, extra,
                 timer.seconds());
  return 0;
}

int cmd_denoise(const ConfigFile& file, const std::string& ckpt_path,
                const std::string& data_path, const std::string& out_path) {
  Timer timer;
  Pc2daeModel model = Pc2daeModel::load_checkpoint(ckpt_path);
  const ScaleRecord scales = ScaleRecord::load(ckpt_path + ".scales");
  const SeriesFrame frame = read_repaired(data_path);
  const SeriesFrame denoised = denoise_frame(model, frame, scales);
  write_csv(denoised, out_path);

  nlohmann::json extra;
  extra["inputs"] = {ckpt_path, data_path};
  extra["outputs"] = {out_path};
  extra["rows"] = denoised.length();
  write_manifest(out_path + ".manifest.json", "denoise", file, extra,
                 timer.seconds());
  std::cout << "wrote " << out_path << " (" << denoised.length()
            << " rows)\n";
  return 0;
}

int cmd_evaluate(const ConfigFile& file, const std::string& input_path,
                 const std::string& output_path, const std::string& clean_path,
                 const std::string& out_dir) {
  Timer timer;
  ensure_directory(out_dir);
  const SeriesFrame input = read_repaired(input_path);
  const SeriesFrame output = read_repaired(output_path);
  SeriesFrame clean;
  const SeriesFrame* clean_ptr = nullptr;
  if (!clean_path.empty()) {
    clean = read_repaired(clean_path);
    clean_ptr = &clean;
  }
  const EvalReport report = evaluate_frame(input, output, clean_ptr);

  const std::string json_path = out_dir + "/eval.json";
  const std::string text_path = out_dir + "/eval.txt";
  std::ofstream(json_path, std::ios::binary) << report.to_json();
  std::ofstream(text_path, std::ios::binary) << report.to_text();
  std::cout << report.to_text();

  nlohmann::json extra;
  extra["inputs"] = {input_path, output_path};
  if (!clean_path.empty()) extra["inputs"].push_back(clean_path);
  extra["outputs"] = {json_path, text_path};
  write_manifest(out_dir + "/manifest.json", "evaluate", file, extra,
                 timer.seconds());
  return 0;
}

int cmd_compare(const ConfigFile& file, const std::string& ckpt_path,
                const std::string& clean_path, const std::string& noisy_path,
                const std::string& out_dir) {
  Timer timer;
  const RunConfig run = resolve_run_config(file);
  ensure_directory(out_dir);

  Pc2daeModel model = Pc2daeModel::load_checkpoint(ckpt_path);
  const ScaleRecord scales = ScaleRecord::load(ckpt_path + ".scales");
  const SeriesFrame noisy = read_repaired(noisy_path);
  const SeriesFrame clean = read_repaired(clean_path);
  if (noisy.length() != clean.length()) {
    throw data_error("clean and noisy frames differ in length");
  }
  const SeriesFrame denoised = denoise_frame(model, noisy, scales);
  const ComparisonTable table =
      run_comparison(noisy, clean, denoised, run.baselines);

  const std::string json_path = out_dir + "/comparison.json";
  const std::string text_path = out_dir + "/comparison.txt";
  std::ofstream(json_path, std::ios::binary) << table.to_json();
  std::ofstream(text_path, std::ios::binary) << table.to_text();
  std::cout << table.to_text();

  nlohmann::json extra;
  extra["inputs"] = {ckpt_path, clean_path, noisy_path};
  extra["outputs"] = {json_path, text_path};
  write_manifest(out_dir + "/manifest.json", "compare", file, extra,
                 timer.seconds());

  const MethodRow* model_row = table.find("pc2dae");
  if (model_row != nullptr && metric_defined(model_row->overall.violations) &&
      model_row->overall.violations > 0.0) {
    throw numeric_error("model output contains negative values (" +
                        std::to_string(model_row->overall.violations) +
                        "% violation rate)");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"physics-constrained denoising pipeline for multi-channel "
               "1 Hz sensor series"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "structured text config file")
      ->expected(1);
  app.add_option("--set", overrides,
                 "override a config key as section.key=value (repeatable)");

  auto* gen = app.add_subcommand("generate",
                                 "write a clean/noisy synthetic CSV pair");
  std::string gen_out;
  double gen_sigma = -1.0;
  std::int64_t gen_duration = -1;
  std::int64_t gen_seed = -1;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--seed", gen_seed, "scenario seed");
  gen->add_option("--duration", gen_duration, "series length in seconds");
  gen->add_option("--noise-sigma", gen_sigma, "relative noise level");

  auto* train_cmd =
      app.add_subcommand("train", "train a model on a noisy CSV");
  std::string train_data, train_clean, train_out, train_variant, train_mode;
  std::int64_t train_seed = -1;
  std::int64_t train_epochs = -1;
  train_cmd->add_option("--data", train_data, "noisy input CSV")->required();
  train_cmd->add_option("--clean", train_clean,
                        "clean target CSV (oracle mode)");
  train_cmd->add_option("--out", train_out, "output directory")->required();
  train_cmd->add_option("--variant", train_variant, "lean, wide or ablation");
  train_cmd->add_option("--mode", train_mode, "field or oracle");
  train_cmd->add_option("--seed", train_seed, "training seed");
  train_cmd->add_option("--max-epochs", train_epochs, "epoch budget");

  auto* den = app.add_subcommand("denoise", "run a checkpoint over a CSV");
  std::string den_ckpt, den_data, den_out;
  den->add_option("--ckpt", den_ckpt, "checkpoint file")->required();
  den->add_option("--data", den_data, "input CSV")->required();
  den->add_option("--out", den_out, "output CSV path")->required();

  auto* eva = app.add_subcommand("evaluate", "metrics of output vs input");
  std::string eva_in, eva_out_csv, eva_clean, eva_dir;
  eva->add_option("--input", eva_in, "input (noisy) CSV")->required();
  eva->add_option("--output", eva_out_csv, "denoised CSV")->required();
  eva->add_option("--clean", eva_clean, "clean ground-truth CSV");
  eva->add_option("--out", eva_dir, "report directory")->required();

  auto* cmp = app.add_subcommand(
      "compare", "model vs classical filters on a clean/noisy pair");
  std::string cmp_ckpt, cmp_clean, cmp_noisy, cmp_dir;
  cmp->add_option("--ckpt", cmp_ckpt, "checkpoint file")->required();
  cmp->add_option("--clean", cmp_clean, "clean CSV")->required();
  cmp->add_option("--noisy", cmp_noisy, "noisy CSV")->required();
  cmp->add_option("--out", cmp_dir, "report directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    ConfigFile file = load_config(config_path, overrides);
    if (gen->parsed()) {
      if (gen_seed >= 0) {
        file.set("scenario", "seed", std::to_string(gen_seed));
      }
      if (gen_duration >= 0) {
        file.set("scenario", "duration_s", std::to_string(gen_duration));
      }
      if (gen_sigma >= 0.0) {
        file.set("corruption", "noise_sigma", format_double(gen_sigma));
      }
      return cmd_generate(file, gen_out);
    }
    if (train_cmd->parsed()) {
      if (!train_variant.empty()) file.set("model", "variant", train_variant);
      if (!train_mode.empty()) file.set("train", "mode", train_mode);
      if (train_seed >= 0) {
        file.set("train", "seed", std::to_string(train_seed));
      }
      if (train_epochs >= 0) {
        file.set("train", "max_epochs", std::to_string(train_epochs));
      }
      return cmd_train(file, train_data, train_clean, train_out);
    }
    if (den->parsed()) return cmd_denoise(file, den_ckpt, den_data, den_out);
    if (eva->parsed()) {
      return cmd_evaluate(file, eva_in, eva_out_csv, eva_clean, eva_dir);
    }
    if (cmp->parsed()) {
      return cmd_compare(file, cmp_ckpt, cmp_clean, cmp_noisy, cmp_dir);
    }
    throw config_error("no command given");
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const data_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const shape_error& e) {
    std::cerr << "shape error: " << e.what() << '\n';
    return 2;
  } catch (const checkpoint_error& e) {
    std::cerr << "checkpoint error: " << e.what() << '\n';
    return 2;
  } catch (const numeric_error& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
