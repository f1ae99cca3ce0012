#include "doctest.h"

#include <string>

#include "pc2dae/config.hpp"

using namespace pc2dae;

TEST_SUITE("config") {

TEST_CASE("ini text parses into sections, keys and comments") {
  const std::string text =
      "# leading comment\n"
      "[scenario]\n"
      "duration_s = 4000   ; trailing comment\n"
      "seed=77\n"
      "\n"
      "[train]\n"
      "  learning_rate =  2e-3  \n"
      "mode = oracle\n";
  ConfigFile cfg = ConfigFile::parse_text(text);

  CHECK(cfg.has("scenario", "duration_s"));
  CHECK(cfg.has("scenario", "seed"));
  CHECK(cfg.has("train", "learning_rate"));
  CHECK_FALSE(cfg.has("scenario", "missing"));
  CHECK_FALSE(cfg.has("model", "dropout"));

  CHECK(cfg.get_index("scenario", "duration_s", 0) == 4000);
  CHECK(cfg.get_u64("scenario", "seed", 0) == 77);
  CHECK(cfg.get_double("train", "learning_rate", 0.0) == 2e-3);
  CHECK(cfg.get_string("train", "mode", "") == "oracle");

  // Absent entries fall back without complaint.
  CHECK(cfg.get_double("model", "dropout", 0.25) == 0.25);
  CHECK(cfg.get_string("model", "variant", "lean") == "lean");
}

TEST_CASE("typos are rejected instead of silently ignored") {
  CHECK_THROWS_WITH_AS(ConfigFile::parse_text("[scneario]\nduration_s = 1\n"),
                       doctest::Contains("unknown config section"),
                       config_error);
  CHECK_THROWS_WITH_AS(ConfigFile::parse_text("[scenario]\nduration = 1\n"),
                       doctest::Contains("unknown key"), config_error);
  CHECK_THROWS_AS(ConfigFile::parse_text("[scenario\nduration_s = 1\n"),
                  config_error);
  CHECK_THROWS_AS(ConfigFile::parse_text("[scenario]\nno equals sign\n"),
                  config_error);
  CHECK_THROWS_AS(ConfigFile::parse_text("duration_s = 1\n"), config_error);
}

TEST_CASE("typed getters validate their conversions") {
  ConfigFile cfg = ConfigFile::parse_text(
      "[model]\n"
      "dropout = oops\n"
      "smoothing_kernel = 2.5\n"
      "seed = banana\n");
  CHECK_THROWS_WITH_AS(cfg.get_double("model", "dropout", 0.0),
                       doctest::Contains("not a number"), config_error);
  CHECK_THROWS_WITH_AS(cfg.get_index("model", "smoothing_kernel", 0),
                       doctest::Contains("must be an integer"), config_error);
  CHECK_THROWS_WITH_AS(cfg.get_u64("model", "seed", 0),
                       doctest::Contains("not an unsigned integer"),
                       config_error);

  ConfigFile flags = ConfigFile::parse_text(
      "[model]\n"
      "variant = maybe\n");
  CHECK_THROWS_AS(flags.get_bool("model", "variant", false), config_error);

  ConfigFile good = ConfigFile::parse_text(
      "[corruption]\n"
      "preset = yes\n"
      "noise_sigma = 0\n");
  CHECK(good.get_bool("corruption", "preset", false) == true);
  CHECK(good.get_bool("corruption", "noise_sigma", true) == false);
  CHECK(good.get_bool("train", "mode", true) == true);
}

TEST_CASE("set applies cli-style overrides with the same checking") {
  ConfigFile cfg;
  cfg.set("model", "dropout", "0.2");
  CHECK(cfg.get_double("model", "dropout", 0.0) == 0.2);
  cfg.set("model", "dropout", "0.3");
  CHECK(cfg.get_double("model", "dropout", 0.0) == 0.3);

  CHECK_THROWS_AS(cfg.set("model", "droput", "0.2"), config_error);
  CHECK_THROWS_AS(cfg.set("models", "dropout", "0.2"), config_error);
}

TEST_CASE("an empty config resolves to the documented defaults") {
  const RunConfig run = resolve_run_config(ConfigFile());
  CHECK(run.scenario_duration == 7894);
  CHECK(run.scenario_seed == 1);
  CHECK(run.corruption_seed == 2);
  CHECK(run.model_seed == 3);
  CHECK(run.model.variant == Variant::Lean);
  CHECK(run.loss_weights.lambda_positivity[0] == 0.1);
  CHECK(run.loss_weights.lambda_smooth[0] == 0.01);
  CHECK(run.trainer.learning_rate == 1e-3);
  CHECK(run.trainer.mode == TrainMode::Oracle);
  CHECK(run.baselines.movavg_short == 5);
  CHECK(run.baselines.movavg_long == 11);
  CHECK(run.corruption.noise_sigma ==
        CorruptionConfig::defaults().noise_sigma);
}

TEST_CASE("resolve honours file values and keeps validation active") {
  ConfigFile cfg = ConfigFile::parse_text(
      "[scenario]\n"
      "duration_s = 2000\n"
      "seed = 11\n"
      "[corruption]\n"
      "noise_sigma = 0.10\n"
      "seed = 12\n"
      "[model]\n"
      "variant = wide\n"
      "dropout = 0.15\n"
      "seed = 13\n"
      "[train]\n"
      "learning_rate = 5e-4\n"
      "max_epochs = 3\n"
      "mode = oracle\n"
      "[baselines]\n"
      "movavg_short = 7\n");
  const RunConfig run = resolve_run_config(cfg);
  CHECK(run.scenario_duration == 2000);
  CHECK(run.scenario_seed == 11);
  CHECK(run.corruption.noise_sigma == 0.10);
  CHECK(run.corruption_seed == 12);
  CHECK(run.model.variant == Variant::Wide);
  CHECK(run.model.dropout == 0.15);
  CHECK(run.model_seed == 13);
  CHECK(run.loss_weights.lambda_positivity[0] == 0.01);
  CHECK(run.loss_weights.lambda_smooth[0] == 0.005);
  CHECK(run.trainer.learning_rate == 5e-4);
  CHECK(run.trainer.max_epochs == 3);
  CHECK(run.trainer.mode == TrainMode::Oracle);
  CHECK(run.baselines.movavg_short == 7);

  // The ablation preset drops the physics weights entirely.
  ConfigFile abl = ConfigFile::parse_text("[model]\nvariant = ablation\n");
  const RunConfig ab = resolve_run_config(abl);
  CHECK(ab.model.variant == Variant::UnconstrainedAblation);
  CHECK(ab.loss_weights.lambda_positivity[0] == 0.0);
  CHECK(ab.loss_weights.lambda_smooth[0] == 0.0);
}

TEST_CASE("resolve rejects out-of-range settings") {
  CHECK_THROWS_AS(
      resolve_run_config(
          ConfigFile::parse_text("[scenario]\nduration_s = 100\n")),
      config_error);
  CHECK_THROWS_AS(
      resolve_run_config(
          ConfigFile::parse_text("[corruption]\npreset = funky\n")),
      config_error);
  CHECK_THROWS_AS(
      resolve_run_config(
          ConfigFile::parse_text("[corruption]\nmissing_rate = 1.0\n")),
      config_error);
  CHECK_THROWS_AS(
      resolve_run_config(ConfigFile::parse_text("[model]\nvariant = huge\n")),
      config_error);
  CHECK_THROWS_AS(
      resolve_run_config(ConfigFile::parse_text("[model]\ndropout = 1.0\n")),
      config_error);
  CHECK_THROWS_AS(
      resolve_run_config(
          ConfigFile::parse_text("[train]\nlearning_rate = 0\n")),
      config_error);
  CHECK_THROWS_AS(
      resolve_run_config(ConfigFile::parse_text("[train]\nmode = batch\n")),
      config_error);
  CHECK_THROWS_AS(
      resolve_run_config(
          ConfigFile::parse_text("[baselines]\nmovavg_short = 4\n")),
      config_error);

  // The identity preset passes validation untouched.
  const RunConfig ident = resolve_run_config(
      ConfigFile::parse_text("[corruption]\npreset = identity\n"));
  CHECK(ident.corruption.noise_sigma == 0.0);
}

TEST_CASE("parse_file reads from disk and reports missing paths") {
  CHECK_THROWS_WITH_AS(ConfigFile::parse_file("/nonexistent/path.ini"),
                       doctest::Contains("cannot open config file"),
                       config_error);
}

}  // TEST_SUITE("config")
