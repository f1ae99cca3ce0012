#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pc2dae/losses.hpp"
#include "pc2dae/model.hpp"
#include "pc2dae/series.hpp"
#include "pc2dae/windows.hpp"

namespace pc2dae {

enum class TrainMode { Field, Oracle };

const char* train_mode_name(TrainMode m);
TrainMode train_mode_from_name(const std::string& name);  // config_error

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  ad::Index batch_size = 16;
  ad::Index max_epochs = 200;
  ad::Index early_stop_patience = 20;
  double grad_clip_norm = 1.0;
  std::uint64_t seed = 1;
  double split_fraction = 0.8;
  TrainMode mode = TrainMode::Oracle;

  void validate() const;  // throws config_error
};

struct TrainLogRecord {
  ad::Index epoch = 0;
  LossReport train;
  LossReport val;
  double wall_seconds = 0.0;
  double learning_rate = 0.0;
};

struct TrainResult {
  std::vector<TrainLogRecord> log;
  ad::Index best_epoch = -1;
  double best_val_total = 0.0;
  bool early_stopped = false;
  double wall_seconds = 0.0;
};

// Chronological cut at floor(length * fraction); windows made separately per
// side can never straddle the boundary.
std::pair<SeriesFrame, SeriesFrame> chronological_split(
    const SeriesFrame& frame, double fraction);

// Mini-batch training with the adaptive-moment optimizer, global gradient
// norm clipping and early stopping on validation total loss. The model is
// left holding the best-validation parameters. Deterministic given cfg.seed.
TrainResult train(Pc2daeModel& model, const WindowBatch& train_windows,
                  const WindowBatch& val_windows, const TrainConfig& cfg,
                  const LossWeights& lw);

// One JSON object per record, newline separated.
void write_train_log(const std::string& path,
                     const std::vector<TrainLogRecord>& log);

}  // namespace pc2dae
