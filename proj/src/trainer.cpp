#include "pc2dae/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>

#include "json.hpp"

namespace pc2dae {

using ad::Array;
using ad::Index;
using ad::Tensor;

const char* train_mode_name(TrainMode m) {
  return m == TrainMode::Field ? "field" : "oracle";
}

TrainMode train_mode_from_name(const std::string& name) {
  if (name == "field") return TrainMode::Field;
  if (name == "oracle") return TrainMode::Oracle;
  throw config_error("unknown training mode '" + name +
                     "' (expected field or oracle)");
}

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) throw config_error("learning_rate must be > 0");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw config_error("optimizer betas must be in [0,1)");
  }
  if (eps <= 0.0) throw config_error("optimizer eps must be > 0");
  if (batch_size < 1) throw config_error("batch_size must be >= 1");
  if (max_epochs < 0) throw config_error("max_epochs must be >= 0");
  if (early_stop_patience < 1) {
    throw config_error("early_stop_patience must be >= 1");
  }
  if (grad_clip_norm <= 0.0) throw config_error("grad_clip_norm must be > 0");
  if (split_fraction <= 0.0 || split_fraction >= 1.0) {
    throw config_error("split_fraction must be strictly between 0 and 1");
  }
}

std::pair<SeriesFrame, SeriesFrame> chronological_split(
    const SeriesFrame& frame, double fraction) {
  if (fraction <= 0.0 || fraction >= 1.0) {
    throw config_error("split fraction must be strictly between 0 and 1");
  }
  const Index n = frame.length();
  const Index cut = static_cast<Index>(std::floor(double(n) * fraction));
  if (cut < kWindowLen || n - cut < kWindowLen) {
    throw data_error("split at row " + std::to_string(cut) + " of " +
                     std::to_string(n) + " leaves a side shorter than one " +
                     std::to_string(kWindowLen) + "-sample window");
  }
  auto slice = [&](Index begin, Index len) {
    SeriesFrame out;
    out.t.assign(frame.t.begin() + begin, frame.t.begin() + begin + len);
    out.targets = frame.targets.middleRows(begin, len);
    out.env = frame.env.middleRows(begin, len);
    out.stale_mask = frame.stale_mask.middleRows(begin, len);
    out.missing_mask = frame.missing_mask.middleRows(begin, len);
    return out;
  };
  return {slice(0, cut), slice(cut, n - cut)};
}

namespace {

struct Batch {
  Tensor inputs;   // [B,15,128]
  Tensor env;      // [B,3,128]
  std::array<Tensor, kNumFamilies> targets;
  std::array<Tensor, kNumFamilies> weights;
  Index size = 0;
};

Batch assemble_batch(const WindowBatch& windows,
                     const std::vector<Index>& order, Index begin,
                     Index count) {
  Batch b;
  b.size = count;
  const Index T = kWindowLen;
  Array in(count * kNumChannels * T);
  Array env(count * kNumEnv * T);
  Array tg(count * kNumChannels * T);
  Array wt(count * kNumChannels * T);
  for (Index i = 0; i < count; ++i) {
    const auto w = static_cast<size_t>(order[static_cast<size_t>(begin + i)]);
    in.segment(i * kNumChannels * T, kNumChannels * T) = windows.inputs[w];
    env.segment(i * kNumEnv * T, kNumEnv * T) = windows.env[w];
    tg.segment(i * kNumChannels * T, kNumChannels * T) = windows.targets[w];
    wt.segment(i * kNumChannels * T, kNumChannels * T) = windows.weights[w];
  }
  b.inputs = Tensor::from_array({count, kNumChannels, T}, std::move(in));
  b.env = Tensor::from_array({count, kNumEnv, T}, std::move(env));
  b.targets =
      split_families(Tensor::from_array({count, kNumChannels, T}, std::move(tg)));
  b.weights =
      split_families(Tensor::from_array({count, kNumChannels, T}, std::move(wt)));
  return b;
}

std::vector<Index> identity_order(Index n) {
  std::vector<Index> order(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  return order;
}

void shuffle_in_place(std::vector<Index>& order, RngStream& rng) {
  for (Index i = static_cast<Index>(order.size()) - 1; i > 0; --i) {
    const auto j = static_cast<Index>(rng.uniform_int(std::uint64_t(i) + 1));
    std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
  }
}

// Accumulates per-window-weighted means of batch reports for the epoch log.
struct ReportAccum {
  LossReport sum;
  double weight = 0.0;

  void add(const LossReport& r, double w) {
    for (int f = 0; f < kNumFamilies; ++f) {
      const auto fi = static_cast<size_t>(f);
      sum.recon[fi] += w * r.recon[fi];
      sum.positivity[fi] += w * r.positivity[fi];
      sum.smooth[fi] += w * r.smooth[fi];
      sum.empty_family[fi] = sum.empty_family[fi] || r.empty_family[fi];
    }
    sum.total += w * r.total;
    weight += w;
  }

  LossReport mean() const {
    LossReport r = sum;
    const double d = weight > 0.0 ? weight : 1.0;
    for (int f = 0; f < kNumFamilies; ++f) {
      const auto fi = static_cast<size_t>(f);
      r.recon[fi] /= d;
      r.positivity[fi] /= d;
      r.smooth[fi] /= d;
    }
    r.total /= d;
    return r;
  }
};

void abort_on_non_finite(const Pc2daeModel& model, double loss_value) {
  for (const auto& [name, t] : model.parameters()) {
    if (t.node()->has_grad() && !t.grad().allFinite()) {
      throw numeric_error("non-finite gradient in parameter '" + name +
                          "' (batch loss = " + std::to_string(loss_value) +
                          ")");
    }
  }
  if (!std::isfinite(loss_value)) {
    throw numeric_error("non-finite training loss " +
                        std::to_string(loss_value) +
                        " with finite parameter gradients");
  }
}

struct AdamState {
  std::vector<Array> m;
  std::vector<Array> v;
  Index step = 0;
};

void adam_step(Pc2daeModel& model, AdamState& state, const TrainConfig& cfg) {
  auto& params = model.parameters();
  if (state.m.empty()) {
    for (const auto& [name, t] : params) {
      state.m.push_back(Array::Zero(t.size()));
      state.v.push_back(Array::Zero(t.size()));
    }
  }

  double sq_norm = 0.0;
  for (const auto& [name, t] : params) {
    if (t.node()->has_grad()) sq_norm += t.grad().square().sum();
  }
  const double norm = std::sqrt(sq_norm);
  const double clip =
      norm > cfg.grad_clip_norm ? cfg.grad_clip_norm / norm : 1.0;

  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, double(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& t = params[i].second;
    if (!t.node()->has_grad()) continue;
    const Array g = t.grad() * clip;
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g.square();
    t.mutable_values() -= cfg.learning_rate * (state.m[i] / bc1) /
                          ((state.v[i] / bc2).sqrt() + cfg.eps);
  }
}

LossReport evaluate_loss(Pc2daeModel& model, const WindowBatch& windows,
                         const LossWeights& lw) {
  ad::NoGradGuard no_grad;
  const auto order = identity_order(windows.count());
  Batch b = assemble_batch(windows, order, 0, windows.count());
  auto preds = model.forward_families(b.inputs, b.env, false, nullptr);
  return total_loss(preds, b.targets, b.weights, lw).report;
}

std::vector<Array> snapshot_params(const Pc2daeModel& model) {
  std::vector<Array> out;
  for (const auto& [name, t] : model.parameters()) out.push_back(t.values());
  return out;
}

void restore_params(Pc2daeModel& model, const std::vector<Array>& snap) {
  auto& params = model.parameters();
  for (size_t i = 0; i < params.size(); ++i) {
    params[i].second.mutable_values() = snap[i];
  }
}

}  // namespace

TrainResult train(Pc2daeModel& model, const WindowBatch& train_windows,
                  const WindowBatch& val_windows, const TrainConfig& cfg,
                  const LossWeights& lw) {
  cfg.validate();
  if (train_windows.count() < 1 || val_windows.count() < 1) {
    throw data_error("training needs at least one window on each split side");
  }

  TrainResult result;
  if (cfg.max_epochs == 0) return result;

  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
  };

  RngStream root(cfg.seed);
  RngStream shuffle_rng = root.fork("shuffle");
  RngStream dropout_rng = root.fork("dropout");

  AdamState adam;
  auto order = identity_order(train_windows.count());
  std::vector<Array> best;
  double best_val = std::numeric_limits<double>::infinity();
  Index since_best = 0;

  for (Index epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    shuffle_in_place(order, shuffle_rng);
    ReportAccum train_accum;
    for (Index begin = 0; begin < train_windows.count();
         begin += cfg.batch_size) {
      const Index count =
          std::min(cfg.batch_size, train_windows.count() - begin);
      Batch b = assemble_batch(train_windows, order, begin, count);
      model.zero_grad();
      auto preds = model.forward_families(b.inputs, b.env, true, &dropout_rng);
      TotalLoss loss = total_loss(preds, b.targets, b.weights, lw);
      ad::backward(loss.value);
      abort_on_non_finite(model, loss.report.total);
      adam_step(model, adam, cfg);
      train_accum.add(loss.report, double(count));
    }

    TrainLogRecord rec;
    rec.epoch = epoch;
    rec.train = train_accum.mean();
    rec.val = evaluate_loss(model, val_windows, lw);
    rec.learning_rate = cfg.learning_rate;
    rec.wall_seconds = elapsed();
    result.log.push_back(rec);

    if (rec.val.total < best_val) {
      best_val = rec.val.total;
      best = snapshot_params(model);
      result.best_epoch = epoch;
      since_best = 0;
    } else {
      since_best += 1;
      if (since_best >= cfg.early_stop_patience) {
        result.early_stopped = true;
        break;
      }
    }
  }

  if (!best.empty()) restore_params(model, best);
  result.best_val_total = best_val;
  result.wall_seconds = elapsed();
  return result;
}

namespace {

nlohmann::json report_json(const LossReport& r) {
  nlohmann::json j;
  for (int f = 0; f < kNumFamilies; ++f) {
    const auto fi = static_cast<size_t>(f);
    const char* fam = family_name(static_cast<Family>(f));
    j["recon"][fam] = r.recon[fi];
    j["positivity"][fam] = r.positivity[fi];
    j["smooth"][fam] = r.smooth[fi];
  }
  j["total"] = r.total;
  return j;
}

}  // namespace

void write_train_log(const std::string& path,
                     const std::vector<TrainLogRecord>& log) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw data_error("cannot open training log '" + path + "'");
  for (const auto& rec : log) {
    nlohmann::json j;
    j["epoch"] = rec.epoch;
    j["train"] = report_json(rec.train);
    j["val"] = report_json(rec.val);
    j["wall_seconds"] = rec.wall_seconds;
    j["learning_rate"] = rec.learning_rate;
    os << j.dump() << '\n';
  }
  if (!os) throw data_error("write to training log '" + path + "' failed");
}

}  // namespace pc2dae
