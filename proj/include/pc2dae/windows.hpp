#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pc2dae/series.hpp"
#include "pc2dae/tensor.hpp"

namespace pc2dae {

inline constexpr Index kWindowLen = 128;
inline constexpr Index kDefaultStride = 64;

// Normalization factors: targets are divided by a strictly positive scale
// (99th percentile of |value| over non-missing samples) so nonnegativity
// survives; env channels are standardized.
struct ScaleRecord {
  std::array<double, kNumChannels> target_scale{};
  std::array<double, kNumEnv> env_mean{};
  std::array<double, kNumEnv> env_std{};

  void save(const std::string& path) const;  // flat key = value lines
  static ScaleRecord load(const std::string& path);
};

// p-th percentile (0..100) of |values|, linear interpolation between order
// statistics. Exposed for direct testing.
double percentile_abs(const std::vector<double>& values, double p);

std::pair<SeriesFrame, ScaleRecord> normalize(const SeriesFrame& frame);
// Normalizes with precomputed factors (e.g. the training-set record).
SeriesFrame normalize_with(const SeriesFrame& frame, const ScaleRecord& rec);
SeriesFrame denormalize(const SeriesFrame& frame, const ScaleRecord& rec);

// A set of fixed-length windows cut from one frame. Each per-window array
// is a flat row-major [channels x kWindowLen] block ready for batching.
struct WindowBatch {
  std::vector<Index> origins;
  std::vector<ad::Array> inputs;   // 15 x 128
  std::vector<ad::Array> env;      // 3 x 128
  std::vector<ad::Array> targets;  // 15 x 128
  std::vector<ad::Array> weights;  // 15 x 128, values in {0,1}

  Index count() const { return static_cast<Index>(origins.size()); }
};

// Cuts overlapping windows at the given stride. Targets come from the
// frame itself (self-reconstruction) or from clean_targets when provided
// (noise-injection training). Loss weights are 0 where the frame is stale
// or missing, 1 elsewhere. With drop_unsupervised, windows whose weights
// are all zero are skipped (training only; inference needs full coverage).
WindowBatch make_windows(const SeriesFrame& frame, Index stride,
                         const SeriesFrame* clean_targets = nullptr,
                         bool drop_unsupervised = false);

// Overlap-averages denoised [15 x 128] windows back into a frame covering
// [0, total_length). Timestamps and env are copied from `like` when given.
// Throws data_error naming the first uncovered interval.
SeriesFrame stitch(const std::vector<ad::Array>& windows,
                   const std::vector<Index>& origins, Index total_length,
                   const SeriesFrame* like = nullptr);

}  // namespace pc2dae
