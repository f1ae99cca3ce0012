#include "pc2dae/pipeline.hpp"

#include <algorithm>

namespace pc2dae {

using ad::Array;
using ad::Tensor;

std::vector<Index> coverage_origins(Index length, Index stride) {
  if (stride < 1) throw data_error("window stride must be >= 1");
  if (length < kWindowLen) {
    throw data_error("frame length " + std::to_string(length) +
                     " is shorter than the window length " +
                     std::to_string(kWindowLen));
  }
  std::vector<Index> origins;
  for (Index start = 0; start + kWindowLen <= length; start += stride) {
    origins.push_back(start);
  }
  if (origins.back() + kWindowLen < length) {
    origins.push_back(length - kWindowLen);
  }
  return origins;
}

SeriesFrame denoise_frame(Pc2daeModel& model, const SeriesFrame& frame,
                          const ScaleRecord& scales, Index stride) {
  for (Index c = 0; c < kNumChannels; ++c) {
    if (!frame.targets.col(c).allFinite()) {
      throw data_error(
          "denoise: channel " +
          std::string(channel_table()[static_cast<size_t>(c)].name) +
          " has missing values; repair the frame first");
    }
  }
  const SeriesFrame normalized = normalize_with(frame, scales);
  const Index n = normalized.length();
  const std::vector<Index> origins = coverage_origins(n, stride);

  ad::NoGradGuard no_grad;
  std::vector<Array> outputs;
  outputs.reserve(origins.size());
  const Index batch_cap = 16;
  for (size_t begin = 0; begin < origins.size(); begin += batch_cap) {
    const Index count = std::min<Index>(
        batch_cap, static_cast<Index>(origins.size() - begin));
    Array in(count * kNumChannels * kWindowLen);
    Array env(count * kNumEnv * kWindowLen);
    for (Index b = 0; b < count; ++b) {
      const Index start = origins[begin + static_cast<size_t>(b)];
      for (Index c = 0; c < kNumChannels; ++c) {
        for (Index j = 0; j < kWindowLen; ++j) {
          in(b * kNumChannels * kWindowLen + c * kWindowLen + j) =
              normalized.targets(start + j, c);
        }
      }
      for (Index e = 0; e < kNumEnv; ++e) {
        for (Index j = 0; j < kWindowLen; ++j) {
          env(b * kNumEnv * kWindowLen + e * kWindowLen + j) =
              normalized.env(start + j, e);
        }
      }
    }
    Tensor x = Tensor::from_array({count, kNumChannels, kWindowLen}, std::move(in));
    Tensor e = Tensor::from_array({count, kNumEnv, kWindowLen}, std::move(env));
    Tensor y = model.forward(x, e, false, nullptr);
    for (Index b = 0; b < count; ++b) {
      outputs.push_back(
          y.values().segment(b * kNumChannels * kWindowLen,
                             kNumChannels * kWindowLen));
    }
  }

  SeriesFrame stitched = stitch(outputs, origins, n, &normalized);
  return denormalize(stitched, scales);
}

}  // namespace pc2dae
