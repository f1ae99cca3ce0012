#pragma once

#include <vector>

#include "pc2dae/model.hpp"
#include "pc2dae/windows.hpp"

namespace pc2dae {

// The regular stride grid plus, when the grid falls short, one extra window
// ending at the last sample, so stitching covers the whole frame.
std::vector<Index> coverage_origins(Index length, Index stride = kDefaultStride);

// Full inference path: normalize with the stored factors, cut covering
// windows, forward in eval mode, overlap-average, denormalize. The frame
// must already be repaired (finite targets everywhere).
SeriesFrame denoise_frame(Pc2daeModel& model, const SeriesFrame& frame,
                          const ScaleRecord& scales,
                          Index stride = kDefaultStride);

}  // namespace pc2dae
