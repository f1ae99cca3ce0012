#pragma once

#include <string>

#include "pc2dae/series.hpp"

namespace pc2dae {

// Column layout: t, the 15 target channels in canonical order, env_t,
// env_rh, env_p, then one <channel>__stale flag column (0/1) per target.
// Blank target cells mean missing. Values round-trip bit-exactly.
SeriesFrame read_csv(const std::string& path);
void write_csv(const SeriesFrame& frame, const std::string& path);

}  // namespace pc2dae
