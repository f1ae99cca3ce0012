#pragma once

#include <Eigen/Core>
#include <array>
#include <string>
#include <vector>

#include "pc2dae/common.hpp"

namespace pc2dae {

using Index = Eigen::Index;

enum class Family { BC = 0, Gas = 1, CO2 = 2 };
inline constexpr int kNumFamilies = 3;
// Family layout BC:4, Gas:9, CO2:2.
inline constexpr Index kNumChannels = 15;
inline constexpr Index kNumEnv = 3;

const char* family_name(Family f);

struct ChannelInfo {
  std::string name;
  Family family;
  std::string unit;
  // Rough magnitude of the physical signal, used by the simulator to make
  // relative corruption levels comparable across units.
  double nominal_scale;
};

// Canonical channel order: BC pair UV/IR for two aethalometer heads, Gas
// from two analog front-end boards (board B lacks the NO cell), CO2 from
// two NDIR sensors. All frames, windows and model outputs use this order.
const std::vector<ChannelInfo>& channel_table();

// Half-open [begin, end) column range of a family in the canonical order.
std::pair<Index, Index> family_span(Family f);
Family channel_family(Index channel);
Index channel_index(const std::string& name);  // throws data_error if unknown

extern const std::array<const char*, kNumEnv> kEnvNames;  // env_t, env_rh, env_p

// Synchronized multi-channel 1 Hz record. Storage is column-per-channel;
// missing target entries hold NaN and are flagged in missing_mask.
struct SeriesFrame {
  std::vector<double> t;                           // seconds, unit spacing
  Eigen::ArrayXXd targets;                         // length x kNumChannels
  Eigen::ArrayXXd env;                             // length x kNumEnv
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> stale_mask;    // x15
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> missing_mask;  // x15

  Index length() const { return static_cast<Index>(t.size()); }

  static SeriesFrame zeros(Index length);
  // Throws data_error on inconsistent dimensions or non-unit time steps.
  void validate() const;
};

// Fills missing target values so frames can enter the network: gaps of at
// most max_interp_gap samples are linearly interpolated, longer gaps and
// boundary gaps repeat the nearest valid sample. Masks are left untouched
// (repaired entries still carry zero loss weight). Env gaps are always
// repaired the same way. Throws data_error if a channel has no valid
// sample at all.
SeriesFrame repair_missing(const SeriesFrame& frame, Index max_interp_gap = 5);

}  // namespace pc2dae
