#include "pc2dae/series.hpp"

#include <cmath>

namespace pc2dae {

const char* family_name(Family f) {
  switch (f) {
    case Family::BC:
      return "bc";
    case Family::Gas:
      return "gas";
    case Family::CO2:
      return "co2";
  }
  return "?";
}

const std::vector<ChannelInfo>& channel_table() {
  static const std::vector<ChannelInfo> table = {
      {"bc_uv", Family::BC, "ng/m3", 35000.0},
      {"bc_ir", Family::BC, "ng/m3", 32000.0},
      {"bc2_uv", Family::BC, "ng/m3", 38000.0},
      {"bc2_ir", Family::BC, "ng/m3", 33000.0},
      {"gas_no", Family::Gas, "ppb", 80.0},
      {"gas_no2", Family::Gas, "ppb", 55.0},
      {"gas_o3", Family::Gas, "ppb", 60.0},
      {"gas_so2", Family::Gas, "ppb", 30.0},
      {"gas_co", Family::Gas, "ppb", 700.0},
      {"gas_no2_b", Family::Gas, "ppb", 55.0},
      {"gas_o3_b", Family::Gas, "ppb", 60.0},
      {"gas_so2_b", Family::Gas, "ppb", 30.0},
      {"gas_co_b", Family::Gas, "ppb", 700.0},
      {"co2_scd30", Family::CO2, "ppm", 460.0},
      {"co2_li830", Family::CO2, "ppm", 460.0},
  };
  return table;
}

std::pair<Index, Index> family_span(Family f) {
  switch (f) {
    case Family::BC:
      return {0, 4};
    case Family::Gas:
      return {4, 13};
    case Family::CO2:
      return {13, 15};
  }
  return {0, 0};
}

Family channel_family(Index channel) {
  return channel_table()[static_cast<size_t>(channel)].family;
}

Index channel_index(const std::string& name) {
  const auto& table = channel_table();
  for (size_t i = 0; i < table.size(); ++i) {
    if (table[i].name == name) return static_cast<Index>(i);
  }
  throw data_error("unknown channel name '" + name + "'");
}

const std::array<const char*, kNumEnv> kEnvNames = {"env_t", "env_rh",
                                                    "env_p"};

SeriesFrame SeriesFrame::zeros(Index length) {
  SeriesFrame f;
  f.t.resize(static_cast<size_t>(length));
  for (Index i = 0; i < length; ++i) f.t[static_cast<size_t>(i)] = double(i);
  f.targets = Eigen::ArrayXXd::Zero(length, kNumChannels);
  f.env = Eigen::ArrayXXd::Zero(length, kNumEnv);
  f.stale_mask.setConstant(length, kNumChannels, false);
  f.missing_mask.setConstant(length, kNumChannels, false);
  return f;
}

void SeriesFrame::validate() const {
  const Index n = length();
  if (targets.rows() != n || targets.cols() != kNumChannels) {
    throw data_error("frame targets are " + std::to_string(targets.rows()) +
                     "x" + std::to_string(targets.cols()) + ", expected " +
                     std::to_string(n) + "x" + std::to_string(kNumChannels));
  }
  if (env.rows() != n || env.cols() != kNumEnv) {
    throw data_error("frame env block has wrong dimensions");
  }
  if (stale_mask.rows() != n || stale_mask.cols() != kNumChannels ||
      missing_mask.rows() != n || missing_mask.cols() != kNumChannels) {
    throw data_error("frame masks have wrong dimensions");
  }
  for (Index i = 1; i < n; ++i) {
    const double dt = t[static_cast<size_t>(i)] - t[static_cast<size_t>(i - 1)];
    if (std::abs(dt - 1.0) > 1e-9) {
      throw data_error("timestamps must advance by exactly 1 s; step of " +
                       std::to_string(dt) + " at row " + std::to_string(i));
    }
  }
}

namespace {

// Repairs one column in place given its validity flags.
void repair_column(Eigen::Ref<Eigen::ArrayXd> col,
                   const std::vector<bool>& valid, Index max_interp_gap,
                   const std::string& name) {
  const Index n = col.size();
  Index first_valid = -1;
  for (Index i = 0; i < n; ++i) {
    if (valid[static_cast<size_t>(i)]) {
      first_valid = i;
      break;
    }
  }
  if (first_valid < 0) {
    throw data_error("channel '" + name + "' has no valid samples to repair");
  }
  for (Index i = 0; i < first_valid; ++i) col(i) = col(first_valid);

  Index prev = first_valid;
  for (Index i = first_valid + 1; i < n; ++i) {
    if (!valid[static_cast<size_t>(i)]) continue;
    const Index gap = i - prev - 1;
    if (gap > 0) {
      if (gap <= max_interp_gap) {
        const double step = (col(i) - col(prev)) / double(i - prev);
        for (Index j = prev + 1; j < i; ++j) {
          col(j) = col(prev) + step * double(j - prev);
        }
      } else {
        // Long gap: hold each edge value to the midpoint.
        const Index mid = prev + (i - prev) / 2;
        for (Index j = prev + 1; j < i; ++j) {
          col(j) = (j <= mid) ? col(prev) : col(i);
        }
      }
    }
    prev = i;
  }
  for (Index i = prev + 1; i < n; ++i) col(i) = col(prev);
}

}  // namespace

SeriesFrame repair_missing(const SeriesFrame& frame, Index max_interp_gap) {
  frame.validate();
  SeriesFrame out = frame;
  const Index n = frame.length();
  std::vector<bool> valid(static_cast<size_t>(n));
  for (Index c = 0; c < kNumChannels; ++c) {
    for (Index i = 0; i < n; ++i) {
      valid[static_cast<size_t>(i)] =
          !frame.missing_mask(i, c) && std::isfinite(frame.targets(i, c));
    }
    repair_column(out.targets.col(c), valid, max_interp_gap,
                  channel_table()[static_cast<size_t>(c)].name);
  }
  for (Index c = 0; c < kNumEnv; ++c) {
    for (Index i = 0; i < n; ++i) {
      valid[static_cast<size_t>(i)] = std::isfinite(frame.env(i, c));
    }
    bool any_invalid = false;
    for (Index i = 0; i < n; ++i) {
      if (!valid[static_cast<size_t>(i)]) {
        any_invalid = true;
        break;
      }
    }
    if (any_invalid) {
      repair_column(out.env.col(c), valid, max_interp_gap, kEnvNames[c]);
    }
  }
  return out;
}

}  // namespace pc2dae
