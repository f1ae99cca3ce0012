#include "pc2dae/windows.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace pc2dae {

void ScaleRecord::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot open '" + path + "' for writing");
  char buf[40];
  const auto& table = channel_table();
  for (Index c = 0; c < kNumChannels; ++c) {
    std::snprintf(buf, sizeof buf, "%.17g", target_scale[static_cast<size_t>(c)]);
    out << "scale_" << table[static_cast<size_t>(c)].name << " = " << buf << '\n';
  }
  for (Index e = 0; e < kNumEnv; ++e) {
    std::snprintf(buf, sizeof buf, "%.17g", env_mean[static_cast<size_t>(e)]);
    out << "mean_" << kEnvNames[static_cast<size_t>(e)] << " = " << buf << '\n';
    std::snprintf(buf, sizeof buf, "%.17g", env_std[static_cast<size_t>(e)]);
    out << "std_" << kEnvNames[static_cast<size_t>(e)] << " = " << buf << '\n';
  }
  if (!out) throw data_error("write to '" + path + "' failed");
}

ScaleRecord ScaleRecord::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open scale record '" + path + "'");
  ScaleRecord rec;
  std::vector<bool> seen(static_cast<size_t>(kNumChannels + 2 * kNumEnv), false);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    auto trim = [](std::string& s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      s = (a == std::string::npos) ? "" : s.substr(a, b - a + 1);
    };
    trim(key);
    trim(val);
    const double v = std::strtod(val.c_str(), nullptr);
    const auto& table = channel_table();
    bool matched = false;
    for (Index c = 0; c < kNumChannels && !matched; ++c) {
      if (key == "scale_" + table[static_cast<size_t>(c)].name) {
        rec.target_scale[static_cast<size_t>(c)] = v;
        seen[static_cast<size_t>(c)] = true;
        matched = true;
      }
    }
    for (Index e = 0; e < kNumEnv && !matched; ++e) {
      if (key == std::string("mean_") + kEnvNames[static_cast<size_t>(e)]) {
        rec.env_mean[static_cast<size_t>(e)] = v;
        seen[static_cast<size_t>(kNumChannels + 2 * e)] = true;
        matched = true;
      } else if (key == std::string("std_") + kEnvNames[static_cast<size_t>(e)]) {
        rec.env_std[static_cast<size_t>(e)] = v;
        seen[static_cast<size_t>(kNumChannels + 2 * e + 1)] = true;
        matched = true;
      }
    }
  }
  for (bool s : seen) {
    if (!s) throw data_error("scale record '" + path + "' is incomplete");
  }
  return rec;
}

double percentile_abs(const std::vector<double>& values, double p) {
  if (values.empty()) throw data_error("percentile of empty sample");
  std::vector<double> v;
  v.reserve(values.size());
  for (double x : values) v.push_back(std::abs(x));
  std::sort(v.begin(), v.end());
  const double rank = (p / 100.0) * double(v.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(rank));
  const size_t hi = static_cast<size_t>(std::ceil(rank));
  const double frac = rank - double(lo);
  return v[lo] + (v[hi] - v[lo]) * frac;
}

namespace {

ScaleRecord compute_scales(const SeriesFrame& frame) {
  ScaleRecord rec;
  const auto& table = channel_table();
  for (Index c = 0; c < kNumChannels; ++c) {
    std::vector<double> sample;
    sample.reserve(static_cast<size_t>(frame.length()));
    for (Index i = 0; i < frame.length(); ++i) {
      if (!frame.missing_mask(i, c) && std::isfinite(frame.targets(i, c))) {
        sample.push_back(frame.targets(i, c));
      }
    }
    if (sample.empty()) {
      throw data_error("channel '" + table[static_cast<size_t>(c)].name +
                       "' is entirely missing; cannot normalize");
    }
    double s = percentile_abs(sample, 99.0);
    if (s <= 0.0) {
      // Degenerate channel (all zeros up to p99); fall back to the max,
      // then to 1 so the transform stays invertible.
      for (double x : sample) s = std::max(s, std::abs(x));
      if (s <= 0.0) s = 1.0;
    }
    rec.target_scale[static_cast<size_t>(c)] = s;
  }
  for (Index e = 0; e < kNumEnv; ++e) {
    double mean = 0.0;
    Index n = 0;
    for (Index i = 0; i < frame.length(); ++i) {
      if (std::isfinite(frame.env(i, e))) {
        mean += frame.env(i, e);
        ++n;
      }
    }
    if (n == 0) throw data_error(std::string("env channel '") +
                                 kEnvNames[static_cast<size_t>(e)] +
                                 "' is entirely missing");
    mean /= double(n);
    double var = 0.0;
    for (Index i = 0; i < frame.length(); ++i) {
      if (std::isfinite(frame.env(i, e))) {
        const double d = frame.env(i, e) - mean;
        var += d * d;
      }
    }
    var /= double(n);
    rec.env_mean[static_cast<size_t>(e)] = mean;
    rec.env_std[static_cast<size_t>(e)] = (var > 1e-24) ? std::sqrt(var) : 1.0;
  }
  return rec;
}

}  // namespace

SeriesFrame normalize_with(const SeriesFrame& frame, const ScaleRecord& rec) {
  SeriesFrame out = frame;
  for (Index c = 0; c < kNumChannels; ++c) {
    out.targets.col(c) /= rec.target_scale[static_cast<size_t>(c)];
  }
  for (Index e = 0; e < kNumEnv; ++e) {
    out.env.col(e) = (out.env.col(e) - rec.env_mean[static_cast<size_t>(e)]) /
                     rec.env_std[static_cast<size_t>(e)];
  }
  return out;
}

std::pair<SeriesFrame, ScaleRecord> normalize(const SeriesFrame& frame) {
  frame.validate();
  ScaleRecord rec = compute_scales(frame);
  return {normalize_with(frame, rec), rec};
}

SeriesFrame denormalize(const SeriesFrame& frame, const ScaleRecord& rec) {
  SeriesFrame out = frame;
  for (Index c = 0; c < kNumChannels; ++c) {
    out.targets.col(c) *= rec.target_scale[static_cast<size_t>(c)];
  }
  for (Index e = 0; e < kNumEnv; ++e) {
    out.env.col(e) = out.env.col(e) * rec.env_std[static_cast<size_t>(e)] +
                     rec.env_mean[static_cast<size_t>(e)];
  }
  return out;
}

WindowBatch make_windows(const SeriesFrame& frame, Index stride,
                         const SeriesFrame* clean_targets,
                         bool drop_unsupervised) {
  frame.validate();
  if (stride < 1) throw data_error("window stride must be >= 1");
  const Index n = frame.length();
  if (n < kWindowLen) {
    throw data_error("frame length " + std::to_string(n) +
                     " is shorter than the window length " +
                     std::to_string(kWindowLen));
  }
  if (clean_targets && clean_targets->length() != n) {
    throw data_error("clean target frame length " +
                     std::to_string(clean_targets->length()) +
                     " does not match input length " + std::to_string(n));
  }
  const SeriesFrame& tgt = clean_targets ? *clean_targets : frame;

  WindowBatch batch;
  for (Index start = 0; start + kWindowLen <= n; start += stride) {
    ad::Array in(kNumChannels * kWindowLen), tg(kNumChannels * kWindowLen),
        wt(kNumChannels * kWindowLen), ev(kNumEnv * kWindowLen);
    double weight_sum = 0.0;
    for (Index c = 0; c < kNumChannels; ++c) {
      for (Index j = 0; j < kWindowLen; ++j) {
        const Index i = start + j;
        in(c * kWindowLen + j) = frame.targets(i, c);
        tg(c * kWindowLen + j) = tgt.targets(i, c);
        const bool masked = frame.stale_mask(i, c) || frame.missing_mask(i, c);
        wt(c * kWindowLen + j) = masked ? 0.0 : 1.0;
        weight_sum += wt(c * kWindowLen + j);
      }
    }
    for (Index e = 0; e < kNumEnv; ++e) {
      for (Index j = 0; j < kWindowLen; ++j) {
        ev(e * kWindowLen + j) = frame.env(start + j, e);
      }
    }
    if (drop_unsupervised && weight_sum == 0.0) continue;
    batch.origins.push_back(start);
    batch.inputs.push_back(std::move(in));
    batch.env.push_back(std::move(ev));
    batch.targets.push_back(std::move(tg));
    batch.weights.push_back(std::move(wt));
  }
  if (batch.count() == 0) {
    throw data_error("no usable windows (all windows fully masked)");
  }
  return batch;
}

SeriesFrame stitch(const std::vector<ad::Array>& windows,
                   const std::vector<Index>& origins, Index total_length,
                   const SeriesFrame* like) {
  if (windows.size() != origins.size()) {
    throw data_error("stitch: " + std::to_string(windows.size()) +
                     " windows vs " + std::to_string(origins.size()) +
                     " origins");
  }
  if (like && like->length() != total_length) {
    throw data_error("stitch: reference frame length mismatch");
  }
  Eigen::ArrayXXd sums = Eigen::ArrayXXd::Zero(total_length, kNumChannels);
  Eigen::ArrayXd counts = Eigen::ArrayXd::Zero(total_length);
  for (size_t w = 0; w < windows.size(); ++w) {
    const Index start = origins[w];
    if (start < 0 || start + kWindowLen > total_length) {
      throw data_error("stitch: window at " + std::to_string(start) +
                       " falls outside [0," + std::to_string(total_length) +
                       ")");
    }
    if (windows[w].size() != kNumChannels * kWindowLen) {
      throw data_error("stitch: window has " +
                       std::to_string(windows[w].size()) +
                       " values, expected " +
                       std::to_string(kNumChannels * kWindowLen));
    }
    for (Index c = 0; c < kNumChannels; ++c) {
      for (Index j = 0; j < kWindowLen; ++j) {
        sums(start + j, c) += windows[w](c * kWindowLen + j);
      }
    }
    counts.segment(start, kWindowLen) += 1.0;
  }
  for (Index i = 0; i < total_length; ++i) {
    if (counts(i) == 0.0) {
      Index j = i;
      while (j + 1 < total_length && counts(j + 1) == 0.0) ++j;
      throw data_error("stitch: no window covers samples [" +
                       std::to_string(i) + "," + std::to_string(j) + "]");
    }
  }
  SeriesFrame out = like ? *like : SeriesFrame::zeros(total_length);
  out.targets = sums.colwise() / counts;
  out.stale_mask.setConstant(total_length, kNumChannels, false);
  out.missing_mask.setConstant(total_length, kNumChannels, false);
  return out;
}

}  // namespace pc2dae
