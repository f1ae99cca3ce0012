#include "pc2dae/metrics.hpp"

#include <algorithm>
#include <complex>
#include <cstdio>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "json.hpp"

#include "pc2dae/common.hpp"

namespace pc2dae {

namespace {

// Input power below this fraction of total spectral power counts as "no
// meaningful energy above the cutoff"; window leakage from low-frequency
// tones sits orders of magnitude below it.
constexpr double kHfDefinedFraction = 1e-6;

void require_length(const Eigen::ArrayXd& y, Eigen::Index min_len,
                    const char* what) {
  if (y.size() < min_len) {
    throw data_error(std::string(what) + ": need at least " +
                     std::to_string(min_len) + " samples, got " +
                     std::to_string(y.size()));
  }
}

// (power above fs/8, total power) of the mean-removed Hann periodogram.
std::pair<double, double> band_power(const Eigen::ArrayXd& y) {
  const Eigen::Index n = y.size();
  const double mean = y.mean();
  std::vector<double> windowed(static_cast<size_t>(n));
  for (Eigen::Index t = 0; t < n; ++t) {
    const double w =
        0.5 * (1.0 - std::cos(2.0 * M_PI * double(t) / double(n - 1)));
    windowed[static_cast<size_t>(t)] = (y(t) - mean) * w;
  }
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spectrum;
  fft.fwd(spectrum, windowed);
  double hf = 0.0;
  double total = 0.0;
  for (Eigen::Index k = 1; k <= n / 2; ++k) {
    const double p = std::norm(spectrum[static_cast<size_t>(k)]);
    total += p;
    if (double(k) / double(n) > 0.125) hf += p;
  }
  return {hf, total};
}

}  // namespace

double total_variation(const Eigen::ArrayXd& y) {
  require_length(y, 2, "total_variation");
  const Eigen::Index n = y.size();
  return (y.tail(n - 1) - y.head(n - 1)).abs().sum();
}

double smoothness_improvement(const Eigen::ArrayXd& input,
                              const Eigen::ArrayXd& output) {
  const double tv_in = total_variation(input);
  const double tv_out = total_variation(output);
  if (tv_in == 0.0) return kUndefinedMetric;
  return 100.0 * (tv_in - tv_out) / tv_in;
}

double high_frequency_power(const Eigen::ArrayXd& y, double fs) {
  (void)fs;  // the cutoff is fs/8 regardless of the rate's absolute value
  require_length(y, 64, "high_frequency_power");
  return band_power(y).first;
}

double hf_reduction(const Eigen::ArrayXd& input, const Eigen::ArrayXd& output,
                    double fs) {
  (void)fs;
  require_length(input, 64, "hf_reduction");
  if (input.size() != output.size()) {
    throw data_error("hf_reduction: length mismatch " +
                     std::to_string(input.size()) + " vs " +
                     std::to_string(output.size()));
  }
  const auto [hf_in, total_in] = band_power(input);
  if (total_in == 0.0 || hf_in <= kHfDefinedFraction * total_in) {
    return kUndefinedMetric;
  }
  const double hf_out = band_power(output).first;
  return 100.0 * (hf_in - hf_out) / hf_in;
}

double violation_rate(const Eigen::ArrayXd& y) {
  require_length(y, 1, "violation_rate");
  const auto negatives = (y < 0.0).count();
  return 100.0 * double(negatives) / double(y.size());
}

double mean_absolute_error(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b) {
  if (a.size() != b.size()) {
    throw data_error("mean_absolute_error: length mismatch " +
                     std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  require_length(a, 1, "mean_absolute_error");
  return (a - b).abs().mean();
}

double mae_improvement(const Eigen::ArrayXd& noisy,
                       const Eigen::ArrayXd& denoised,
                       const Eigen::ArrayXd& clean) {
  const double mae_noisy = mean_absolute_error(noisy, clean);
  if (mae_noisy == 0.0) return kUndefinedMetric;
  const double mae_denoised = mean_absolute_error(denoised, clean);
  return 100.0 * (mae_noisy - mae_denoised) / mae_noisy;
}

double snr_improvement(const Eigen::ArrayXd& noisy,
                       const Eigen::ArrayXd& denoised,
                       const Eigen::ArrayXd& clean) {
  if (noisy.size() != clean.size() || denoised.size() != clean.size()) {
    throw data_error("snr_improvement: length mismatch");
  }
  const double clean_energy = clean.square().sum();
  if (clean_energy == 0.0) return kUndefinedMetric;
  const double err_noisy = (noisy - clean).square().sum();
  const double err_denoised = (denoised - clean).square().sum();
  if (err_noisy == 0.0 && err_denoised == 0.0) return 0.0;
  if (err_denoised == 0.0) return 99.0;
  if (err_noisy == 0.0) return -99.0;
  return std::clamp(10.0 * std::log10(err_noisy / err_denoised), -99.0, 99.0);
}

namespace {

double mean_defined(const std::vector<double>& values) {
  double sum = 0.0;
  int n = 0;
  for (double v : values) {
    if (metric_defined(v)) {
      sum += v;
      n += 1;
    }
  }
  return n > 0 ? sum / double(n) : kUndefinedMetric;
}

ChannelMetrics aggregate(const ChannelMetrics* begin, const ChannelMetrics* end) {
  std::vector<double> sm, hf, vi, ma, sn;
  for (const ChannelMetrics* m = begin; m != end; ++m) {
    sm.push_back(m->smoothness);
    hf.push_back(m->hf);
    vi.push_back(m->violations);
    ma.push_back(m->mae_impr);
    sn.push_back(m->snr_impr);
  }
  ChannelMetrics out;
  out.smoothness = mean_defined(sm);
  out.hf = mean_defined(hf);
  out.violations = mean_defined(vi);
  out.mae_impr = mean_defined(ma);
  out.snr_impr = mean_defined(sn);
  return out;
}

void require_finite_targets(const SeriesFrame& frame, const char* label) {
  for (Index c = 0; c < kNumChannels; ++c) {
    if (!frame.targets.col(c).allFinite()) {
      throw data_error(std::string("evaluate: ") + label + " channel " +
                       channel_table()[static_cast<size_t>(c)].name +
                       " has non-finite values; repair the frame first");
    }
  }
}

nlohmann::json metric_json(double v) {
  if (!metric_defined(v)) return nullptr;
  return v;
}

nlohmann::json metrics_json(const ChannelMetrics& m, bool has_clean) {
  nlohmann::json j;
  j["smoothness_improvement_pct"] = metric_json(m.smoothness);
  j["hf_reduction_pct"] = metric_json(m.hf);
  j["violation_rate_pct"] = metric_json(m.violations);
  if (has_clean) {
    j["mae_improvement_pct"] = metric_json(m.mae_impr);
    j["snr_improvement_db"] = metric_json(m.snr_impr);
  }
  return j;
}

std::string cell(double v) {
  char buf[24];
  if (!metric_defined(v)) {
    std::snprintf(buf, sizeof buf, "%10s", "--");
  } else {
    std::snprintf(buf, sizeof buf, "%10.2f", v);
  }
  return buf;
}

}  // namespace

EvalReport evaluate_frame(const SeriesFrame& input, const SeriesFrame& output,
                          const SeriesFrame* clean) {
  if (input.length() != output.length() ||
      (clean != nullptr && clean->length() != input.length())) {
    throw data_error("evaluate: frame lengths differ");
  }
  require_finite_targets(input, "input");
  require_finite_targets(output, "output");
  if (clean != nullptr) require_finite_targets(*clean, "clean");

  EvalReport report;
  report.has_clean = clean != nullptr;
  const bool spectral = input.length() >= 64;
  for (Index c = 0; c < kNumChannels; ++c) {
    const Eigen::ArrayXd in = input.targets.col(c);
    const Eigen::ArrayXd out = output.targets.col(c);
    ChannelMetrics& m = report.channels[static_cast<size_t>(c)];
    m.smoothness = smoothness_improvement(in, out);
    m.hf = spectral ? hf_reduction(in, out) : kUndefinedMetric;
    m.violations = violation_rate(out);
    if (clean != nullptr) {
      const Eigen::ArrayXd truth = clean->targets.col(c);
      m.mae_impr = mae_improvement(in, out, truth);
      m.snr_impr = snr_improvement(in, out, truth);
    }
  }
  for (int f = 0; f < kNumFamilies; ++f) {
    const auto span = family_span(static_cast<Family>(f));
    report.families[static_cast<size_t>(f)] =
        aggregate(report.channels.data() + span.first,
                  report.channels.data() + span.second);
  }
  report.overall = aggregate(report.families.data(),
                             report.families.data() + kNumFamilies);
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  for (Index c = 0; c < kNumChannels; ++c) {
    j["channels"][channel_table()[static_cast<size_t>(c)].name] =
        metrics_json(channels[static_cast<size_t>(c)], has_clean);
  }
  for (int f = 0; f < kNumFamilies; ++f) {
    j["families"][family_name(static_cast<Family>(f))] =
        metrics_json(families[static_cast<size_t>(f)], has_clean);
  }
  j["overall"] = metrics_json(overall, has_clean);
  return j.dump(2) + "\n";
}

std::string EvalReport::to_text() const {
  std::string text;
  char head[160];
  if (has_clean) {
    std::snprintf(head, sizeof head, "%-12s %10s %10s %10s %10s %10s\n",
                  "series", "smooth%", "hf%", "neg%", "mae%", "snr_db");
  } else {
    std::snprintf(head, sizeof head, "%-12s %10s %10s %10s\n", "series",
                  "smooth%", "hf%", "neg%");
  }
  text += head;
  auto row = [&](const std::string& name, const ChannelMetrics& m) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%-12s", name.c_str());
    text += buf;
    text += " " + cell(m.smoothness) + " " + cell(m.hf) + " " +
            cell(m.violations);
    if (has_clean) text += " " + cell(m.mae_impr) + " " + cell(m.snr_impr);
    text += "\n";
  };
  for (Index c = 0; c < kNumChannels; ++c) {
    row(channel_table()[static_cast<size_t>(c)].name,
        channels[static_cast<size_t>(c)]);
  }
  for (int f = 0; f < kNumFamilies; ++f) {
    row(std::string(family_name(static_cast<Family>(f))) + " (fam)",
        families[static_cast<size_t>(f)]);
  }
  row("overall", overall);
  return text;
}

}  // namespace pc2dae
