#pragma once

#include <array>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "pc2dae/series.hpp"

namespace pc2dae {

// Metrics whose denominator vanishes carry this marker and are excluded
// from aggregates.
inline constexpr double kUndefinedMetric =
    std::numeric_limits<double>::quiet_NaN();

inline bool metric_defined(double v) { return !std::isnan(v); }

// sum_t |y_{t+1} - y_t|; length >= 2 required.
double total_variation(const Eigen::ArrayXd& y);

// 100 * (TV(in) - TV(out)) / TV(in); undefined when TV(in) = 0.
double smoothness_improvement(const Eigen::ArrayXd& input,
                              const Eigen::ArrayXd& output);

// Power above fs/8 from a mean-removed Hann-windowed periodogram.
double high_frequency_power(const Eigen::ArrayXd& y, double fs = 1.0);

// 100 * (P_hf(in) - P_hf(out)) / P_hf(in); undefined when the input has no
// meaningful power above the cutoff. Lengths must match and be >= 64.
double hf_reduction(const Eigen::ArrayXd& input, const Eigen::ArrayXd& output,
                    double fs = 1.0);

// 100 * |{y_t < 0}| / n, strict inequality (zero is valid).
double violation_rate(const Eigen::ArrayXd& y);

double mean_absolute_error(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b);

// 100 * (MAE(noisy,clean) - MAE(denoised,clean)) / MAE(noisy,clean);
// undefined when the noisy MAE is 0.
double mae_improvement(const Eigen::ArrayXd& noisy,
                       const Eigen::ArrayXd& denoised,
                       const Eigen::ArrayXd& clean);

// SNR(x) = 10*log10(sum clean^2 / sum (x-clean)^2); the improvement
// SNR(denoised) - SNR(noisy) is clamped to [-99, 99] dB. Undefined when the
// clean signal has zero energy.
double snr_improvement(const Eigen::ArrayXd& noisy,
                       const Eigen::ArrayXd& denoised,
                       const Eigen::ArrayXd& clean);

struct ChannelMetrics {
  double smoothness = kUndefinedMetric;   // percent
  double hf = kUndefinedMetric;           // percent
  double violations = kUndefinedMetric;   // percent
  double mae_impr = kUndefinedMetric;     // percent, clean-target runs only
  double snr_impr = kUndefinedMetric;     // dB, clean-target runs only
};

struct EvalReport {
  std::array<ChannelMetrics, kNumChannels> channels;
  std::array<ChannelMetrics, kNumFamilies> families;  // channel means
  ChannelMetrics overall;                             // family mean
  bool has_clean = false;

  std::string to_json() const;
  std::string to_text() const;  // aligned per-family/overall table
};

// Per-channel metrics of output against input, optionally with clean ground
// truth for the error metrics. All target values must be finite (repair
// frames before evaluating); throws data_error otherwise.
EvalReport evaluate_frame(const SeriesFrame& input, const SeriesFrame& output,
                          const SeriesFrame* clean = nullptr);

}  // namespace pc2dae
