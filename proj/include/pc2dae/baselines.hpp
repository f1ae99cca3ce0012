#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pc2dae/metrics.hpp"
#include "pc2dae/series.hpp"

namespace pc2dae {

// Centered mean with edge-replicate padding; w odd. Length preserved.
Eigen::ArrayXd moving_average(const Eigen::ArrayXd& y, Index w);

// Least-squares polynomial smoothing via precomputed convolution
// coefficients; exact on polynomials of degree <= order away from the
// edge-replicated borders.
Eigen::ArrayXd savitzky_golay(const Eigen::ArrayXd& y, Index w, Index order);

// Central-row convolution coefficients, offsets -(w-1)/2 .. (w-1)/2.
Eigen::ArrayXd savitzky_golay_coefficients(Index w, Index order);

// Causal scalar Kalman filter for a random-walk state observed in white
// noise: x_t = x_{t-1} + w_t (var q), z_t = x_t + v_t (var r).
Eigen::ArrayXd kalman_1d(const Eigen::ArrayXd& y, double q, double r);

struct KalmanParams {
  double q = 0.0;
  double r = 0.0;
};

// q = var(diff(y))/2, r from the median absolute first difference (robust
// high-frequency residual variance). Both floored to stay positive.
KalmanParams estimate_kalman_params(const Eigen::ArrayXd& y);

// Steady-state error covariance of the filter above: the positive root of
// P^2 + q P - q r = 0.
double kalman_steady_state_covariance(double q, double r);

// Orthogonal 4-tap Daubechies wavelet transform with periodic extension.
// Odd-length stages replicate their last sample before splitting. The
// forward/inverse pair reconstructs exactly (below 1e-10).
struct WaveletPyramid {
  std::vector<Eigen::ArrayXd> details;  // finest first
  Eigen::ArrayXd approx;
  std::vector<bool> padded;  // per level, matching details
  Index original_length = 0;
};

WaveletPyramid wavelet_forward(const Eigen::ArrayXd& y, Index levels);
Eigen::ArrayXd wavelet_inverse(const WaveletPyramid& pyramid);

// Soft-threshold each detail band at sigma_hat * sqrt(2 ln n), sigma_hat
// from the median absolute deviation of the finest details.
Eigen::ArrayXd wavelet_denoise(const Eigen::ArrayXd& y, Index levels = 4);

struct BaselineConfig {
  Index movavg_short = 5;
  Index movavg_long = 11;
  Index savgol_window = 11;
  Index savgol_order = 3;
  double kalman_q = 0.0;  // 0 = estimate from the data
  double kalman_r = 0.0;  // 0 = estimate from the data
  Index wavelet_levels = 4;

  void validate() const;  // throws config_error
};

struct MethodRow {
  std::string name;
  ChannelMetrics overall;
};

struct ComparisonTable {
  std::vector<MethodRow> rows;  // sorted by MAE improvement, best first

  const MethodRow* find(const std::string& name) const;
  std::string to_json() const;
  std::string to_text() const;
};

// Applies every classical method per channel on physical scale, evaluates
// each result (and the supplied model output) against the clean frame, and
// collects rows: pc2dae, raw, movavg5, movavg11, savgol, kalman, wavelet.
ComparisonTable run_comparison(const SeriesFrame& noisy,
                               const SeriesFrame& clean,
                               const SeriesFrame& model_output,
                               const BaselineConfig& cfg = {});

}  // namespace pc2dae
