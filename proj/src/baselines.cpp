#include "pc2dae/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "json.hpp"

#include "pc2dae/common.hpp"

namespace pc2dae {

namespace {

Index clamp_index(Index t, Index n) { return std::clamp<Index>(t, 0, n - 1); }

void require_odd_window(Index w, const char* what) {
  if (w < 1 || w % 2 == 0) {
    throw config_error(std::string(what) + ": window must be odd and >= 1, got " +
                       std::to_string(w));
  }
}

}  // namespace

Eigen::ArrayXd moving_average(const Eigen::ArrayXd& y, Index w) {
  require_odd_window(w, "moving_average");
  const Index n = y.size();
  if (n == 0) return y;
  const Index h = (w - 1) / 2;
  Eigen::ArrayXd out(n);
  for (Index t = 0; t < n; ++t) {
    double acc = 0.0;
    for (Index k = -h; k <= h; ++k) acc += y(clamp_index(t + k, n));
    out(t) = acc / double(w);
  }
  return out;
}

Eigen::ArrayXd savitzky_golay_coefficients(Index w, Index order) {
  require_odd_window(w, "savitzky_golay");
  if (order < 0 || order >= w) {
    throw config_error("savitzky_golay: order must satisfy 0 <= order < window");
  }
  const Index h = (w - 1) / 2;
  Eigen::MatrixXd design(w, order + 1);
  for (Index i = 0; i < w; ++i) {
    double pow_term = 1.0;
    for (Index j = 0; j <= order; ++j) {
      design(i, j) = pow_term;
      pow_term *= double(i - h);
    }
  }
  // Least-squares fit evaluated at the window center: the coefficient vector
  // is the first row of (A^T A)^{-1} A^T.
  Eigen::MatrixXd normal = design.transpose() * design;
  Eigen::VectorXd e0 = Eigen::VectorXd::Zero(order + 1);
  e0(0) = 1.0;
  Eigen::VectorXd solved = normal.ldlt().solve(e0);
  return (design * solved).array();
}

Eigen::ArrayXd savitzky_golay(const Eigen::ArrayXd& y, Index w, Index order) {
  const Eigen::ArrayXd coeff = savitzky_golay_coefficients(w, order);
  const Index n = y.size();
  const Index h = (w - 1) / 2;
  Eigen::ArrayXd out(n);
  for (Index t = 0; t < n; ++t) {
    double acc = 0.0;
    for (Index k = -h; k <= h; ++k) acc += coeff(k + h) * y(clamp_index(t + k, n));
    out(t) = acc;
  }
  return out;
}

Eigen::ArrayXd kalman_1d(const Eigen::ArrayXd& y, double q, double r) {
  if (q <= 0.0 || r <= 0.0) {
    throw config_error("kalman_1d: q and r must be > 0");
  }
  const Index n = y.size();
  Eigen::ArrayXd out(n);
  if (n == 0) return out;
  double x = y(0);
  double p = r;
  out(0) = x;
  for (Index t = 1; t < n; ++t) {
    const double p_pred = p + q;
    const double gain = p_pred / (p_pred + r);
    x = x + gain * (y(t) - x);
    p = (1.0 - gain) * p_pred;
    out(t) = x;
  }
  return out;
}

KalmanParams estimate_kalman_params(const Eigen::ArrayXd& y) {
  const Index n = y.size();
  if (n < 3) throw data_error("kalman estimation needs at least 3 samples");
  Eigen::ArrayXd diff = y.tail(n - 1) - y.head(n - 1);
  const double mean = diff.mean();
  const double var = (diff - mean).square().sum() / double(diff.size() - 1);

  std::vector<double> abs_diff(static_cast<size_t>(diff.size()));
  for (Index i = 0; i < diff.size(); ++i) {
    abs_diff[static_cast<size_t>(i)] = std::abs(diff(i));
  }
  const auto mid = abs_diff.begin() + static_cast<long>(abs_diff.size() / 2);
  std::nth_element(abs_diff.begin(), mid, abs_diff.end());
  const double mad_sigma = *mid / 0.6745;
  // A first difference of white noise has variance 2r.
  const double r = mad_sigma * mad_sigma / 2.0;

  KalmanParams p;
  p.q = std::max(var / 2.0, 1e-18);
  p.r = std::max(r, 1e-18);
  return p;
}

double kalman_steady_state_covariance(double q, double r) {
  return 0.5 * (-q + std::sqrt(q * q + 4.0 * q * r));
}

// ---------------------------------------------------------------- wavelets

namespace {

// 4-tap Daubechies analysis filters.
const std::array<double, 4> kDb4Low = {
    (1.0 + std::sqrt(3.0)) / (4.0 * std::sqrt(2.0)),
    (3.0 + std::sqrt(3.0)) / (4.0 * std::sqrt(2.0)),
    (3.0 - std::sqrt(3.0)) / (4.0 * std::sqrt(2.0)),
    (1.0 - std::sqrt(3.0)) / (4.0 * std::sqrt(2.0))};

std::array<double, 4> db4_high() {
  std::array<double, 4> g;
  for (int k = 0; k < 4; ++k) {
    g[static_cast<size_t>(k)] =
        (k % 2 == 0 ? 1.0 : -1.0) * kDb4Low[static_cast<size_t>(3 - k)];
  }
  return g;
}

void forward_level(const Eigen::ArrayXd& x, Eigen::ArrayXd& approx,
                   Eigen::ArrayXd& detail) {
  static const std::array<double, 4> g = db4_high();
  const Index n = x.size();
  const Index half = n / 2;
  approx.resize(half);
  detail.resize(half);
  for (Index i = 0; i < half; ++i) {
    double a = 0.0;
    double d = 0.0;
    for (Index k = 0; k < 4; ++k) {
      const double v = x((2 * i + k) % n);
      a += kDb4Low[static_cast<size_t>(k)] * v;
      d += g[static_cast<size_t>(k)] * v;
    }
    approx(i) = a;
    detail(i) = d;
  }
}

Eigen::ArrayXd inverse_level(const Eigen::ArrayXd& approx,
                             const Eigen::ArrayXd& detail) {
  static const std::array<double, 4> g = db4_high();
  const Index half = approx.size();
  const Index n = 2 * half;
  Eigen::ArrayXd x = Eigen::ArrayXd::Zero(n);
  for (Index i = 0; i < half; ++i) {
    for (Index k = 0; k < 4; ++k) {
      x((2 * i + k) % n) += kDb4Low[static_cast<size_t>(k)] * approx(i) +
                            g[static_cast<size_t>(k)] * detail(i);
    }
  }
  return x;
}

}  // namespace

WaveletPyramid wavelet_forward(const Eigen::ArrayXd& y, Index levels) {
  if (levels < 1) throw config_error("wavelet_forward: levels must be >= 1");
  if (y.size() < (Index(1) << levels)) {
    throw data_error("wavelet_forward: series of length " +
                     std::to_string(y.size()) + " is too short for " +
                     std::to_string(levels) + " levels");
  }
  WaveletPyramid pyr;
  pyr.original_length = y.size();
  Eigen::ArrayXd current = y;
  for (Index l = 0; l < levels; ++l) {
    const bool pad = current.size() % 2 != 0;
    if (pad) {
      Eigen::ArrayXd extended(current.size() + 1);
      extended.head(current.size()) = current;
      extended(current.size()) = current(current.size() - 1);
      current.swap(extended);
    }
    Eigen::ArrayXd approx, detail;
    forward_level(current, approx, detail);
    pyr.details.push_back(std::move(detail));
    pyr.padded.push_back(pad);
    current = std::move(approx);
  }
  pyr.approx = std::move(current);
  return pyr;
}

Eigen::ArrayXd wavelet_inverse(const WaveletPyramid& pyramid) {
  Eigen::ArrayXd current = pyramid.approx;
  for (size_t l = pyramid.details.size(); l-- > 0;) {
    current = inverse_level(current, pyramid.details[l]);
    if (pyramid.padded[l]) {
      current.conservativeResize(current.size() - 1);
    }
  }
  if (current.size() != pyramid.original_length) {
    throw numeric_error("wavelet_inverse: reconstructed length " +
                        std::to_string(current.size()) + " != original " +
                        std::to_string(pyramid.original_length));
  }
  return current;
}

Eigen::ArrayXd wavelet_denoise(const Eigen::ArrayXd& y, Index levels) {
  WaveletPyramid pyr = wavelet_forward(y, levels);

  const Eigen::ArrayXd& finest = pyr.details.front();
  std::vector<double> abs_detail(static_cast<size_t>(finest.size()));
  for (Index i = 0; i < finest.size(); ++i) {
    abs_detail[static_cast<size_t>(i)] = std::abs(finest(i));
  }
  const auto mid = abs_detail.begin() + static_cast<long>(abs_detail.size() / 2);
  std::nth_element(abs_detail.begin(), mid, abs_detail.end());
  const double sigma = *mid / 0.6745;
  const double threshold = sigma * std::sqrt(2.0 * std::log(double(y.size())));

  for (auto& detail : pyr.details) {
    detail = detail.sign() * (detail.abs() - threshold).max(0.0);
  }
  return wavelet_inverse(pyr);
}

// -------------------------------------------------------------- comparison

void BaselineConfig::validate() const {
  require_odd_window(movavg_short, "movavg_short");
  require_odd_window(movavg_long, "movavg_long");
  require_odd_window(savgol_window, "savgol_window");
  if (savgol_order < 0 || savgol_order >= savgol_window) {
    throw config_error("savgol_order must satisfy 0 <= order < window");
  }
  if (kalman_q < 0.0 || kalman_r < 0.0) {
    throw config_error("kalman variances must be >= 0 (0 = estimate)");
  }
  if (wavelet_levels < 1) throw config_error("wavelet_levels must be >= 1");
}

const MethodRow* ComparisonTable::find(const std::string& name) const {
  for (const auto& row : rows) {
    if (row.name == name) return &row;
  }
  return nullptr;
}

namespace {

SeriesFrame apply_per_channel(
    const SeriesFrame& noisy,
    const std::function<Eigen::ArrayXd(const Eigen::ArrayXd&)>& method) {
  SeriesFrame out = noisy;
  for (Index c = 0; c < kNumChannels; ++c) {
    out.targets.col(c) = method(noisy.targets.col(c));
  }
  return out;
}

}  // namespace

ComparisonTable run_comparison(const SeriesFrame& noisy,
                               const SeriesFrame& clean,
                               const SeriesFrame& model_output,
                               const BaselineConfig& cfg) {
  cfg.validate();
  ComparisonTable table;
  auto add_row = [&](const std::string& name, const SeriesFrame& output) {
    MethodRow row;
    row.name = name;
    row.overall = evaluate_frame(noisy, output, &clean).overall;
    table.rows.push_back(std::move(row));
  };

  add_row("pc2dae", model_output);
  add_row("raw", noisy);
  add_row("movavg5", apply_per_channel(noisy, [&](const Eigen::ArrayXd& y) {
            return moving_average(y, cfg.movavg_short);
          }));
  add_row("movavg11", apply_per_channel(noisy, [&](const Eigen::ArrayXd& y) {
            return moving_average(y, cfg.movavg_long);
          }));
  add_row("savgol", apply_per_channel(noisy, [&](const Eigen::ArrayXd& y) {
            return savitzky_golay(y, cfg.savgol_window, cfg.savgol_order);
          }));
  add_row("kalman", apply_per_channel(noisy, [&](const Eigen::ArrayXd& y) {
            KalmanParams p;
            p.q = cfg.kalman_q;
            p.r = cfg.kalman_r;
            if (p.q == 0.0 || p.r == 0.0) {
              const KalmanParams est = estimate_kalman_params(y);
              if (p.q == 0.0) p.q = est.q;
              if (p.r == 0.0) p.r = est.r;
            }
            return kalman_1d(y, p.q, p.r);
          }));
  add_row("wavelet", apply_per_channel(noisy, [&](const Eigen::ArrayXd& y) {
            return wavelet_denoise(y, cfg.wavelet_levels);
          }));

  std::stable_sort(table.rows.begin(), table.rows.end(),
                   [](const MethodRow& a, const MethodRow& b) {
                     const double ma = metric_defined(a.overall.mae_impr)
                                           ? a.overall.mae_impr
                                           : -std::numeric_limits<double>::infinity();
                     const double mb = metric_defined(b.overall.mae_impr)
                                           ? b.overall.mae_impr
                                           : -std::numeric_limits<double>::infinity();
                     return ma > mb;
                   });
  return table;
}

std::string ComparisonTable::to_json() const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json r;
    r["method"] = row.name;
    auto field = [](double v) {
      return metric_defined(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
    };
    r["mae_improvement_pct"] = field(row.overall.mae_impr);
    r["snr_improvement_db"] = field(row.overall.snr_impr);
    r["violation_rate_pct"] = field(row.overall.violations);
    r["smoothness_improvement_pct"] = field(row.overall.smoothness);
    r["hf_reduction_pct"] = field(row.overall.hf);
    j.push_back(std::move(r));
  }
  return j.dump(2) + "\n";
}

std::string ComparisonTable::to_text() const {
  std::string text;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-10s %10s %10s %10s %10s %10s\n", "method",
                "mae%", "snr_db", "neg%", "smooth%", "hf%");
  text += buf;
  auto cell = [](double v) {
    char b[24];
    if (metric_defined(v)) {
      std::snprintf(b, sizeof b, "%10.2f", v);
    } else {
      std::snprintf(b, sizeof b, "%10s", "--");
    }
    return std::string(b);
  };
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof buf, "%-10s", row.name.c_str());
    text += buf;
    text += " " + cell(row.overall.mae_impr) + " " + cell(row.overall.snr_impr) +
            " " + cell(row.overall.violations) + " " +
            cell(row.overall.smoothness) + " " + cell(row.overall.hf) + "\n";
  }
  return text;
}

}  // namespace pc2dae
