#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "pc2dae/series.hpp"

namespace pc2dae {

// Piecewise-linear lookup over an ascending temperature grid, clamped at
// the edges.
struct LookupTable {
  std::vector<double> grid;
  std::vector<double> value;

  double operator()(double x) const;
  void validate(const char* what) const;
};

// Electrochemical-cell compensation parameters: baseline offset and
// temperature slope plus temperature-dependent gain and auxiliary
// subtraction factor relative to factory-zero electrode voltages.
struct EcChannelModel {
  double kappa0 = 0.0;
  double kappa1 = 0.0;
  double T0 = 20.0;
  double WE0 = 0.0;
  double AE0 = 0.0;
  LookupTable beta_gain;
  LookupTable n_aux;

  void validate() const;
  static EcChannelModel representative();  // plausible NO2-cell numbers
};

// s(t) = kappa0 + kappa1*(T - T0) + beta(T) * ((WE - WE0) - n(T)*(AE - AE0))
Eigen::ArrayXd ec_compensate(const Eigen::ArrayXd& we,
                             const Eigen::ArrayXd& ae,
                             const Eigen::ArrayXd& temp,
                             const EcChannelModel& model);

// One plume encounter on one channel: a piecewise-Gaussian pulse peaking
// at peak_time_s with separate rise and decay widths.
struct ChannelEvent {
  double peak_time_s = 0.0;
  double amplitude = 0.0;
  double tau_rise_s = 10.0;
  double tau_decay_s = 30.0;
};

struct SinusoidProfile {
  double base = 0.0;
  double amplitude = 0.0;
  double period_s = 3600.0;
  double phase = 0.0;

  double operator()(double t) const;
};

struct PlumeScenario {
  Index duration_s = 7894;
  std::uint64_t seed = 1;
  std::array<double, kNumChannels> background{};
  std::vector<std::vector<ChannelEvent>> events;  // one list per channel
  SinusoidProfile env_t, env_rh, env_p;
  SinusoidProfile uav_speed;  // m/s; faster passes narrow the encounters
  double uav_speed_ref = 8.0;

  void validate() const;
  // The repository's pinned synthetic flight: shared plume schedule across
  // channels with per-channel amplitude jitter, smoke-scale BC peaks over
  // near-zero backgrounds, ambient-scale CO2.
  static PlumeScenario pinned(Index duration_s = 7894, std::uint64_t seed = 1);
};

struct CorruptionConfig {
  double noise_sigma = 0.05;      // relative to the channel nominal scale
  double drift_per_hour = 0.06;   // random-walk RMS after one hour, relative
  Eigen::ArrayXXd cross;          // 15x15 leakage, diagonal 1
  std::array<double, kNumChannels> lag_t90_s{};     // 0 = no lag
  std::array<Index, kNumChannels> stale_period{};   // <2 = never stale
  double missing_rate = 0.01;

  void validate() const;
  static CorruptionConfig identity();  // no-op corruption
  static CorruptionConfig defaults();
};

SeriesFrame generate_clean(const PlumeScenario& scenario);
SeriesFrame corrupt(const SeriesFrame& clean, const CorruptionConfig& cfg,
                    std::uint64_t seed);

}  // namespace pc2dae
