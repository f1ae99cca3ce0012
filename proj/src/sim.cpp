#include "pc2dae/sim.hpp"

#include <cmath>
#include <limits>

#include "pc2dae/rng.hpp"

namespace pc2dae {

double LookupTable::operator()(double x) const {
  if (grid.empty()) throw config_error("empty lookup table");
  if (x <= grid.front()) return value.front();
  if (x >= grid.back()) return value.back();
  size_t hi = 1;
  while (grid[hi] < x) ++hi;
  const double f = (x - grid[hi - 1]) / (grid[hi] - grid[hi - 1]);
  return value[hi - 1] + f * (value[hi] - value[hi - 1]);
}

void LookupTable::validate(const char* what) const {
  if (grid.size() < 2 || grid.size() != value.size()) {
    throw config_error(std::string(what) + ": lookup needs >= 2 grid points");
  }
  for (size_t i = 1; i < grid.size(); ++i) {
    if (grid[i] <= grid[i - 1]) {
      throw config_error(std::string(what) + ": grid not ascending");
    }
  }
  const bool inc = value.back() >= value.front();
  for (size_t i = 1; i < value.size(); ++i) {
    if (inc ? (value[i] < value[i - 1]) : (value[i] > value[i - 1])) {
      throw config_error(std::string(what) + ": values not monotone");
    }
  }
}

void EcChannelModel::validate() const {
  beta_gain.validate("beta_gain");
  n_aux.validate("n_aux");
  for (double T = 15.0; T <= 35.0; T += 0.5) {
    if (beta_gain(T) <= 0.0) {
      throw config_error("beta_gain must stay positive over 15-35 degC");
    }
  }
}

EcChannelModel EcChannelModel::representative() {
  EcChannelModel m;
  m.kappa0 = 0.018;
  m.kappa1 = 0.0035;
  m.T0 = 20.0;
  m.WE0 = 0.285;
  m.AE0 = 0.278;
  m.beta_gain.grid = {15.0, 20.0, 25.0, 30.0, 35.0};
  m.beta_gain.value = {0.82, 0.95, 1.08, 1.22, 1.38};
  m.n_aux.grid = {15.0, 20.0, 25.0, 30.0, 35.0};
  m.n_aux.value = {1.32, 1.18, 1.09, 1.03, 0.98};
  m.validate();
  return m;
}

Eigen::ArrayXd ec_compensate(const Eigen::ArrayXd& we,
                             const Eigen::ArrayXd& ae,
                             const Eigen::ArrayXd& temp,
                             const EcChannelModel& model) {
  model.validate();
  if (we.size() != ae.size() || we.size() != temp.size()) {
    throw data_error("ec_compensate: series lengths differ (WE " +
                     std::to_string(we.size()) + ", AE " +
                     std::to_string(ae.size()) + ", T " +
                     std::to_string(temp.size()) + ")");
  }
  Eigen::ArrayXd out(we.size());
  for (Index i = 0; i < we.size(); ++i) {
    const double T = temp(i);
    out(i) = model.kappa0 + model.kappa1 * (T - model.T0) +
             model.beta_gain(T) *
                 ((we(i) - model.WE0) - model.n_aux(T) * (ae(i) - model.AE0));
  }
  return out;
}

double SinusoidProfile::operator()(double t) const {
  return base + amplitude * std::sin(2.0 * M_PI * t / period_s + phase);
}

void PlumeScenario::validate() const {
  if (duration_s < 1) throw config_error("scenario duration must be >= 1 s");
  if (events.size() != static_cast<size_t>(kNumChannels)) {
    throw config_error("scenario must carry one event list per channel (" +
                       std::to_string(events.size()) + " given, " +
                       std::to_string(kNumChannels) + " required)");
  }
  for (Index c = 0; c < kNumChannels; ++c) {
    if (background[static_cast<size_t>(c)] < 0.0) {
      throw config_error("negative background on channel '" +
                         channel_table()[static_cast<size_t>(c)].name + "'");
    }
    for (const auto& ev : events[static_cast<size_t>(c)]) {
      if (ev.amplitude < 0.0 || ev.tau_rise_s <= 0.0 || ev.tau_decay_s <= 0.0) {
        throw config_error("invalid event on channel '" +
                           channel_table()[static_cast<size_t>(c)].name + "'");
      }
    }
  }
  if (uav_speed_ref <= 0.0) throw config_error("uav_speed_ref must be > 0");
}

PlumeScenario PlumeScenario::pinned(Index duration_s, std::uint64_t seed) {
  PlumeScenario sc;
  sc.duration_s = duration_s;
  sc.seed = seed;
  // Backgrounds: BC near zero relative to smoke peaks, gas mixed ambient
  // levels, CO2 at ambient ~420 ppm.
  sc.background = {450.0, 380.0, 520.0, 400.0,            // bc
                   2.0,  6.0,  28.0, 1.5, 120.0,          // gas board a
                   7.0,  26.0, 2.0,  110.0,               // gas board b
                   421.0, 423.0};                          // co2
  sc.env_t = {24.0, 6.0, 3600.0, 0.3};
  sc.env_rh = {50.0, 15.0, 5400.0, 1.1};
  sc.env_p = {952.0, 4.0, 7200.0, 2.0};
  sc.uav_speed = {8.0, 4.0, 1200.0, 0.7};
  sc.uav_speed_ref = 8.0;

  // Amplitude bands per channel (same flight, different species response).
  const std::array<std::pair<double, double>, kNumChannels> amp = {{
      {18000.0, 52000.0}, {16000.0, 47000.0}, {20000.0, 56000.0},
      {17000.0, 49000.0},                                        // bc
      {30.0, 105.0}, {15.0, 65.0}, {12.0, 48.0}, {6.0, 36.0},
      {250.0, 900.0},                                            // gas a
      {14.0, 60.0}, {11.0, 45.0}, {7.0, 38.0}, {230.0, 850.0},   // gas b
      {12.0, 55.0}, {12.0, 55.0},                                // co2
  }};

  RngStream root(seed);
  RngStream times = root.fork("plume-times");
  RngStream amps = root.fork("plume-amplitudes");
  RngStream shapes = root.fork("plume-shapes");

  const Index n_plumes = std::max<Index>(3, duration_s / 600);
  sc.events.assign(static_cast<size_t>(kNumChannels), {});
  for (Index k = 0; k < n_plumes; ++k) {
    const double slot = double(duration_s) / double(n_plumes);
    const double tp =
        std::floor(slot * (double(k) + 0.35 + 0.3 * times.uniform()));
    const double tau_r = shapes.uniform(8.0, 20.0);
    const double tau_d = shapes.uniform(25.0, 60.0);
    // Same plume seen by every channel; per-channel response jitter.
    for (Index c = 0; c < kNumChannels; ++c) {
      ChannelEvent ev;
      ev.peak_time_s = tp + std::round(shapes.uniform(-4.0, 4.0));
      ev.amplitude = amps.uniform(amp[static_cast<size_t>(c)].first,
                                  amp[static_cast<size_t>(c)].second);
      ev.tau_rise_s = tau_r * shapes.uniform(0.85, 1.15);
      ev.tau_decay_s = tau_d * shapes.uniform(0.85, 1.15);
      sc.events[static_cast<size_t>(c)].push_back(ev);
    }
  }
  return sc;
}

SeriesFrame generate_clean(const PlumeScenario& scenario) {
  scenario.validate();
  const Index n = scenario.duration_s;
  SeriesFrame frame = SeriesFrame::zeros(n);
  for (Index i = 0; i < n; ++i) {
    const double t = double(i);
    frame.env(i, 0) = scenario.env_t(t);
    frame.env(i, 1) = scenario.env_rh(t);
    frame.env(i, 2) = scenario.env_p(t);
  }
  for (Index c = 0; c < kNumChannels; ++c) {
    auto col = frame.targets.col(c);
    col.setConstant(scenario.background[static_cast<size_t>(c)]);
    for (const auto& ev : scenario.events[static_cast<size_t>(c)]) {
      // Faster flight shortens the encounter without changing the peak.
      const double speed = std::max(0.5, scenario.uav_speed(ev.peak_time_s));
      const double width_factor =
          scenario.uav_speed_ref / (0.5 * (speed + scenario.uav_speed_ref));
      const double tr = ev.tau_rise_s * width_factor;
      const double td = ev.tau_decay_s * width_factor;
      for (Index i = 0; i < n; ++i) {
        const double dt = double(i) - ev.peak_time_s;
        const double tau = (dt < 0.0) ? tr : td;
        const double arg = dt / tau;
        if (std::abs(arg) > 6.0) continue;  // below 1e-7 of the peak
        col(i) += ev.amplitude * std::exp(-0.5 * arg * arg);
      }
    }
  }
  frame.validate();
  return frame;
}

void CorruptionConfig::validate() const {
  if (noise_sigma < 0.0) throw config_error("noise_sigma must be >= 0");
  if (drift_per_hour < 0.0) throw config_error("drift_per_hour must be >= 0");
  if (missing_rate < 0.0 || missing_rate >= 1.0) {
    throw config_error("missing_rate must be in [0,1)");
  }
  if (cross.rows() != kNumChannels || cross.cols() != kNumChannels) {
    throw config_error("cross-sensitivity matrix must be " +
                       std::to_string(kNumChannels) + "x" +
                       std::to_string(kNumChannels));
  }
  for (Index c = 0; c < kNumChannels; ++c) {
    if (cross(c, c) != 1.0) {
      throw config_error("cross-sensitivity diagonal must be 1");
    }
    if (lag_t90_s[static_cast<size_t>(c)] < 0.0) {
      throw config_error("lag_t90_s must be >= 0");
    }
  }
}

CorruptionConfig CorruptionConfig::identity() {
  CorruptionConfig cfg;
  cfg.noise_sigma = 0.0;
  cfg.drift_per_hour = 0.0;
  cfg.cross = Eigen::ArrayXXd::Zero(kNumChannels, kNumChannels);
  for (Index c = 0; c < kNumChannels; ++c) cfg.cross(c, c) = 1.0;
  cfg.lag_t90_s.fill(0.0);
  cfg.stale_period.fill(0);
  cfg.missing_rate = 0.0;
  return cfg;
}

CorruptionConfig CorruptionConfig::defaults() {
  CorruptionConfig cfg = identity();
  cfg.noise_sigma = 0.05;
  cfg.drift_per_hour = 0.06;
  cfg.missing_rate = 0.01;
  // Within-family leakage between gas cells, dominated by O3 -> NO2.
  const auto [g0, g1] = family_span(Family::Gas);
  for (Index i = g0; i < g1; ++i) {
    for (Index j = g0; j < g1; ++j) {
      if (i != j) cfg.cross(i, j) = 0.05;
    }
  }
  cfg.cross(channel_index("gas_no2"), channel_index("gas_o3")) = 0.2;
  cfg.cross(channel_index("gas_no2_b"), channel_index("gas_o3_b")) = 0.2;
  for (Index c = g0; c < g1; ++c) cfg.lag_t90_s[static_cast<size_t>(c)] = 4.0;
  cfg.lag_t90_s[static_cast<size_t>(channel_index("co2_scd30"))] = 8.0;
  cfg.stale_period[static_cast<size_t>(channel_index("co2_scd30"))] = 2;
  return cfg;
}

SeriesFrame corrupt(const SeriesFrame& clean, const CorruptionConfig& cfg,
                    std::uint64_t seed) {
  clean.validate();
  cfg.validate();
  const Index n = clean.length();
  SeriesFrame out = clean;
  const auto& table = channel_table();
  RngStream root(seed);

  // 1. Cross-sensitivity mixing. Leakage coefficients act on scale-relative
  // signals, converted back into the target channel's units.
  Eigen::ArrayXXd mixed = clean.targets;
  for (Index i = 0; i < kNumChannels; ++i) {
    const double si = table[static_cast<size_t>(i)].nominal_scale;
    for (Index j = 0; j < kNumChannels; ++j) {
      if (i == j || cfg.cross(i, j) == 0.0) continue;
      const double sj = table[static_cast<size_t>(j)].nominal_scale;
      mixed.col(i) += cfg.cross(i, j) * (si / sj) * clean.targets.col(j);
    }
  }
  out.targets = mixed;

  // 2. First-order sensor lag; a = exp(-ln 10 / t90) makes the step
  // response reach 90% after t90 samples.
  for (Index c = 0; c < kNumChannels; ++c) {
    const double t90 = cfg.lag_t90_s[static_cast<size_t>(c)];
    if (t90 <= 0.0) continue;
    const double a = std::exp(-std::log(10.0) / t90);
    auto col = out.targets.col(c);
    double y = col(0);
    for (Index i = 1; i < n; ++i) {
      y = a * y + (1.0 - a) * col(i);
      col(i) = y;
    }
  }

  // 3. Baseline drift: Gaussian random walk whose RMS reaches
  // drift_per_hour * scale after one hour (3600 steps).
  if (cfg.drift_per_hour > 0.0) {
    for (Index c = 0; c < kNumChannels; ++c) {
      RngStream rng = root.fork("drift/" + table[static_cast<size_t>(c)].name);
      const double step =
          cfg.drift_per_hour * table[static_cast<size_t>(c)].nominal_scale / 60.0;
      double d = 0.0;
      for (Index i = 0; i < n; ++i) {
        d += step * rng.normal();
        out.targets(i, c) += d;
      }
    }
  }

  // 4. Additive Gaussian noise, sigma relative to the channel scale.
  if (cfg.noise_sigma > 0.0) {
    for (Index c = 0; c < kNumChannels; ++c) {
      RngStream rng = root.fork("noise/" + table[static_cast<size_t>(c)].name);
      const double s =
          cfg.noise_sigma * table[static_cast<size_t>(c)].nominal_scale;
      for (Index i = 0; i < n; ++i) out.targets(i, c) += s * rng.normal();
    }
  }

  // 5. Staleness hold: every sample not on the period grid repeats the
  // last on-grid value and is flagged.
  for (Index c = 0; c < kNumChannels; ++c) {
    const Index k = cfg.stale_period[static_cast<size_t>(c)];
    if (k < 2) continue;
    for (Index i = 0; i < n; ++i) {
      if (i % k != 0) {
        out.targets(i, c) = out.targets(i - i % k, c);
        out.stale_mask(i, c) = true;
      }
    }
  }

  // 6. Missing-value blanking.
  if (cfg.missing_rate > 0.0) {
    for (Index c = 0; c < kNumChannels; ++c) {
      RngStream rng = root.fork("missing/" + table[static_cast<size_t>(c)].name);
      for (Index i = 0; i < n; ++i) {
        if (rng.bernoulli(cfg.missing_rate)) {
          out.targets(i, c) = std::numeric_limits<double>::quiet_NaN();
          out.missing_mask(i, c) = true;
        }
      }
    }
  }
  return out;
}

}  // namespace pc2dae
