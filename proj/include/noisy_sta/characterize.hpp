#ifndef NOISY_STA_CHARACTERIZE_HPP
#define NOISY_STA_CHARACTERIZE_HPP

// Noiseless characterization of a receiver gate: reference input ramp and
// output, the output/input sensitivity rho (time- and voltage-indexed), the
// noiseless critical region, and the input-to-output shift delta.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

#include "noisy_sta/circuit.hpp"
#include "noisy_sta/errors.hpp"
#include "noisy_sta/waveform.hpp"

namespace nsta {

/// Time-indexed sensitivity samples.
struct SensitivityProfile {
  std::vector<double> t;
  std::vector<double> rho;
  std::vector<double> drho_dv; // empty when not tracked

  std::size_t size() const { return t.size(); }

  /// Linear interpolation; zero outside the sampled span.
  double at(double time) const {
    if (t.empty() || time < t.front() || time > t.back())
      return 0.0;
    auto it = std::lower_bound(t.begin(), t.end(), time);
    auto hi = static_cast<std::size_t>(it - t.begin());
    if (t[hi] == time)
      return rho[hi];
    auto lo = hi - 1;
    double f = (time - t[lo]) / (t[hi] - t[lo]);
    return rho[lo] + f * (rho[hi] - rho[lo]);
  }
};

struct CharacterizationOptions {
  double dt = 0.1e-12;
  std::size_t grid_points = 256;
  std::size_t smoothing_window = 5; // odd, >= 3
  double lead_time = 50e-12;
  double settle_time = 1e-9;
};

struct NoiselessCharacterization {
  double vdd = 1.2;
  double input_slew = 0.0;
  double load = 0.0;
  bool inverting = true;       // output polarity relative to the input
  SampledWaveform v_in_ref;    // rising noiseless ramp
  SampledWaveform v_out_ref;   // gate response, natural polarity
  SensitivityProfile rho_t;    // |dv_out/dv_in|, zero outside region
  std::vector<double> rho_v;   // uniform grid over [0.1, 0.9] * vdd
  std::vector<double> drho_dv;
  CriticalRegion region;
  double delta = 0.0;
  bool overlap = true;

  double grid_lo() const { return 0.1 * vdd; }
  double grid_hi() const { return 0.9 * vdd; }
  double grid_step() const {
    return (grid_hi() - grid_lo()) / static_cast<double>(rho_v.size() - 1);
  }
};

namespace detail {

/// Least-squares (Savitzky-Golay, linear) first derivative with a centred
/// window, shrunk near the record edges.
inline std::vector<double> smoothed_derivative(const SampledWaveform& wf, std::size_t window) {
  const std::size_t n = wf.size();
  const auto half = static_cast<std::ptrdiff_t>(std::max<std::size_t>(window, 3) / 2);
  std::vector<double> d(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto ii = static_cast<std::ptrdiff_t>(i);
    std::ptrdiff_t m = std::min({half, ii, static_cast<std::ptrdiff_t>(n) - 1 - ii});
    if (m == 0) {
      std::size_t a = i == 0 ? 0 : i - 1;
      std::size_t b = i == 0 ? 1 : i;
      d[i] = (wf.volt(b) - wf.volt(a)) / (wf.time(b) - wf.time(a));
      continue;
    }
    double num = 0, den = 0;
    for (std::ptrdiff_t k = -m; k <= m; ++k) {
      auto j = static_cast<std::size_t>(ii + k);
      double dt = wf.time(j) - wf.time(i);
      num += dt * wf.volt(j);
      den += dt * dt;
    }
    d[i] = num / den;
  }
  return d;
}

inline double interp_series(std::span<const double> t, std::span<const double> y, double x) {
  if (x < t.front() || x > t.back())
    return 0.0;
  auto it = std::lower_bound(t.begin(), t.end(), x);
  auto hi = static_cast<std::size_t>(it - t.begin());
  if (t[hi] == x)
    return y[hi];
  auto lo = hi - 1;
  double f = (x - t[lo]) / (t[hi] - t[lo]);
  return y[lo] + f * (y[hi] - y[lo]);
}

} // namespace detail

/// Builds the voltage-indexed tables, region, delta and overlap from a
/// reference input/output pair. `v_in_ref` must be a rising transition.
inline NoiselessCharacterization characterize_from_waveforms(
    SampledWaveform v_in_ref, SampledWaveform v_out_ref, double input_slew, double load,
    bool inverting, const CharacterizationOptions& opt = {}) {
  const double vdd = v_in_ref.vdd();
  if (v_in_ref.direction() != Direction::Rising)
    throw CharacterizationError("reference input must be rising");
  if (opt.grid_points < 64)
    throw CharacterizationError("voltage grid needs at least 64 points");
  if (!last_crossing(v_out_ref, 0.5 * vdd))
    throw CharacterizationError("gate output never transitions");

  const CriticalRegion region = critical_region(v_in_ref, CriticalRegion::Kind::Noiseless);
  const double delta = arrival_time(v_out_ref) - arrival_time(v_in_ref);
  const bool overlap = region.contains(arrival_time(v_out_ref));
  // Non-overlapping pairs are aligned by moving the output back by delta.
  const double shift = overlap ? 0.0 : delta;

  const auto din = detail::smoothed_derivative(v_in_ref, opt.smoothing_window);
  const auto dout = detail::smoothed_derivative(v_out_ref, opt.smoothing_window);
  double peak_din = 0;
  for (double x : din)
    peak_din = std::max(peak_din, x);
  const double din_floor = 1e-3 * peak_din;

  auto raw_rho = [&](double t) {
    double di = detail::interp_series(v_in_ref.times(), din, t);
    if (!(di > din_floor))
      return 0.0;
    double dout_t = detail::interp_series(v_out_ref.times(), dout, t + shift);
    return std::abs(dout_t) / di;
  };

  SensitivityProfile rho_t;
  rho_t.t.assign(v_in_ref.times().begin(), v_in_ref.times().end());
  rho_t.rho.resize(rho_t.t.size());
  for (std::size_t i = 0; i < rho_t.t.size(); ++i)
    rho_t.rho[i] = region.contains(rho_t.t[i]) ? raw_rho(rho_t.t[i]) : 0.0;

  const std::size_t g = opt.grid_points;
  std::vector<double> rho_v(g), drho(g);
  const double lo = 0.1 * vdd, hi = 0.9 * vdd;
  const double step = (hi - lo) / static_cast<double>(g - 1);
  for (std::size_t j = 0; j < g; ++j) {
    double level = j + 1 == g ? hi : lo + step * static_cast<double>(j);
    double t = require_first_crossing(v_in_ref, level);
    rho_v[j] = raw_rho(t);
  }
  for (std::size_t j = 0; j < g; ++j) {
    if (j == 0)
      drho[j] = (rho_v[1] - rho_v[0]) / step;
    else if (j + 1 == g)
      drho[j] = (rho_v[g - 1] - rho_v[g - 2]) / step;
    else
      drho[j] = (rho_v[j + 1] - rho_v[j - 1]) / (2.0 * step);
  }

  NoiselessCharacterization ch{vdd,
                               input_slew,
                               load,
                               inverting,
                               std::move(v_in_ref),
                               std::move(v_out_ref),
                               std::move(rho_t),
                               std::move(rho_v),
                               std::move(drho),
                               region,
                               delta,
                               overlap};
  return ch;
}

/// Simulates the gate with a clean saturated rising ramp of the given 10-90
/// slew and output load, then tabulates its sensitivity.
inline NoiselessCharacterization characterize_noiseless(const GateModel& gate, double input_slew,
                                                        double load,
                                                        const CharacterizationOptions& opt = {}) {
  if (!(input_slew > 0))
    throw CharacterizationError("input slew must be positive");
  GateModel g = gate;
  if (auto* inv = std::get_if<InverterModel>(&g))
    inv->c_load = load;
  const double vdd = gate_vdd(g);
  const double ramp_end = opt.lead_time + input_slew / 0.8;
  double settle = opt.settle_time;
  for (int attempt = 0; attempt < 6; ++attempt, settle *= 2) {
    auto v_in = saturated_ramp(vdd, input_slew, opt.lead_time, 0.0, ramp_end + settle, opt.dt);
    auto v_out = gate_output(g, v_in);
    const double tail = v_out.volts().back();
    const double rail = gate_inverts(g) ? 0.0 : vdd;
    bool settled = std::abs(tail - rail) < 0.01 * vdd;
    if (std::holds_alternative<LinearGate>(g))
      settled = true;
    if (!settled)
      continue;
    return characterize_from_waveforms(std::move(v_in), std::move(v_out), input_slew, load,
                                       gate_inverts(g), opt);
  }
  throw CharacterizationError("gate output never settles to a rail");
}

/// (rho, d rho / d v_in) at an input voltage, zero outside [0.1, 0.9] * vdd.
inline std::pair<double, double> rho_at_voltage(const NoiselessCharacterization& ch, double v) {
  const double lo = ch.grid_lo(), hi = ch.grid_hi();
  if (!(v >= lo && v <= hi))
    return {0.0, 0.0};
  const double step = ch.grid_step();
  const std::size_t last = ch.rho_v.size() - 1;
  double x = (v - lo) / step;
  auto j = static_cast<std::size_t>(std::floor(x));
  if (j >= last)
    return {ch.rho_v[last], ch.drho_dv[last]};
  double f = x - static_cast<double>(j);
  if (f == 0.0)
    return {ch.rho_v[j], ch.drho_dv[j]};
  return {ch.rho_v[j] + f * (ch.rho_v[j + 1] - ch.rho_v[j]),
          ch.drho_dv[j] + f * (ch.drho_dv[j + 1] - ch.drho_dv[j])};
}

/// True when the output 0.5*vdd crossing falls inside the input's noiseless
/// critical region.
inline bool overlap_test(const NoiselessCharacterization& ch) {
  return ch.region.contains(arrival_time(ch.v_out_ref));
}

/// Thread-safe memo of characterizations keyed by (gate, slew, load).
class CharacterizationCache {
public:
  explicit CharacterizationCache(CharacterizationOptions opt = {}) : opt_(opt) {}

  const NoiselessCharacterization& get(const GateModel& gate, double slew, double load) {
    std::string key = make_key(gate, slew, load);
    {
      std::lock_guard lock(mu_);
      if (auto it = cache_.find(key); it != cache_.end())
        return it->second;
    }
    auto ch = characterize_noiseless(gate, slew, load, opt_);
    std::lock_guard lock(mu_);
    return cache_.try_emplace(key, std::move(ch)).first->second;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return cache_.size();
  }

private:
  static std::string make_key(const GateModel& gate, double slew, double load) {
    std::ostringstream os;
    os.precision(17);
    if (const auto* m = std::get_if<InverterModel>(&gate))
      os << "inv " << m->vdd << ' ' << m->vth_n << ' ' << m->vth_p << ' ' << m->alpha << ' '
         << m->i_on_n << ' ' << m->i_on_p << ' ' << m->drive_strength << ' ' << m->stages << ' '
         << m->c_out_per_stage << ' ' << m->vdsat_full;
    else {
      const auto& l = std::get<LinearGate>(gate);
      os << "lin " << l.vdd << ' ' << l.gain << ' ' << l.offset << ' ' << l.delay;
    }
    os << " | " << slew << ' ' << load;
    return os.str();
  }

  CharacterizationOptions opt_;
  mutable std::mutex mu_;
  std::map<std::string, NoiselessCharacterization> cache_;
};

} // namespace nsta

#endif // NOISY_STA_CHARACTERIZE_HPP
