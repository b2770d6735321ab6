// Fits all six equivalent lines to a 150 ps ramp with a synthetic crosstalk
// dip, using the default receiver characterization.

#include <cmath>
#include <cstdio>

#include "noisy_sta/noisy_sta.hpp"

int main() {
  const double vdd = 1.2, slew = 150e-12;
  auto ch = nsta::characterize_noiseless(nsta::InverterModel{}, slew, 30e-15);

  auto clean = nsta::saturated_ramp(vdd, slew, 100e-12, 0.0, 600e-12, 0.5e-12);
  std::vector<double> t(clean.times().begin(), clean.times().end());
  std::vector<double> v(clean.volts().begin(), clean.volts().end());
  for (std::size_t i = 0; i < t.size(); ++i) {
    double x = (t[i] - 240e-12) / 25e-12;
    v[i] -= 0.35 * std::exp(-x * x); // opposing aggressor after the midpoint
  }
  nsta::SampledWaveform noisy(t, v, vdd, nsta::Direction::Rising);

  std::printf("noisy arrival %.2f ps, slew %.2f ps\n", nsta::arrival_time(noisy) * 1e12,
              nsta::slew_10_90(noisy) * 1e12);
  std::printf("%-6s %12s %12s\n", "method", "arrival_ps", "slew_ps");
  for (nsta::Method m : nsta::kAllMethods) {
    auto r = nsta::fit(m, noisy, ch);
    std::printf("%-6s %12.2f %12.2f\n", nsta::to_string(m), r.gamma.arrival_time() * 1e12,
                r.gamma.slew_10_90() * 1e12);
  }
}
