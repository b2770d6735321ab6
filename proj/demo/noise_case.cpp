// One Config I aggressor alignment: reference delay against each method's
// predicted delay. Usage: demo_noise_case [offset_ps]

#include <cstdio>
#include <cstdlib>

#include "noisy_sta/noisy_sta.hpp"

int main(int argc, char** argv) {
  const double offset = (argc > 1 ? std::atof(argv[1]) : 0.0) * 1e-12;
  auto spec = nsta::build_config_i();
  spec.offsets = {offset};
  auto out = nsta::run_sweep_full(spec, 1);
  const auto& c = out.cases.front();
  std::printf("noiseless delay %.2f ps, oracle delay at offset %.1f ps: %.2f ps\n",
              out.baseline.noiseless_delay * 1e12, offset * 1e12, c.oracle_delay * 1e12);
  for (const auto& m : c.methods) {
    if (m.ok())
      std::printf("%-6s predicted %8.2f ps  error %+7.2f ps\n", nsta::to_string(m.method),
                  m.predicted_delay * 1e12, m.error * 1e12);
    else
      std::printf("%-6s failed: %s\n", nsta::to_string(m.method), m.failure.c_str());
  }
}
