#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "noisy_sta/fitters.hpp"

using namespace nsta;

namespace {

constexpr double kVdd = 1.2;
constexpr double kPs = 1e-12;
constexpr double kNs = 1e-9;

SampledWaveform ramp(double slew, double start = 200 * kPs, double end = 1 * kNs) {
  return saturated_ramp(kVdd, slew, start, 0.0, end, 0.1 * kPs);
}

/// Ramp with a Gaussian dip of the given depth centred at t_c.
SampledWaveform dipped(double slew, double depth, double t_c, double width) {
  auto r = ramp(slew);
  std::vector<double> t(r.times().begin(), r.times().end()), v(r.volts().begin(), r.volts().end());
  for (std::size_t i = 0; i < t.size(); ++i)
    v[i] -= depth * std::exp(-0.5 * std::pow((t[i] - t_c) / width, 2));
  return SampledWaveform(std::move(t), std::move(v), kVdd, Direction::Rising);
}

const NoiselessCharacterization& inverter_ch() {
  static const auto ch = characterize_noiseless(InverterModel{}, 150 * kPs, 30e-15);
  return ch;
}

const NoiselessCharacterization& buffer_ch(double slew = 150 * kPs) {
  static std::map<double, NoiselessCharacterization> cache;
  auto it = cache.find(slew);
  if (it == cache.end()) {
    CharacterizationOptions o;
    o.dt = 0.5 * kPs;
    it = cache.emplace(slew, characterize_noiseless(LinearGate{}, slew, 0.0, o)).first;
  }
  return it->second;
}

/// Piecewise record with three 0.6 V crossings (ns / V).
SampledWaveform three_crossings() {
  return SampledWaveform({0.0, 0.4 * kNs, 0.6 * kNs, 1.0 * kNs}, {0.0, 0.8, 0.5, 1.2}, kVdd,
                         Direction::Rising);
}

} // namespace

// ---- point based ----------------------------------------------------------------

TEST(P1, AnchorsOnLastCrossingWithNoiselessSlew) {
  NoiselessReference ref;
  ref.input = saturated_ramp(kVdd, 0.8 * kNs, 0.0, 0.0, 1.2 * kNs, 1 * kPs);
  auto r = fit_p1(three_crossings(), buffer_ch(), ref);
  EXPECT_NEAR(r.gamma.a(), 1.2e9, 1e-3);
  EXPECT_NEAR(r.gamma.b(), -0.18857142857142858, 1e-12);
  EXPECT_NEAR(r.gamma.arrival_time(), 0.6571428571428571 * kNs, 1e-18);
}

TEST(P1, DefaultsToCharacterizationSlew) {
  auto r = fit_p1(three_crossings(), buffer_ch(150 * kPs));
  EXPECT_NEAR(r.gamma.slew_10_90(), 150 * kPs, 1e-16);
}

TEST(P2, UsesNoisyTenNinetySpan) {
  auto r = fit_p2(three_crossings());
  EXPECT_NEAR(r.gamma.slew_10_90(), 0.8714285714285714 * kNs, 1e-18);
  EXPECT_NEAR(r.gamma.arrival_time(), 0.6571428571428571 * kNs, 1e-18);
  EXPECT_NEAR(r.diagnostics.window_start, 0.06 * kNs, 1e-18);
  EXPECT_NEAR(r.diagnostics.window_end, 0.9314285714285714 * kNs, 1e-18);
}

TEST(E4, StaircaseArea) {
  SampledWaveform st({0.0, 1 * kNs, 2 * kNs, 2.1 * kNs, 3 * kNs, 3.1 * kNs, 4 * kNs},
                     {0.0, 0.6, 0.6, 0.9, 0.9, 1.2, 1.2}, kVdd, Direction::Rising);
  EXPECT_NEAR(upper_band_area(st, 1.0 * kNs), 0.93 * kNs, 1e-20);
  auto r = fit_e4(st);
  EXPECT_NEAR(r.gamma.a(), 193548387.0967742, 1e-3);
  EXPECT_NEAR(r.gamma.arrival_time(), 1.0 * kNs, 1e-18);
}

TEST(E4, RecordEndingAtTheAnchorIsRejected) {
  SampledWaveform cut({0.0, 0.5 * kNs}, {0.0, 0.6}, kVdd, Direction::Rising);
  EXPECT_THROW(fit_e4(cut), NotATransition);
}

TEST(E4, OvershootDoesNotAddArea) {
  SampledWaveform a({0.0, 1 * kNs, 2 * kNs}, {0.0, 1.2, 1.2}, kVdd);
  SampledWaveform b({0.0, 1 * kNs, 2 * kNs}, {0.0, 1.2, 1.5}, kVdd);
  EXPECT_EQ(upper_band_area(a, 0.5 * kNs), upper_band_area(b, 0.5 * kNs));
}

// ---- least squares --------------------------------------------------------------

TEST(LSF3, RecoversAnExactLine) {
  LinearWaveform line(3.1e9, -0.9, kVdd);
  auto t = uniform_times(0.0, 1.5 * kNs, 1501);
  auto r = fit_lsf3(sample_clipped(line, t));
  EXPECT_NEAR(r.gamma.a() / line.a(), 1.0, 1e-9);
  EXPECT_NEAR(r.gamma.arrival_time(), line.arrival_time(), 1e-18);
  EXPECT_LT(r.diagnostics.objective, 1e-20);
}

TEST(WeightedLs, ConstantWeightsMatchPlainLs) {
  auto t = uniform_times(-1.0, 1.0, 35);
  std::vector<double> v(35), w(35, 0.37);
  for (std::size_t k = 0; k < 35; ++k)
    v[k] = 0.6 + 0.5 * t[k] + 0.05 * std::sin(7 * t[k]);
  auto plain = detail::weighted_ls(t, v, {});
  auto weighted = detail::weighted_ls(t, v, w);
  ASSERT_TRUE(plain && weighted);
  EXPECT_NEAR((*plain)[0], (*weighted)[0], 1e-14);
  EXPECT_NEAR((*plain)[1], (*weighted)[1], 1e-14);
  std::vector<double> zero(35, 0.0);
  EXPECT_FALSE(detail::weighted_ls(t, v, zero));
}

TEST(WLS5, UnitBufferOnMatchingRegionEqualsLsf3) {
  // the bump stays inside the band, so noisy and noiseless regions coincide
  auto noisy = dipped(150 * kPs, 0.05, 200 * kPs + 93.75 * kPs, 20 * kPs);
  auto lsf = fit_lsf3(noisy);
  auto wls = fit_wls5(noisy, buffer_ch());
  EXPECT_NEAR(wls.diagnostics.window_start, lsf.diagnostics.window_start, 1e-16);
  EXPECT_NEAR(wls.diagnostics.window_end, lsf.diagnostics.window_end, 1e-16);
  // weights are one except where the region edges fall between grid points
  EXPECT_NEAR(wls.gamma.arrival_time(), lsf.gamma.arrival_time(), 0.1 * kPs);
  EXPECT_NEAR(wls.gamma.a() / lsf.gamma.a(), 1.0, 1e-3);
}

TEST(WLS5, BlindToNoiseAfterTheNoiselessRegion) {
  const double start = 100 * kPs, slew = 150 * kPs;
  const double t_last = start + 0.9 * slew / 0.8;
  auto clean = saturated_ramp(kVdd, slew, start, 0.0, 800 * kPs, 0.1 * kPs);
  std::vector<double> t(clean.times().begin(), clean.times().end());
  std::vector<double> v(clean.volts().begin(), clean.volts().end());
  const double b0 = t_last + 10 * kPs, b1 = t_last + 110 * kPs;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i] > b0 && t[i] < b1)
      v[i] -= 0.175 * (1 - std::cos(2 * M_PI * (t[i] - b0) / (b1 - b0)));
  SampledWaveform bump(t, v, kVdd, Direction::Rising);

  const auto& ch = inverter_ch();
  auto w_clean = fit_wls5(clean, ch);
  auto w_bump = fit_wls5(bump, ch);
  EXPECT_EQ(w_clean.gamma, w_bump.gamma);
  auto s_clean = fit_sgdp(clean, ch);
  auto s_bump = fit_sgdp(bump, ch);
  EXPECT_GT(std::abs(s_bump.gamma.arrival_time() - s_clean.gamma.arrival_time()), 1 * kPs);
}

// ---- SGDP -----------------------------------------------------------------------

TEST(SGDP, CleanRampIsAFixedPoint) {
  auto clean = ramp(150 * kPs);
  for (const auto* ch : {&inverter_ch(), &buffer_ch()}) {
    auto r = fit_sgdp(clean, *ch);
    EXPECT_NEAR(r.gamma.arrival_time(), arrival_time(clean), 1e-16);
    EXPECT_NEAR(r.gamma.slew_10_90(), 150 * kPs, 1e-16);
    EXPECT_FALSE(r.diagnostics.fallback);
  }
}

TEST(SGDP, LiteralObjectiveWithoutCurvatureFallsBack) {
  FitSettings s;
  s.sgdp_objective = SgdpObjective::Literal;
  auto clean = ramp(150 * kPs);
  auto r = fit_sgdp(clean, buffer_ch(), s);
  EXPECT_TRUE(r.diagnostics.fallback);
  EXPECT_NEAR(r.gamma.arrival_time(), arrival_time(clean), 1e-16);
}

TEST(SGDP, LiteralObjectiveIsStationaryOrFlagged) {
  FitSettings s;
  s.sgdp_objective = SgdpObjective::Literal;
  const auto& ch = inverter_ch();
  int stationary = 0;
  for (double depth : {0.0, 0.05, 0.15, 0.3}) {
    auto noisy = dipped(150 * kPs, depth, 330 * kPs, 25 * kPs);
    auto r = fit_sgdp(noisy, ch, s);
    if (r.diagnostics.fallback) {
      EXPECT_FALSE(r.diagnostics.note.empty());
      EXPECT_GT(r.gamma.a(), 0.0);
      continue;
    }
    ++stationary;
    auto p = make_sgdp_problem(noisy, ch, s);
    auto x = p.to_params(r.gamma);
    // partial derivatives of the literal sum vanish
    double ga = 0, gb = 0, scale = 0;
    for (std::size_t k = 0; k < p.s.t.size(); ++k) {
      double e = p.s.v[k] - x[0] * p.s.tau[k] - x[1];
      double g = p.rho[k] + p.drho[k] * e;
      ga -= g * p.s.tau[k];
      gb -= g;
      scale += std::abs(p.rho[k]);
    }
    EXPECT_NEAR(ga, 0.0, 1e-9 * scale) << depth;
    EXPECT_NEAR(gb, 0.0, 1e-9 * scale) << depth;
  }
  EXPECT_GE(stationary, 1);
}

TEST(SGDP, SquaredObjectiveGradientVanishes) {
  const auto& ch = inverter_ch();
  for (double depth : {0.1, 0.2, 0.3}) {
    auto noisy = dipped(150 * kPs, depth, 300 * kPs, 30 * kPs);
    auto r = fit_sgdp(noisy, ch);
    auto p = make_sgdp_problem(noisy, ch, {});
    auto seed = detail::sgdp_seed(p);
    ASSERT_TRUE(seed);
    auto x = p.to_params(r.gamma);
    auto g = p.gradient(x[0], x[1]);
    auto g0 = p.gradient((*seed)[0], (*seed)[1]);
    EXPECT_LE(std::hypot(g[0], g[1]), 1e-6 * std::max(std::hypot(g0[0], g0[1]), 1e-300));
    EXPECT_LE(p.squared(x[0], x[1]), p.squared((*seed)[0], (*seed)[1]));
  }
}

TEST(SGDP, GradientMatchesFiniteDifferences) {
  auto noisy = dipped(150 * kPs, 0.2, 300 * kPs, 30 * kPs);
  auto p = make_sgdp_problem(noisy, inverter_ch(), {});
  const double a = 0.55, b = 0.62, h = 1e-6;
  auto g = p.gradient(a, b);
  EXPECT_NEAR(g[0], (p.squared(a + h, b) - p.squared(a - h, b)) / (2 * h), 1e-6);
  EXPECT_NEAR(g[1], (p.squared(a, b + h) - p.squared(a, b - h)) / (2 * h), 1e-6);
}

TEST(RhoEff, StretchedRampIsIndexedByVoltage) {
  const auto& ch = inverter_ch();
  auto slow = ramp(300 * kPs);
  auto prof = rho_eff_map(slow, ch);
  ASSERT_EQ(prof.size(), 35u);
  bool differs_from_time_table = false;
  const double offset = characterization_offset(slow, ch, {});
  for (std::size_t k = 0; k < prof.size(); ++k) {
    EXPECT_EQ(prof.rho[k], rho_at_voltage(ch, interpolate(slow, prof.t[k])).first);
    if (std::abs(prof.rho[k] - ch.rho_t.at(prof.t[k] - offset)) > 0.05)
      differs_from_time_table = true;
  }
  EXPECT_TRUE(differs_from_time_table);
}

TEST(FirstOrderPrediction, CleanInputReproducesReferenceOutput) {
  const auto& ch = inverter_ch();
  const double start = 200 * kPs;
  auto clean = ramp(150 * kPs, start, 1.2 * kNs);
  auto r = fit_sgdp(clean, ch);
  auto pred = predict_output_first_order(ch, r.gamma, clean);
  const double offset = characterization_offset(clean, ch, {});
  for (std::size_t k = 0; k < pred.size(); ++k)
    EXPECT_NEAR(pred.volt(k), interpolate(ch.v_out_ref, pred.time(k) - offset), 1e-9);
}

// ---- all methods ----------------------------------------------------------------

TEST(AllMethods, CleanRampIsPreserved) {
  const auto& ch = inverter_ch();
  auto clean = ramp(150 * kPs);
  NoiselessReference ref;
  ref.arrival = arrival_time(clean);
  for (Method m : kAllMethods) {
    auto r = fit(m, clean, ch, {}, ref);
    EXPECT_EQ(r.method, m);
    EXPECT_NEAR(r.gamma.arrival_time(), arrival_time(clean), 1e-3 * kPs) << to_string(m);
    EXPECT_NEAR(r.gamma.slew_10_90() / (150 * kPs), 1.0, 1e-6) << to_string(m);
  }
}

TEST(AllMethods, ShiftEquivariance) {
  const auto& ch = inverter_ch();
  auto noisy = dipped(150 * kPs, 0.2, 310 * kPs, 25 * kPs);
  const double dt = 37 * kPs;
  auto later = time_shifted(noisy, dt);
  for (Method m : kAllMethods) {
    auto a = fit(m, noisy, ch);
    auto b = fit(m, later, ch);
    EXPECT_NEAR(b.gamma.arrival_time() - a.gamma.arrival_time(), dt, 1e-3 * kPs)
        << to_string(m);
    EXPECT_NEAR(b.gamma.a() / a.gamma.a(), 1.0, 1e-6) << to_string(m);
  }
}

TEST(AllMethods, FallingRecordsAreMirrored) {
  const auto& ch = inverter_ch();
  auto rising = dipped(150 * kPs, 0.2, 310 * kPs, 25 * kPs);
  auto falling = mirror_falling(rising);
  for (Method m : kAllMethods) {
    auto up = fit(m, rising, ch);
    auto down = fit(m, falling, ch);
    EXPECT_LT(down.gamma.a(), 0.0);
    EXPECT_DOUBLE_EQ(down.gamma.a(), -up.gamma.a()) << to_string(m);
    EXPECT_NEAR(down.gamma.arrival_time(), up.gamma.arrival_time(), 1e-18) << to_string(m);
  }
}

TEST(AllMethods, RejectInvalidInput) {
  const auto& ch = inverter_ch();
  auto flat = SampledWaveform({0.0, 1 * kNs}, {0.3, 0.3}, kVdd, Direction::Rising);
  for (Method m : kAllMethods)
    EXPECT_THROW(fit(m, flat, ch), Error) << to_string(m);
  EXPECT_THROW(fit_lsf3(mirror_falling(ramp(150 * kPs))), InvalidWaveform);
  FitSettings few;
  few.samples = 2;
  EXPECT_THROW(fit(Method::LSF3, ramp(150 * kPs), ch, few), ConfigError);
}

TEST(Methods, NamesRoundTrip) {
  for (Method m : kAllMethods)
    EXPECT_EQ(parse_method(to_string(m)), m);
  EXPECT_EQ(parse_method("sgdp"), Method::SGDP);
  EXPECT_EQ(parse_method("Wls5"), Method::WLS5);
  EXPECT_FALSE(parse_method("P7"));
}
