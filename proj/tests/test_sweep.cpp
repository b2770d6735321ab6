#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "noisy_sta/sweep.hpp"

using namespace nsta;

namespace {

constexpr double kPs = 1e-12;

CaseResult fake_case(double offset, std::vector<std::pair<Method, double>> errors) {
  CaseResult c;
  c.offset = offset;
  c.oracle_delay = 50 * kPs;
  for (auto [m, e] : errors) {
    MethodOutcome mo;
    mo.method = m;
    mo.error = e;
    mo.predicted_delay = c.oracle_delay + e;
    c.methods.push_back(mo);
  }
  return c;
}

std::string cases_csv(const std::vector<CaseResult>& cases) {
  std::ostringstream os;
  write_cases_csv(os, cases);
  return os.str();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace

// ---- built-in configurations ----------------------------------------------------

TEST(Configs, ConfigITotals) {
  auto s = build_config_i();
  ASSERT_EQ(s.circuit.lines.size(), 2u);
  for (const auto& l : s.circuit.lines) {
    EXPECT_EQ(l.segments, 100);
    EXPECT_NEAR(l.total_r(), 850.0, 1e-9);
    EXPECT_NEAR(l.total_c(), 480e-15, 1e-24);
  }
  ASSERT_EQ(s.circuit.couplings.size(), 1u);
  EXPECT_NEAR(s.circuit.couplings[0].total_c, 100e-15, 1e-27);
  EXPECT_EQ(s.offsets.size(), 200u);
  EXPECT_NEAR(s.offsets[1] - s.offsets[0], 1000.0 / 199 * kPs, 1e-18);
  EXPECT_EQ(s.aggressors, std::vector<std::string>{"aggr"});
  EXPECT_NO_THROW(s.validate());
}

TEST(Configs, ConfigIiTotals) {
  auto s = build_config_ii();
  ASSERT_EQ(s.circuit.lines.size(), 3u);
  for (const auto& l : s.circuit.lines) {
    EXPECT_EQ(l.segments, 50);
    EXPECT_NEAR(l.total_r(), 425.0, 1e-9);
    EXPECT_NEAR(l.total_c(), 240e-15, 1e-24);
  }
  ASSERT_EQ(s.circuit.couplings.size(), 2u);
  for (const auto& c : s.circuit.couplings) {
    EXPECT_EQ(c.line_a, "victim");
    EXPECT_NEAR(c.total_c / 50, 2e-15, 1e-27);
  }
  EXPECT_EQ(s.aggressors.size(), 2u);
}

TEST(Configs, CouplingScale) {
  auto s = scale_coupling(build_config_ii(), 0.0);
  for (const auto& c : s.circuit.couplings)
    EXPECT_EQ(c.total_c, 0.0);
}

TEST(SweepSpec, Validation) {
  auto s = build_config_i();
  s.offsets = {1.0, 1.0};
  EXPECT_THROW(s.validate(), ConfigError);
  s = build_config_i();
  s.offsets.clear();
  EXPECT_THROW(s.validate(), ConfigError);
  s = build_config_i();
  s.methods.clear();
  EXPECT_THROW(s.validate(), ConfigError);
  s = build_config_i();
  s.circuit.receiver.reset();
  EXPECT_THROW(s.validate(), ConfigError);
  s = build_config_ii();
  s.aggressor_skews = {1e-12};
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(SweepSpec, StimuliPlacement) {
  auto s = build_config_ii();
  s.aggressor_skews = {0.0, 20 * kPs};
  auto st = s.stimuli(-100 * kPs, false);
  ASSERT_EQ(st.size(), 3u);
  EXPECT_EQ(st[0].line, "victim");
  EXPECT_NEAR(st[1].start_time, s.victim_stimulus.start_time - 100 * kPs, 1e-20);
  EXPECT_NEAR(st[2].start_time, s.victim_stimulus.start_time - 80 * kPs, 1e-20);
  EXPECT_EQ(st[1].direction, opposite(s.victim_stimulus.direction));
  EXPECT_FALSE(st[1].amplitude);
  auto quiet = s.stimuli(0.0, true);
  EXPECT_EQ(quiet[1].amplitude, 0.0);
}

TEST(SweepSpec, IndependentOffsetsFormAProduct) {
  auto s = build_config_ii();
  s.offsets = {-1e-10, 0.0, 1e-10};
  EXPECT_EQ(s.case_offsets().size(), 3u);
  s.independent_offsets = true;
  auto plan = s.case_offsets();
  ASSERT_EQ(plan.size(), 9u);
  EXPECT_EQ(plan.front(), (std::vector<double>{-1e-10, -1e-10}));
  EXPECT_EQ(plan[1], (std::vector<double>{-1e-10, 0.0}));
  EXPECT_EQ(plan.back(), (std::vector<double>{1e-10, 1e-10}));

  CaseResult c = fake_case(-1e-10, {{Method::P1, 1e-12}});
  c.aggressor_offsets = plan[1];
  auto text = cases_csv({c});
  EXPECT_EQ(text.substr(0, text.find('\n')),
            "offset_s,offset_0_s,offset_1_s,oracle_delay_s,P1_predicted_delay_s,P1_error_s");
}

// ---- statistics -------------------------------------------------------------------

TEST(Stats, MaxAndMeanOfAbsoluteErrors) {
  auto s = stats({fake_case(0, {{Method::WLS5, 3 * kPs}}), fake_case(1, {{Method::WLS5, -5 * kPs}})});
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].method, Method::WLS5);
  EXPECT_NEAR(s[0].avg_abs_error, 4 * kPs, 1e-24);
  EXPECT_NEAR(s[0].max_abs_error, 5 * kPs, 1e-24);
  EXPECT_EQ(s[0].count, 2u);

  auto one = stats({fake_case(0, {{Method::SGDP, -2 * kPs}})});
  EXPECT_EQ(one[0].max_abs_error, one[0].avg_abs_error);
}

TEST(Stats, FailedFitsAreExcluded) {
  auto c = fake_case(0, {{Method::LSF3, 2 * kPs}});
  auto bad = fake_case(1, {{Method::LSF3, 99 * kPs}});
  bad.methods[0].failure = "degenerate";
  auto s = stats({c, bad});
  EXPECT_EQ(s[0].count, 1u);
  EXPECT_NEAR(s[0].max_abs_error, 2 * kPs, 1e-24);
}

TEST(Stats, InvariantUnderPermutation) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> err(0.0, 20 * kPs);
  std::vector<CaseResult> cases;
  for (int i = 0; i < 50; ++i)
    cases.push_back(fake_case(i, {{Method::P1, err(rng)}, {Method::SGDP, err(rng)}}));
  auto ref = stats(cases);
  for (int k = 0; k < 5; ++k) {
    std::shuffle(cases.begin(), cases.end(), rng);
    auto s = stats(cases);
    for (std::size_t m = 0; m < s.size(); ++m) {
      EXPECT_EQ(s[m].max_abs_error, ref[m].max_abs_error);
      EXPECT_NEAR(s[m].avg_abs_error, ref[m].avg_abs_error, 1e-24);
    }
  }
}

// ---- reporting --------------------------------------------------------------------

TEST(Report, RendersTwoConfigurationColumns) {
  const std::vector<std::tuple<Method, double, double, double, double>> rows{
      {Method::P1, 81.3, 29.3, 134.2, 48.5},  {Method::P2, 82.7, 24.5, 144.5, 51.3},
      {Method::LSF3, 75.1, 30.9, 110.8, 45.4}, {Method::E4, 82.3, 14.5, 145.3, 33.4},
      {Method::WLS5, 42.4, 10.3, 49.3, 17.4}, {Method::SGDP, 38.3, 9.2, 44.5, 14.8}};
  ReportColumn a{"Config I", {}}, b{"Config II", {}};
  for (auto [m, m1, a1, m2, a2] : rows) {
    a.stats.push_back({m, m1 * kPs, a1 * kPs, 200});
    b.stats.push_back({m, m2 * kPs, a2 * kPs, 200});
  }
  auto text = emit_report({a, b}, ReportFormat::Plain);
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "Delay Error (ps)");
  std::getline(is, line);
  EXPECT_EQ(line, "Method Config I:Max Config I:Avg Config II:Max Config II:Avg");
  std::vector<std::string> body;
  while (std::getline(is, line))
    body.push_back(line);
  ASSERT_EQ(body.size(), 6u);
  EXPECT_EQ(body[4], "WLS5 42.4 10.3 49.3 17.4");
  EXPECT_EQ(body[5], "SGDP 38.3 9.2 44.5 14.8");
  EXPECT_EQ(body[0], "P1 81.3 29.3 134.2 48.5");

  auto md = emit_report({a, b}, ReportFormat::Markdown);
  EXPECT_NE(md.find("| SGDP | 38.3 | 9.2 | 44.5 | 14.8 |"), std::string::npos);
}

TEST(Report, MissingMethodsRenderAsDashes) {
  ReportColumn a{"A", {{Method::P1, 1 * kPs, 0.5 * kPs, 1}}};
  ReportColumn b{"B", {{Method::SGDP, 2 * kPs, 1 * kPs, 1}}};
  auto text = emit_report({a, b}, ReportFormat::Plain);
  EXPECT_NE(text.find("P1 1.0 0.5 - -\n"), std::string::npos);
  EXPECT_NE(text.find("SGDP - - 2.0 1.0\n"), std::string::npos);
}

// ---- sweeps -----------------------------------------------------------------------

TEST(Sweep, OracleDoesNotDependOnMethodSet) {
  auto spec = build_config_i();
  spec.offsets = {-100 * kPs};
  Circuit ckt(detail::sweep_circuit(spec));
  auto base = sweep_baseline(spec, ckt);
  auto all = run_case(spec, ckt, base, -100 * kPs);
  spec.methods = {Method::SGDP};
  auto one = run_case(spec, ckt, base, -100 * kPs);
  EXPECT_EQ(all.oracle_delay, one.oracle_delay);
  ASSERT_EQ(one.methods.size(), 1u);
  EXPECT_EQ(all.methods.back().predicted_delay, one.methods[0].predicted_delay);
}

TEST(Sweep, BaselineIsTheQuietTransition) {
  auto spec = build_config_i();
  Circuit ckt(detail::sweep_circuit(spec));
  auto base = sweep_baseline(spec, ckt);
  // the quiet victim does not depend on where the silent aggressor sits
  auto other = ckt.simulate(spec.stimuli(spec.offsets.back(), true)).at("victim.far");
  EXPECT_EQ(other, base.noiseless_input);
  EXPECT_GT(base.noiseless_delay, 0.0);
  EXPECT_NEAR(base.ch.input_slew, slew_10_90(base.noiseless_input), 1e-18);
  EXPECT_EQ(base.calibration.size(), kAllMethods.size());
}

TEST(Sweep, SerialAndParallelAgree) {
  auto spec = build_config_i();
  spec.offsets = uniform_offsets(-200 * kPs, 300 * kPs, 4);
  EXPECT_EQ(cases_csv(run_sweep(spec, 1)), cases_csv(run_sweep(spec, 3)));
}

TEST(Sweep, ThreadCountFromEnvironment) {
  ::setenv("NOISY_STA_THREADS", "3", 1);
  EXPECT_EQ(sweep_threads(), 3u);
  ::setenv("NOISY_STA_THREADS", "0", 1);
  EXPECT_GE(sweep_threads(), 1u);
  ::unsetenv("NOISY_STA_THREADS");
}

TEST(Sweep, GoldenConfigIFixture) {
  auto spec = build_config_i();
  spec.offsets = uniform_offsets(kDefaultOffsetStart, kDefaultOffsetWindow, 10);
  const auto golden = slurp(std::string(NOISY_STA_FIXTURES) + "/golden_config_i_10.csv");
  ASSERT_FALSE(golden.empty());
  EXPECT_EQ(cases_csv(run_sweep(spec, 1)), golden);
}

TEST(Sweep, ZeroCouplingLeavesOracleConstant) {
  auto spec = scale_coupling(build_config_i(), 0.0);
  spec.offsets = {-300 * kPs, 0.0, 200 * kPs};
  spec.methods = {Method::LSF3};
  auto cases = run_sweep(spec, 1);
  EXPECT_EQ(cases[0].oracle_delay, cases[1].oracle_delay);
  EXPECT_EQ(cases[1].oracle_delay, cases[2].oracle_delay);
}

// ---- chains -----------------------------------------------------------------------

TEST(Chain, UnitBuffersPassTheRampThrough) {
  CharacterizationOptions o;
  o.dt = 0.5 * kPs;
  auto ch = characterize_noiseless(LinearGate{}, 150 * kPs, 0.0, o);
  auto in = saturated_ramp(1.2, 150 * kPs, 200 * kPs, 0.0, 1e-9, 0.1 * kPs);
  auto r = propagate_chain({LinearGate{}, LinearGate{}}, {ch, ch}, in, Method::SGDP);
  ASSERT_EQ(r.fits.size(), 2u);
  EXPECT_NEAR(r.final_arrival, arrival_time(in), 1e-16);
}

TEST(Chain, TwoInvertersTrackDirectSimulation) {
  InverterModel first, second, both;
  first.c_load = 0.0;     // its only load is the next stage's input cap
  both.stages = 2;
  auto in = saturated_ramp(1.2, 150 * kPs, 200 * kPs, 0.0, 2e-9, 0.1 * kPs);
  auto direct = gate_output(both, in);

  auto ch1 = characterize_noiseless(first, 150 * kPs, first.c_load);
  auto mid = gate_output(first, in);
  auto ch2 = characterize_noiseless(second, slew_10_90(mid), second.c_load);
  auto r = propagate_chain({first, second}, {ch1, ch2}, in, Method::SGDP);
  EXPECT_NEAR(arrival_time(r.outputs[0]), arrival_time(mid), 0.5 * kPs);
  // stage two sees the fitted ramp of stage one, not its exact output
  EXPECT_NEAR(r.final_arrival, arrival_time(direct), 3 * kPs);
}

TEST(Chain, ErrorsNameTheStage) {
  CharacterizationOptions o;
  o.dt = 0.5 * kPs;
  auto ch = characterize_noiseless(LinearGate{}, 150 * kPs, 0.0, o);
  LinearGate flat;
  flat.gain = 0.0;
  flat.offset = 0.3;
  auto in = saturated_ramp(1.2, 150 * kPs, 200 * kPs, 0.0, 1e-9, 0.1 * kPs);
  try {
    propagate_chain({LinearGate{}, flat, LinearGate{}}, {ch, ch, ch}, in, Method::LSF3);
    FAIL() << "expected a stage error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("chain stage 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(propagate_chain({}, {}, in, Method::LSF3), ConfigError);
}
