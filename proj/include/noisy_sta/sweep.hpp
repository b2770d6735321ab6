#ifndef NOISY_STA_SWEEP_HPP
#define NOISY_STA_SWEEP_HPP

// Aggressor-alignment sweeps: per case, the reference simulator produces the
// noisy receiver input and the true output; every method fits an equivalent
// line, the receiver is re-simulated with that line as input, and the
// resulting delay is compared against the true one.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "noisy_sta/characterize.hpp"
#include "noisy_sta/circuit.hpp"
#include "noisy_sta/fitters.hpp"
#include "noisy_sta/waveform.hpp"

namespace nsta {

/// How predicted delays are referenced before comparing with the oracle.
enum class ErrorReference {
  /// Predicted output crossing straight from the re-simulated line.
  Absolute,
  /// Each method's prediction is offset by its own error on the noiseless
  /// (aggressors quiet) transition, so only the noise-induced delay change
  /// is scored.
  NoiselessCalibrated,
};

inline const char* to_string(ErrorReference r) {
  return r == ErrorReference::Absolute ? "absolute" : "noiseless-calibrated";
}

struct SweepSpec {
  std::string name = "sweep";
  CircuitConfig circuit;
  Stimulus victim_stimulus;
  std::vector<std::string> aggressors;
  double aggressor_slew = 150e-12;
  bool aggressor_opposing = true;
  /// Per-aggressor start skew added to the common offset.
  std::vector<double> aggressor_skews;
  std::vector<double> offsets;
  /// Sweep every aggressor over `offsets` on its own (Cartesian product of
  /// cases) instead of sharing one offset.
  bool independent_offsets = false;
  std::vector<Method> methods{kAllMethods.begin(), kAllMethods.end()};
  FitSettings fit;
  ErrorReference reference = ErrorReference::Absolute;
  double settle_time = 2.5e-9;

  void validate() const {
    if (offsets.empty())
      throw ConfigError("sweep needs at least one offset");
    for (std::size_t i = 1; i < offsets.size(); ++i)
      if (!(offsets[i] > offsets[i - 1]))
        throw ConfigError("sweep offsets must be strictly increasing");
    if (!aggressor_skews.empty() && aggressor_skews.size() != aggressors.size())
      throw ConfigError("need one skew per aggressor");
    if (!circuit.receiver)
      throw ConfigError("sweep circuit needs a receiver");
    if (methods.empty())
      throw ConfigError("sweep needs at least one method");
    fit.validate();
  }

  /// Stimuli with aggressor i starting at victim start + offsets[i] + skew.
  std::vector<Stimulus> stimuli_at(const std::vector<double>& agg_offsets,
                                   bool quiet_aggressors) const {
    if (agg_offsets.size() != aggressors.size())
      throw ConfigError("need one offset per aggressor");
    std::vector<Stimulus> s{victim_stimulus};
    const Direction adir = aggressor_opposing ? opposite(victim_stimulus.direction)
                                              : victim_stimulus.direction;
    for (std::size_t i = 0; i < aggressors.size(); ++i) {
      Stimulus a;
      a.line = aggressors[i];
      a.start_time = victim_stimulus.start_time + agg_offsets[i] +
                     (aggressor_skews.empty() ? 0.0 : aggressor_skews[i]);
      a.slew = aggressor_slew;
      a.direction = adir;
      if (quiet_aggressors)
        a.amplitude = 0.0;
      s.push_back(a);
    }
    return s;
  }

  std::vector<Stimulus> stimuli(double offset, bool quiet_aggressors) const {
    return stimuli_at(std::vector<double>(aggressors.size(), offset), quiet_aggressors);
  }

  /// Per-case aggressor offsets in sweep order.
  std::vector<std::vector<double>> case_offsets() const {
    const std::size_t na = aggressors.size();
    std::vector<std::vector<double>> out;
    if (!independent_offsets || na <= 1) {
      for (double o : offsets)
        out.emplace_back(na, o);
      return out;
    }
    std::vector<std::size_t> idx(na, 0);
    for (;;) {
      std::vector<double> c(na);
      for (std::size_t i = 0; i < na; ++i)
        c[i] = offsets[idx[i]];
      out.push_back(std::move(c));
      std::size_t k = na;
      while (k > 0 && ++idx[k - 1] == offsets.size())
        idx[--k] = 0;
      if (k == 0)
        break;
    }
    return out;
  }
};

/// Uniform offsets: count points spanning [start, start + window].
inline std::vector<double> uniform_offsets(double start, double window, std::size_t count) {
  if (count == 1)
    return {start};
  return uniform_times(start, start + window, count);
}

struct MethodOutcome {
  Method method;
  std::optional<LinearWaveform> gamma;
  double predicted_delay = std::numeric_limits<double>::quiet_NaN();
  double error = std::numeric_limits<double>::quiet_NaN();
  std::string failure;
  bool ok() const { return failure.empty(); }
};

struct CaseResult {
  double offset = 0.0;
  std::vector<double> aggressor_offsets; // filled for independent sweeps only
  double oracle_delay = std::numeric_limits<double>::quiet_NaN();
  std::vector<MethodOutcome> methods;
  std::string failure;
};

struct MethodStats {
  Method method;
  double max_abs_error = 0.0;
  double avg_abs_error = 0.0;
  std::size_t count = 0;
};

/// Shared per-sweep context: the noiseless transition and the receiver
/// characterization.
struct SweepBaseline {
  SampledWaveform noiseless_input;
  SampledWaveform noiseless_output;
  double noiseless_delay;
  NoiselessCharacterization ch;
  std::map<Method, double> calibration; // method error on the noiseless case
};

namespace detail {

inline CircuitConfig sweep_circuit(const SweepSpec& spec) {
  CircuitConfig c = spec.circuit;
  c.observed = {c.victim + ".far", "rx.out"};
  double last = spec.victim_stimulus.end_time();
  for (const auto& s : spec.stimuli(spec.offsets.back(), false))
    last = std::max(last, s.end_time());
  c.t_stop = std::max(c.t_stop, last + spec.settle_time);
  return c;
}

/// Receiver output for a line input on the simulation grid. Starts a little
/// before the line leaves the lower rail.
inline SampledWaveform predicted_output(const InverterModel& rx, const LinearWaveform& line,
                                        const SampledWaveform& grid_like) {
  const auto ts = grid_like.times();
  const double t_lo = std::min(line.time_at(0.0), line.time_at(line.vdd()));
  auto it = std::lower_bound(ts.begin(), ts.end(), t_lo);
  auto first = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - ts.begin() - 200, 0));
  std::span<const double> window = ts.subspan(first);
  return gate_output(rx, sample_clipped(line, window));
}

inline double line_delay(const InverterModel& rx, const LinearWaveform& line,
                         const SampledWaveform& noisy_in) {
  return arrival_time(predicted_output(rx, line, noisy_in)) - arrival_time(noisy_in);
}

inline FitResult fit_victim(Method m, const SampledWaveform& in, const SweepBaseline& base,
                            const FitSettings& fs) {
  NoiselessReference ref{base.noiseless_input, arrival_time(base.noiseless_input)};
  return fit(m, in, base.ch, fs, ref);
}

} // namespace detail

inline SweepBaseline sweep_baseline(const SweepSpec& spec, const Circuit& ckt) {
  auto quiet = ckt.simulate(spec.stimuli(spec.offsets.front(), true));
  const auto& cfg = ckt.config();
  SampledWaveform in = quiet.at(cfg.victim + ".far");
  SampledWaveform out = quiet.at("rx.out");
  const double slew = slew_10_90(in);
  auto ch = characterize_noiseless(*cfg.receiver, slew, cfg.receiver->c_load);
  SweepBaseline base{in, out, measure_gate_delay(in, out), std::move(ch), {}};
  for (Method m : spec.methods) {
    try {
      auto f = detail::fit_victim(m, in, base, spec.fit);
      base.calibration[m] = detail::line_delay(*cfg.receiver, f.gamma, in) - base.noiseless_delay;
    } catch (const Error&) {
      base.calibration[m] = 0.0;
    }
  }
  return base;
}

inline CaseResult run_case(const SweepSpec& spec, const Circuit& ckt, const SweepBaseline& base,
                           const std::vector<double>& agg_offsets) {
  CaseResult cr;
  cr.offset = agg_offsets.empty() ? 0.0 : agg_offsets.front();
  if (spec.independent_offsets && agg_offsets.size() > 1)
    cr.aggressor_offsets = agg_offsets;
  const auto& cfg = ckt.config();
  try {
    auto res = ckt.simulate(spec.stimuli_at(agg_offsets, false));
    const SampledWaveform& in = res.at(cfg.victim + ".far");
    const SampledWaveform& out = res.at("rx.out");
    cr.oracle_delay = measure_gate_delay(in, out);
    for (Method m : spec.methods) {
      MethodOutcome mo;
      mo.method = m;
      try {
        auto f = detail::fit_victim(m, in, base, spec.fit);
        mo.gamma = f.gamma;
        mo.predicted_delay = detail::line_delay(*cfg.receiver, f.gamma, in);
        if (spec.reference == ErrorReference::NoiselessCalibrated)
          mo.predicted_delay -= base.calibration.at(m);
        mo.error = mo.predicted_delay - cr.oracle_delay;
      } catch (const Error& e) {
        mo.failure = e.what();
      }
      cr.methods.push_back(std::move(mo));
    }
  } catch (const Error& e) {
    cr.failure = e.what();
  }
  return cr;
}

inline CaseResult run_case(const SweepSpec& spec, const Circuit& ckt, const SweepBaseline& base,
                           double offset) {
  return run_case(spec, ckt, base, std::vector<double>(spec.aggressors.size(), offset));
}

/// Worker count from NOISY_STA_THREADS, else hardware concurrency.
inline unsigned sweep_threads() {
  if (const char* env = std::getenv("NOISY_STA_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1)
      return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

struct SweepOutput {
  SweepBaseline baseline;
  std::vector<CaseResult> cases;
};

inline SweepOutput run_sweep_full(const SweepSpec& spec, unsigned threads = sweep_threads()) {
  spec.validate();
  Circuit ckt(detail::sweep_circuit(spec));
  SweepBaseline base = sweep_baseline(spec, ckt);
  const auto plan = spec.case_offsets();
  std::vector<CaseResult> cases(plan.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cases.size(); i = next++)
      cases[i] = run_case(spec, ckt, base, plan[i]);
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(cases.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back(worker);
    for (auto& th : pool)
      th.join();
  }
  return {std::move(base), std::move(cases)};
}

inline std::vector<CaseResult> run_sweep(const SweepSpec& spec, unsigned threads = sweep_threads()) {
  return run_sweep_full(spec, threads).cases;
}

/// Max and mean |error| per method over the successful cases, in canonical
/// method order. Failed fits are excluded from the counts.
inline std::vector<MethodStats> stats(const std::vector<CaseResult>& results) {
  std::vector<MethodStats> out;
  for (Method m : kAllMethods) {
    bool seen = false;
    double sum = 0, mx = 0;
    std::size_t n = 0;
    for (const auto& c : results)
      for (const auto& mo : c.methods) {
        if (mo.method != m)
          continue;
        seen = true;
        if (!mo.ok())
          continue;
        double e = std::abs(mo.error);
        sum += e;
        mx = std::max(mx, e);
        ++n;
      }
    if (seen)
      out.push_back({m, mx, n ? sum / static_cast<double>(n) : 0.0, n});
  }
  return out;
}

// ---- built-in configurations -----------------------------------------------

inline constexpr double kDefaultDriverR = 200.0;       // ohm, every line input
inline constexpr double kDefaultVictimStart = 0.8e-9;  // s
inline constexpr double kDefaultOffsetStart = -500e-12; // aggressor edge leads by 0.5 ns
inline constexpr double kDefaultOffsetWindow = 1e-9;
inline constexpr std::size_t kDefaultOffsetCount = 200;

namespace detail {

/// Lines at 8.5 ohm / 4.8 fF per 10 um segment, every aggressor coupled to
/// the victim, drive-4 receiver at the victim far end.
inline SweepSpec coupled_bus(double length_um, int segments,
                             const std::vector<std::string>& aggressors, double coupling) {
  SweepSpec s;
  CircuitConfig& c = s.circuit;
  c.vdd = 1.2;
  c.victim = "victim";
  c.lines.push_back({"victim", length_um, 0.85, 0.48e-15, segments});
  for (const auto& a : aggressors) {
    c.lines.push_back({a, length_um, 0.85, 0.48e-15, segments});
    c.couplings.push_back({"victim", a, coupling});
  }
  c.driver_r.assign(c.lines.size(), kDefaultDriverR);
  c.receiver = InverterModel{};
  s.aggressors = aggressors;
  s.victim_stimulus = {"victim", kDefaultVictimStart, 150e-12, Direction::Rising, std::nullopt};
  s.aggressor_slew = 150e-12;
  s.offsets = uniform_offsets(kDefaultOffsetStart, kDefaultOffsetWindow, kDefaultOffsetCount);
  return s;
}

} // namespace detail

/// One victim, one aggressor, 1000 um each, 100 fF total coupling.
inline SweepSpec build_config_i() {
  auto s = detail::coupled_bus(1000.0, 100, {"aggr"}, 100e-15);
  s.name = "Config I";
  return s;
}

/// Victim between two aggressors, 500 um each, 100 fF to each aggressor,
/// both aggressors sharing one offset.
inline SweepSpec build_config_ii() {
  auto s = detail::coupled_bus(500.0, 50, {"aggr1", "aggr2"}, 100e-15);
  s.name = "Config II";
  return s;
}

/// Same sweep with every coupling capacitor set to `scale` times its value.
inline SweepSpec scale_coupling(SweepSpec s, double scale) {
  for (auto& c : s.circuit.couplings)
    c.total_c *= scale;
  return s;
}

// ---- multi-stage propagation -------------------------------------------------

struct ChainResult {
  std::vector<FitResult> fits;           // one per stage, on that stage's input
  std::vector<SampledWaveform> outputs;  // stage outputs driven by the fitted lines
  double final_arrival = 0.0;
};

/// Propagates a waveform through a chain of gates: stage i's input is
/// replaced by its fitted line (clipped to the rails) before simulating the
/// stage, and the stage output becomes the next stage's input.
inline ChainResult propagate_chain(const std::vector<GateModel>& stages,
                                   const std::vector<NoiselessCharacterization>& chars,
                                   const SampledWaveform& input, Method method,
                                   const FitSettings& settings = {}) {
  if (stages.empty())
    throw ConfigError("chain needs at least one stage");
  if (chars.size() != stages.size())
    throw ConfigError("need one characterization per chain stage");
  ChainResult r;
  SampledWaveform current = input;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    try {
      FitResult f = fit(method, current, chars[i], settings);
      SampledWaveform line_in = sample_clipped(f.gamma, current.times());
      SampledWaveform out = gate_output(stages[i], line_in);
      r.fits.push_back(std::move(f));
      r.outputs.push_back(out);
      current = std::move(out);
    } catch (const Error& e) {
      throw Error("chain stage " + std::to_string(i) + ": " + e.what());
    }
  }
  r.final_arrival = arrival_time(current);
  return r;
}

// ---- reporting --------------------------------------------------------------

enum class ReportFormat { Plain, Markdown };

struct ReportColumn {
  std::string name;
  std::vector<MethodStats> stats;
};

/// One row per method; one Max/Avg pair (ps, one decimal) per column.
inline std::string emit_report(const std::vector<ReportColumn>& columns, ReportFormat format) {
  std::vector<Method> rows;
  for (Method m : kAllMethods)
    for (const auto& col : columns)
      if (std::any_of(col.stats.begin(), col.stats.end(),
                      [&](const MethodStats& s) { return s.method == m; })) {
        rows.push_back(m);
        break;
      }
  auto ps = [](double seconds) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(1) << seconds * 1e12;
    return os.str();
  };
  auto cell = [&](const ReportColumn& col, Method m) -> std::pair<std::string, std::string> {
    for (const auto& s : col.stats)
      if (s.method == m)
        return {ps(s.max_abs_error), ps(s.avg_abs_error)};
    return {"-", "-"};
  };

  std::ostringstream os;
  if (format == ReportFormat::Markdown) {
    os << "| Method |";
    for (const auto& c : columns)
      os << ' ' << c.name << " Max (ps) | " << c.name << " Avg (ps) |";
    os << "\n|---|";
    for (std::size_t i = 0; i < columns.size(); ++i)
      os << "---:|---:|";
    os << '\n';
    for (Method m : rows) {
      os << "| " << to_string(m) << " |";
      for (const auto& c : columns) {
        auto [mx, avg] = cell(c, m);
        os << ' ' << mx << " | " << avg << " |";
      }
      os << '\n';
    }
    return os.str();
  }
  os << "Delay Error (ps)\n";
  os << "Method";
  for (const auto& c : columns)
    os << ' ' << c.name << ":Max " << c.name << ":Avg";
  os << '\n';
  for (Method m : rows) {
    os << to_string(m);
    for (const auto& c : columns) {
      auto [mx, avg] = cell(c, m);
      os << ' ' << mx << ' ' << avg;
    }
    os << '\n';
  }
  return os.str();
}

inline std::string emit_report(const std::vector<MethodStats>& s, ReportFormat format,
                               const std::string& column = "Sweep") {
  return emit_report(std::vector<ReportColumn>{{column, s}}, format);
}

/// offset_s, oracle_delay_s, then <METHOD>_predicted_delay_s and
/// <METHOD>_error_s per method.
inline void write_cases_csv(std::ostream& os, const std::vector<CaseResult>& cases) {
  std::vector<Method> methods;
  if (!cases.empty())
    for (const auto& mo : cases.front().methods)
      methods.push_back(mo.method);
  const std::size_t extra = cases.empty() ? 0 : cases.front().aggressor_offsets.size();
  os << "offset_s";
  for (std::size_t k = 0; k < extra; ++k)
    os << ",offset_" << k << "_s";
  os << ",oracle_delay_s";
  for (Method m : methods)
    os << ',' << to_string(m) << "_predicted_delay_s," << to_string(m) << "_error_s";
  os << '\n' << std::setprecision(17);
  for (const auto& c : cases) {
    os << c.offset;
    for (std::size_t k = 0; k < extra; ++k)
      os << ',' << (k < c.aggressor_offsets.size() ? c.aggressor_offsets[k] : c.offset);
    os << ',' << c.oracle_delay;
    for (Method m : methods) {
      auto it = std::find_if(c.methods.begin(), c.methods.end(),
                             [&](const MethodOutcome& mo) { return mo.method == m; });
      if (it == c.methods.end() || !it->ok())
        os << ",nan,nan";
      else
        os << ',' << it->predicted_delay << ',' << it->error;
    }
    os << '\n';
  }
}

} // namespace nsta

#endif // NOISY_STA_SWEEP_HPP
