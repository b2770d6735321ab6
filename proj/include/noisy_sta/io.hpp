#ifndef NOISY_STA_IO_HPP
#define NOISY_STA_IO_HPP

// JSON documents: circuit/sweep configs, characterizations and fit results.
// Human-facing units (ps, fF, ohm, um, mA) are converted here; everything
// past this header is in seconds, volts, farads and amps.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "noisy_sta/characterize.hpp"
#include "noisy_sta/circuit.hpp"
#include "noisy_sta/errors.hpp"
#include "noisy_sta/fitters.hpp"
#include "noisy_sta/sweep.hpp"
#include "noisy_sta/waveform.hpp"

namespace nsta::io {

using json = nlohmann::json;

namespace detail {

inline void check_keys(const json& j, std::initializer_list<const char*> allowed,
                       const std::string& where) {
  if (!j.is_object())
    throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed)
      ok = ok || key == a;
    if (!ok)
      throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

inline double number(const json& j, const char* key, const std::string& where) {
  const auto& v = j.at(key);
  if (!v.is_number())
    throw ConfigError(where + ": '" + key + "' must be a number");
  return v.get<double>();
}

inline double number_or(const json& j, const char* key, double fallback,
                        const std::string& where) {
  return j.contains(key) ? number(j, key, where) : fallback;
}

inline std::string string_or(const json& j, const char* key, const std::string& fallback) {
  if (!j.contains(key))
    return fallback;
  if (!j.at(key).is_string())
    throw ConfigError(std::string("'") + key + "' must be a string");
  return j.at(key).get<std::string>();
}

/// At most one of the listed keys; returns its index or -1.
inline int which_of(const json& j, std::initializer_list<const char*> keys,
                    const std::string& where) {
  int found = -1, i = 0;
  for (const char* k : keys) {
    if (j.contains(k)) {
      if (found >= 0)
        throw ConfigError(where + ": give only one of the alternative R/C forms");
      found = i;
    }
    ++i;
  }
  return found;
}

inline Direction parse_direction(const std::string& s) {
  if (s == "rising")
    return Direction::Rising;
  if (s == "falling")
    return Direction::Falling;
  throw ConfigError("direction must be 'rising' or 'falling', got '" + s + "'");
}

inline json waveform_json(const SampledWaveform& wf) {
  return {{"t_s", std::vector<double>(wf.times().begin(), wf.times().end())},
          {"v", std::vector<double>(wf.volts().begin(), wf.volts().end())},
          {"direction", to_string(wf.direction())}};
}

inline SampledWaveform waveform_from(const json& j, double vdd) {
  return SampledWaveform(j.at("t_s").get<std::vector<double>>(),
                         j.at("v").get<std::vector<double>>(), vdd,
                         parse_direction(j.at("direction").get<std::string>()));
}

} // namespace detail

// ---- files ------------------------------------------------------------------

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline json load_json(const std::string& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

/// Writes to a sibling temporary file, then renames over the target, so a
/// reader never sees a partial file.
inline void write_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw Error("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error("write to '" + tmp.string() + "' failed");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error("cannot rename onto '" + path + "'");
  }
}

// ---- receiver ---------------------------------------------------------------

inline InverterModel inverter_from_json(const json& j) {
  const std::string w = "receiver";
  detail::check_keys(j,
                     {"vdd", "vth_n_v", "vth_p_v", "alpha", "i_on_n_ma", "i_on_p_ma", "drive",
                      "stages", "c_out_per_stage_ff", "c_load_ff", "vdsat_v"},
                     w);
  InverterModel m;
  m.vdd = detail::number_or(j, "vdd", m.vdd, w);
  m.vth_n = detail::number_or(j, "vth_n_v", m.vth_n, w);
  m.vth_p = detail::number_or(j, "vth_p_v", m.vth_p, w);
  m.alpha = detail::number_or(j, "alpha", m.alpha, w);
  m.i_on_n = detail::number_or(j, "i_on_n_ma", m.i_on_n * 1e3, w) * 1e-3;
  m.i_on_p = detail::number_or(j, "i_on_p_ma", m.i_on_p * 1e3, w) * 1e-3;
  m.drive_strength = detail::number_or(j, "drive", m.drive_strength, w);
  if (j.contains("stages")) {
    if (!j.at("stages").is_number_integer())
      throw ConfigError("receiver: 'stages' must be an integer");
    m.stages = j.at("stages").get<int>();
  }
  m.c_out_per_stage = detail::number_or(j, "c_out_per_stage_ff", m.c_out_per_stage * 1e15, w) * 1e-15;
  m.c_load = detail::number_or(j, "c_load_ff", m.c_load * 1e15, w) * 1e-15;
  m.vdsat_full = detail::number_or(j, "vdsat_v", m.vdsat_full, w);
  m.validate();
  return m;
}

inline json inverter_to_json(const InverterModel& m) {
  return {{"vdd", m.vdd},
          {"vth_n_v", m.vth_n},
          {"vth_p_v", m.vth_p},
          {"alpha", m.alpha},
          {"i_on_n_ma", m.i_on_n * 1e3},
          {"i_on_p_ma", m.i_on_p * 1e3},
          {"drive", m.drive_strength},
          {"stages", m.stages},
          {"c_out_per_stage_ff", m.c_out_per_stage * 1e15},
          {"c_load_ff", m.c_load * 1e15},
          {"vdsat_v", m.vdsat_full}};
}

// ---- circuit ----------------------------------------------------------------

/// Line R and C may be given per segment (default 8.5 ohm / 4.8 fF), per um
/// or as line totals.
inline LineSpec line_from_json(const json& j) {
  const std::string w = "line";
  detail::check_keys(j,
                     {"name", "length_um", "segments", "r_per_segment_ohm", "r_per_um_ohm",
                      "r_total_ohm", "c_per_segment_ff", "c_per_um_ff", "c_total_ff",
                      "far_end_load_ff"},
                     w);
  LineSpec l;
  l.name = j.at("name").get<std::string>();
  const std::string wl = "line '" + l.name + "'";
  l.length_um = detail::number(j, "length_um", wl);
  if (j.contains("segments")) {
    if (!j.at("segments").is_number_integer())
      throw ConfigError(wl + ": 'segments' must be an integer");
    l.segments = j.at("segments").get<int>();
  } else {
    l.segments = std::max(1, static_cast<int>(std::lround(l.length_um / 10.0)));
  }
  if (!(l.length_um > 0) || l.segments < 1)
    throw ConfigError(wl + ": length and segment count must be positive");
  const double segs = l.segments;
  switch (detail::which_of(j, {"r_per_segment_ohm", "r_per_um_ohm", "r_total_ohm"}, wl)) {
  case 0: l.r_per_um = detail::number(j, "r_per_segment_ohm", wl) * segs / l.length_um; break;
  case 1: l.r_per_um = detail::number(j, "r_per_um_ohm", wl); break;
  case 2: l.r_per_um = detail::number(j, "r_total_ohm", wl) / l.length_um; break;
  default: l.r_per_um = 8.5 * segs / l.length_um;
  }
  switch (detail::which_of(j, {"c_per_segment_ff", "c_per_um_ff", "c_total_ff"}, wl)) {
  case 0: l.c_per_um = detail::number(j, "c_per_segment_ff", wl) * 1e-15 * segs / l.length_um; break;
  case 1: l.c_per_um = detail::number(j, "c_per_um_ff", wl) * 1e-15; break;
  case 2: l.c_per_um = detail::number(j, "c_total_ff", wl) * 1e-15 / l.length_um; break;
  default: l.c_per_um = 4.8e-15 * segs / l.length_um;
  }
  l.far_end_load = detail::number_or(j, "far_end_load_ff", 0.0, wl) * 1e-15;
  return l;
}

inline json line_to_json(const LineSpec& l) {
  return {{"name", l.name},
          {"length_um", l.length_um},
          {"segments", l.segments},
          {"r_total_ohm", l.total_r()},
          {"c_total_ff", l.total_c() * 1e15},
          {"far_end_load_ff", l.far_end_load * 1e15}};
}

inline CircuitConfig circuit_from_json(const json& j) {
  CircuitConfig c;
  c.vdd = detail::number_or(j, "vdd", c.vdd, "config");
  if (!j.contains("lines") || !j.at("lines").is_array() || j.at("lines").empty())
    throw ConfigError("config: 'lines' must be a non-empty array");
  for (const auto& l : j.at("lines"))
    c.lines.push_back(line_from_json(l));
  for (const auto& cp : j.value("couplings", json::array())) {
    detail::check_keys(cp, {"a", "b", "total_ff"}, "coupling");
    c.couplings.push_back({cp.at("a").get<std::string>(), cp.at("b").get<std::string>(),
                           detail::number(cp, "total_ff", "coupling") * 1e-15});
  }
  c.driver_r.assign(c.lines.size(), kDefaultDriverR);
  for (const auto& d : j.value("drivers", json::array())) {
    detail::check_keys(d, {"line", "r_ohm"}, "driver");
    const auto name = d.at("line").get<std::string>();
    bool found = false;
    for (std::size_t i = 0; i < c.lines.size(); ++i)
      if (c.lines[i].name == name) {
        c.driver_r[i] = detail::number(d, "r_ohm", "driver");
        found = true;
      }
    if (!found)
      throw ConfigError("driver: unknown line '" + name + "'");
  }
  if (j.contains("receiver") && !j.at("receiver").is_null()) {
    json r = j.at("receiver");
    if (!r.contains("vdd"))
      r["vdd"] = c.vdd;
    c.receiver = inverter_from_json(r);
  }
  c.victim = detail::string_or(j, "victim", c.lines.front().name);
  if (j.contains("sim")) {
    const auto& s = j.at("sim");
    detail::check_keys(s, {"dt_ps", "tstop_ps", "observed"}, "sim");
    c.dt = detail::number_or(s, "dt_ps", c.dt * 1e12, "sim") * 1e-12;
    c.t_stop = detail::number_or(s, "tstop_ps", c.t_stop * 1e12, "sim") * 1e-12;
    if (s.contains("observed"))
      c.observed = s.at("observed").get<std::vector<std::string>>();
  }
  return c;
}

inline json circuit_to_json(const CircuitConfig& c) {
  json j;
  j["vdd"] = c.vdd;
  j["victim"] = c.victim;
  j["lines"] = json::array();
  for (const auto& l : c.lines)
    j["lines"].push_back(line_to_json(l));
  j["couplings"] = json::array();
  for (const auto& cp : c.couplings)
    j["couplings"].push_back({{"a", cp.line_a}, {"b", cp.line_b}, {"total_ff", cp.total_c * 1e15}});
  j["drivers"] = json::array();
  for (std::size_t i = 0; i < c.lines.size() && i < c.driver_r.size(); ++i)
    j["drivers"].push_back({{"line", c.lines[i].name}, {"r_ohm", c.driver_r[i]}});
  if (c.receiver)
    j["receiver"] = inverter_to_json(*c.receiver);
  j["sim"] = {{"dt_ps", c.dt * 1e12}, {"tstop_ps", c.t_stop * 1e12}};
  if (!c.observed.empty())
    j["sim"]["observed"] = c.observed;
  return j;
}

// ---- stimuli and sweeps -------------------------------------------------------

inline Stimulus stimulus_from_json(const json& j) {
  detail::check_keys(j, {"line", "start_ps", "slew_ps", "direction", "amplitude_v"}, "stimulus");
  Stimulus s;
  s.line = j.at("line").get<std::string>();
  s.start_time = detail::number_or(j, "start_ps", 0.0, "stimulus") * 1e-12;
  s.slew = detail::number_or(j, "slew_ps", 150.0, "stimulus") * 1e-12;
  s.direction = detail::parse_direction(detail::string_or(j, "direction", "rising"));
  if (j.contains("amplitude_v"))
    s.amplitude = detail::number(j, "amplitude_v", "stimulus");
  if (!(s.slew > 0))
    throw ConfigError("stimulus slew must be positive");
  return s;
}

inline json stimulus_to_json(const Stimulus& s) {
  json j{{"line", s.line},
         {"start_ps", s.start_time * 1e12},
         {"slew_ps", s.slew * 1e12},
         {"direction", to_string(s.direction)}};
  if (s.amplitude)
    j["amplitude_v"] = *s.amplitude;
  return j;
}

inline std::vector<Method> methods_from_json(const json& j) {
  std::vector<std::string> names;
  if (j.is_string())
    names.push_back(j.get<std::string>());
  else
    names = j.get<std::vector<std::string>>();
  std::vector<Method> out;
  for (const auto& n : names) {
    if (n == "all")
      return {kAllMethods.begin(), kAllMethods.end()};
    auto m = parse_method(n);
    if (!m)
      throw ConfigError("unknown method '" + n + "'");
    if (std::find(out.begin(), out.end(), *m) == out.end())
      out.push_back(*m);
  }
  // canonical order keeps reports and CSV columns stable
  std::vector<Method> ordered;
  for (Method m : kAllMethods)
    if (std::find(out.begin(), out.end(), m) != out.end())
      ordered.push_back(m);
  return ordered;
}

inline SgdpObjective parse_objective(const std::string& s) {
  if (s == "squared")
    return SgdpObjective::Squared;
  if (s == "literal")
    return SgdpObjective::Literal;
  throw ConfigError("sgdp objective must be 'squared' or 'literal', got '" + s + "'");
}

inline const char* to_string(SgdpObjective o) {
  return o == SgdpObjective::Squared ? "squared" : "literal";
}

inline ErrorReference parse_error_reference(const std::string& s) {
  if (s == "absolute")
    return ErrorReference::Absolute;
  if (s == "noiseless-calibrated" || s == "calibrated")
    return ErrorReference::NoiselessCalibrated;
  throw ConfigError("error reference must be 'absolute' or 'noiseless-calibrated', got '" + s +
                    "'");
}

/// A sweep document is a circuit document plus a "sweep" object.
inline SweepSpec sweep_from_json(const json& j) {
  detail::check_keys(j,
                     {"name", "vdd", "lines", "couplings", "drivers", "receiver", "victim", "sim",
                      "sweep", "stimuli"},
                     "config");
  SweepSpec s;
  s.name = detail::string_or(j, "name", "sweep");
  s.circuit = circuit_from_json(j);
  if (!j.contains("sweep"))
    throw ConfigError("config: missing 'sweep' section");
  const auto& w = j.at("sweep");
  const std::string ws = "sweep";
  detail::check_keys(w,
                     {"victim_start_ps", "victim_slew_ps", "victim_direction", "aggressors",
                      "aggressor_slew_ps", "aggressor_opposing", "aggressor_skews_ps",
                      "independent_offsets", "offsets", "methods", "samples", "sgdp_objective",
                      "error_reference", "settle_ps"},
                     ws);
  s.victim_stimulus.line = s.circuit.victim;
  s.victim_stimulus.start_time = detail::number_or(w, "victim_start_ps", kDefaultVictimStart * 1e12, ws) * 1e-12;
  s.victim_stimulus.slew = detail::number_or(w, "victim_slew_ps", 150.0, ws) * 1e-12;
  s.victim_stimulus.direction = detail::parse_direction(detail::string_or(w, "victim_direction", "rising"));
  if (w.contains("aggressors")) {
    s.aggressors = w.at("aggressors").get<std::vector<std::string>>();
  } else {
    for (const auto& l : s.circuit.lines)
      if (l.name != s.circuit.victim)
        s.aggressors.push_back(l.name);
  }
  s.aggressor_slew = detail::number_or(w, "aggressor_slew_ps", 150.0, ws) * 1e-12;
  s.aggressor_opposing = w.value("aggressor_opposing", true);
  for (double k : w.value("aggressor_skews_ps", std::vector<double>{}))
    s.aggressor_skews.push_back(k * 1e-12);
  s.independent_offsets = w.value("independent_offsets", false);
  if (w.contains("offsets")) {
    const auto& o = w.at("offsets");
    if (o.is_array()) {
      for (double x : o.get<std::vector<double>>())
        s.offsets.push_back(x * 1e-12);
    } else {
      detail::check_keys(o, {"start_ps", "window_ps", "count"}, "offsets");
      const auto count = o.value("count", static_cast<int>(kDefaultOffsetCount));
      if (count < 1)
        throw ConfigError("offsets: count must be at least 1");
      s.offsets = uniform_offsets(detail::number_or(o, "start_ps", kDefaultOffsetStart * 1e12, ws) * 1e-12,
                                  detail::number_or(o, "window_ps", kDefaultOffsetWindow * 1e12, ws) * 1e-12,
                                  static_cast<std::size_t>(count));
    }
  } else {
    s.offsets = uniform_offsets(kDefaultOffsetStart, kDefaultOffsetWindow, kDefaultOffsetCount);
  }
  if (w.contains("methods"))
    s.methods = methods_from_json(w.at("methods"));
  if (w.contains("samples")) {
    if (!w.at("samples").is_number_integer() || w.at("samples").get<int>() < 1)
      throw ConfigError("sweep: 'samples' must be a positive integer");
    s.fit.samples = w.at("samples").get<std::size_t>();
  }
  s.fit.sgdp_objective = parse_objective(detail::string_or(w, "sgdp_objective", "squared"));
  s.reference = parse_error_reference(detail::string_or(w, "error_reference", "absolute"));
  s.settle_time = detail::number_or(w, "settle_ps", s.settle_time * 1e12, ws) * 1e-12;
  if (!s.circuit.receiver)
    s.circuit.receiver = InverterModel{};
  s.validate();
  return s;
}

inline json sweep_to_json(const SweepSpec& s) {
  json j = circuit_to_json(s.circuit);
  j["name"] = s.name;
  json w;
  w["victim_start_ps"] = s.victim_stimulus.start_time * 1e12;
  w["victim_slew_ps"] = s.victim_stimulus.slew * 1e12;
  w["victim_direction"] = to_string(s.victim_stimulus.direction);
  w["aggressors"] = s.aggressors;
  w["aggressor_slew_ps"] = s.aggressor_slew * 1e12;
  w["aggressor_opposing"] = s.aggressor_opposing;
  if (!s.aggressor_skews.empty()) {
    std::vector<double> ps;
    for (double k : s.aggressor_skews)
      ps.push_back(k * 1e12);
    w["aggressor_skews_ps"] = ps;
  }
  w["independent_offsets"] = s.independent_offsets;
  const double first = s.offsets.front(), last = s.offsets.back();
  if (s.offsets == uniform_offsets(first, last - first, s.offsets.size())) {
    w["offsets"] = {{"start_ps", first * 1e12},
                    {"window_ps", (last - first) * 1e12},
                    {"count", s.offsets.size()}};
  } else {
    std::vector<double> ps;
    for (double o : s.offsets)
      ps.push_back(o * 1e12);
    w["offsets"] = ps;
  }
  std::vector<std::string> names;
  for (Method m : s.methods)
    names.emplace_back(nsta::to_string(m));
  w["methods"] = names;
  w["samples"] = s.fit.samples;
  w["sgdp_objective"] = to_string(s.fit.sgdp_objective);
  w["error_reference"] = s.reference == ErrorReference::Absolute ? "absolute" : "noiseless-calibrated";
  w["settle_ps"] = s.settle_time * 1e12;
  j["sweep"] = w;
  return j;
}

// ---- characterization ----------------------------------------------------------

inline json characterization_to_json(const NoiselessCharacterization& ch) {
  json j;
  j["vdd"] = ch.vdd;
  j["input_slew_s"] = ch.input_slew;
  j["load_f"] = ch.load;
  j["polarity"] = ch.inverting ? "inverting" : "non-inverting";
  j["delta_s"] = ch.delta;
  j["overlap"] = ch.overlap;
  j["region"] = {{"t_first_s", ch.region.t_first}, {"t_last_s", ch.region.t_last}};
  j["rho_v"] = {{"v_lo", ch.grid_lo()}, {"v_hi", ch.grid_hi()}, {"rho", ch.rho_v},
                {"drho_dv", ch.drho_dv}};
  j["rho_t"] = {{"t_s", ch.rho_t.t}, {"rho", ch.rho_t.rho}};
  j["v_in_ref"] = detail::waveform_json(ch.v_in_ref);
  j["v_out_ref"] = detail::waveform_json(ch.v_out_ref);
  return j;
}

inline NoiselessCharacterization characterization_from_json(const json& j) {
  try {
    const double vdd = j.at("vdd").get<double>();
    const std::string pol = j.at("polarity").get<std::string>();
    if (pol != "inverting" && pol != "non-inverting")
      throw ConfigError("characterization: bad polarity '" + pol + "'");
    SensitivityProfile rt;
    rt.t = j.at("rho_t").at("t_s").get<std::vector<double>>();
    rt.rho = j.at("rho_t").at("rho").get<std::vector<double>>();
    auto rv = j.at("rho_v").at("rho").get<std::vector<double>>();
    auto dr = j.at("rho_v").at("drho_dv").get<std::vector<double>>();
    if (rv.size() < 64 || dr.size() != rv.size() || rt.t.size() != rt.rho.size())
      throw ConfigError("characterization: inconsistent table sizes");
    CriticalRegion region{j.at("region").at("t_first_s").get<double>(),
                          j.at("region").at("t_last_s").get<double>(),
                          CriticalRegion::Kind::Noiseless};
    NoiselessCharacterization ch{vdd,
                                 j.at("input_slew_s").get<double>(),
                                 j.at("load_f").get<double>(),
                                 pol == "inverting",
                                 detail::waveform_from(j.at("v_in_ref"), vdd),
                                 detail::waveform_from(j.at("v_out_ref"), vdd),
                                 std::move(rt),
                                 std::move(rv),
                                 std::move(dr),
                                 region,
                                 j.at("delta_s").get<double>(),
                                 j.at("overlap").get<bool>()};
    return ch;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("characterization: ") + e.what());
  }
}

// ---- fit results ---------------------------------------------------------------

inline json fit_result_to_json(const FitResult& r) {
  const auto& d = r.diagnostics;
  return {{"method", nsta::to_string(r.method)},
          {"a", r.gamma.a()},
          {"b", r.gamma.b()},
          {"arrival_s", r.gamma.arrival_time()},
          {"slew_s", r.gamma.slew_10_90()},
          {"diagnostics",
           {{"objective", d.objective},
            {"iterations", d.iterations},
            {"converged", d.converged},
            {"shift_applied", d.shift_applied},
            {"shift_s", d.shift},
            {"window_start_s", d.window_start},
            {"window_end_s", d.window_end},
            {"samples", d.samples},
            {"fallback", d.fallback},
            {"note", d.note}}}};
}

// ---- sweep case tables -----------------------------------------------------------

/// Per-method statistics recomputed from a cases CSV written by
/// write_cases_csv; rows with nan errors count as failed fits.
inline std::vector<MethodStats> stats_from_cases_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line))
    throw ConfigError("cases CSV is empty");
  auto split = [](const std::string& row) {
    std::vector<std::string> out;
    std::stringstream ss(row);
    std::string cell;
    while (std::getline(ss, cell, ','))
      out.push_back(cell);
    return out;
  };
  const auto header = split(line);
  std::vector<std::pair<Method, std::size_t>> cols;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string& h = header[i];
    const std::string suffix = "_error_s";
    if (h.size() > suffix.size() && h.compare(h.size() - suffix.size(), suffix.size(), suffix) == 0)
      if (auto m = parse_method(h.substr(0, h.size() - suffix.size())))
        cols.emplace_back(*m, i);
  }
  if (cols.empty())
    throw ConfigError("cases CSV has no <METHOD>_error_s columns");
  std::vector<CaseResult> cases;
  while (std::getline(is, line)) {
    if (line.empty())
      continue;
    const auto cells = split(line);
    if (cells.size() != header.size())
      throw ConfigError("cases CSV row has " + std::to_string(cells.size()) + " cells, expected " +
                        std::to_string(header.size()));
    CaseResult c;
    for (const auto& [m, i] : cols) {
      MethodOutcome mo;
      mo.method = m;
      double e = std::strtod(cells[i].c_str(), nullptr);
      if (std::isnan(e))
        mo.failure = "fit failed";
      else
        mo.error = e;
      c.methods.push_back(std::move(mo));
    }
    cases.push_back(std::move(c));
  }
  if (cases.empty())
    throw ConfigError("cases CSV has no rows");
  return stats(cases);
}

// ---- defaults ------------------------------------------------------------------

inline json defaults_json() {
  FitSettings fs;
  CharacterizationOptions co;
  LineSpec line;
  json j;
  j["vdd"] = 1.2;
  j["fit"] = {{"samples", fs.samples},
              {"sgdp_objective", to_string(fs.sgdp_objective)},
              {"gauss_newton_max_iters", fs.gauss_newton_max_iters},
              {"param_tol", fs.param_tol},
              {"grid_fallback", fs.grid_fallback}};
  j["characterization"] = {{"dt_ps", co.dt * 1e12},
                           {"grid_points", co.grid_points},
                           {"smoothing_window", co.smoothing_window},
                           {"lead_ps", co.lead_time * 1e12},
                           {"settle_ps", co.settle_time * 1e12}};
  j["simulation"] = {{"dt_ps", CircuitConfig{}.dt * 1e12},
                     {"tstop_ps", CircuitConfig{}.t_stop * 1e12},
                     {"newton_tol_v", kNewtonTol},
                     {"newton_max_iters", kNewtonMaxIter},
                     {"driver_r_ohm", kDefaultDriverR}};
  j["line"] = {{"r_per_segment_ohm", line.r_per_um * 10.0},
               {"c_per_segment_ff", line.c_per_um * 10.0 * 1e15},
               {"segment_length_um", 10.0}};
  j["inverter"] = inverter_to_json(InverterModel{});
  j["sweep"] = {{"victim_start_ps", kDefaultVictimStart * 1e12},
                {"offset_start_ps", kDefaultOffsetStart * 1e12},
                {"offset_window_ps", kDefaultOffsetWindow * 1e12},
                {"offset_count", kDefaultOffsetCount},
                {"aggressor_opposing", true},
                {"error_reference", "absolute"}};
  return j;
}

} // namespace nsta::io

#endif // NOISY_STA_IO_HPP
