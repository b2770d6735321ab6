// noisy-sta: characterize receivers, fit equivalent lines to noisy
// transitions, run the reference simulator and aggressor sweeps.
//
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "noisy_sta/noisy_sta.hpp"

namespace {

using nsta::io::json;

constexpr int kUsage = 1;
constexpr int kRuntime = 2;

/// Raised for bad flag values found after CLI11 has accepted the syntax.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void emit(const std::optional<std::string>& path, const std::string& text) {
  if (path)
    nsta::io::write_atomic(*path, text);
  else
    std::cout << text << std::flush;
}

void require_file(const std::string& path, const char* what) {
  if (!std::filesystem::is_regular_file(path))
    throw UsageError(std::string(what) + " '" + path + "' does not exist");
}

std::vector<nsta::Method> parse_methods(const std::string& list) {
  std::vector<std::string> names;
  std::stringstream ss(list);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty())
      names.push_back(item);
  if (names.empty())
    throw UsageError("empty method list");
  try {
    return nsta::io::methods_from_json(json(names));
  } catch (const nsta::ConfigError& e) {
    throw UsageError(e.what());
  }
}

nsta::ReportFormat parse_format(const std::string& s) {
  if (s == "plain")
    return nsta::ReportFormat::Plain;
  if (s == "markdown")
    return nsta::ReportFormat::Markdown;
  throw UsageError("format must be 'plain' or 'markdown'");
}

// ---- characterize -------------------------------------------------------------

struct CharacterizeArgs {
  std::string config;
  double slew_ps = 0;
  std::optional<double> load_ff;
  std::optional<int> stages;
  std::optional<double> drive;
  std::string out;
  std::optional<std::string> csv_prefix;
};

void run_characterize(const CharacterizeArgs& a) {
  nsta::InverterModel inv;
  if (!a.config.empty()) {
    require_file(a.config, "config");
    auto cfg = nsta::io::circuit_from_json(nsta::io::load_json(a.config));
    if (cfg.receiver)
      inv = *cfg.receiver;
  }
  if (a.stages)
    inv.stages = *a.stages;
  if (a.drive)
    inv.drive_strength = *a.drive;
  if (!(a.slew_ps > 0))
    throw UsageError("--slew-ps must be positive");
  const double load = a.load_ff ? *a.load_ff * 1e-15 : inv.c_load;
  if (load < 0)
    throw UsageError("--load-ff must be non-negative");
  inv.validate();
  auto ch = nsta::characterize_noiseless(inv, a.slew_ps * 1e-12, load);
  nsta::io::write_atomic(a.out, nsta::io::characterization_to_json(ch).dump(1) + "\n");
  if (a.csv_prefix) {
    std::ostringstream in, out;
    nsta::write_waveform_csv(in, ch.v_in_ref);
    nsta::write_waveform_csv(out, ch.v_out_ref);
    nsta::io::write_atomic(*a.csv_prefix + "_in.csv", in.str());
    nsta::io::write_atomic(*a.csv_prefix + "_out.csv", out.str());
  }
}

// ---- fit ----------------------------------------------------------------------

struct FitArgs {
  std::string method;
  std::string characterization;
  std::string input;
  std::size_t samples = 35;
  std::string objective = "squared";
  std::optional<double> noiseless_arrival_ps;
  std::optional<std::string> out;
};

void run_fit(const FitArgs& a) {
  auto m = nsta::parse_method(a.method);
  if (!m)
    throw UsageError("unknown method '" + a.method + "'");
  nsta::FitSettings fs;
  fs.samples = a.samples;
  try {
    fs.sgdp_objective = nsta::io::parse_objective(a.objective);
    fs.validate();
  } catch (const nsta::ConfigError& e) {
    throw UsageError(e.what());
  }
  require_file(a.characterization, "characterization");
  require_file(a.input, "waveform");
  auto ch = nsta::io::characterization_from_json(nsta::io::load_json(a.characterization));
  auto wf = nsta::load_waveform_csv(a.input, ch.vdd);
  nsta::NoiselessReference ref;
  if (a.noiseless_arrival_ps)
    ref.arrival = *a.noiseless_arrival_ps * 1e-12;
  auto r = nsta::fit(*m, wf, ch, fs, ref);
  emit(a.out, nsta::io::fit_result_to_json(r).dump(2) + "\n");
}

// ---- simulate -----------------------------------------------------------------

struct SimulateArgs {
  std::string config;
  std::string out_dir;
  std::optional<double> offset_ps;
  bool quiet = false;
  std::vector<std::string> observe;
};

std::string file_name_for(std::string node) {
  for (char& c : node)
    if (c == '/' || c == '\\')
      c = '_';
  return node + ".csv";
}

void run_simulate(const SimulateArgs& a) {
  require_file(a.config, "config");
  const json doc = nsta::io::load_json(a.config);
  nsta::CircuitConfig cfg;
  std::vector<nsta::Stimulus> stimuli;
  if (doc.contains("stimuli")) {
    cfg = nsta::io::circuit_from_json(doc);
    for (const auto& s : doc.at("stimuli"))
      stimuli.push_back(nsta::io::stimulus_from_json(s));
  } else if (doc.contains("sweep")) {
    json d = doc;
    auto spec = nsta::io::sweep_from_json(d);
    const double off = a.offset_ps ? *a.offset_ps * 1e-12 : spec.offsets.front();
    cfg = nsta::detail::sweep_circuit(spec);
    cfg.observed = nsta::io::circuit_from_json(doc).observed;
    stimuli = spec.stimuli(off, a.quiet);
  } else {
    throw nsta::ConfigError("config needs a 'stimuli' array or a 'sweep' section");
  }
  if (!a.observe.empty())
    cfg.observed = a.observe;
  nsta::Circuit ckt(cfg);
  auto waves = ckt.simulate(stimuli);
  std::filesystem::create_directories(a.out_dir);
  for (const auto& [node, wf] : waves) {
    std::ostringstream os;
    nsta::write_waveform_csv(os, wf);
    nsta::io::write_atomic((std::filesystem::path(a.out_dir) / file_name_for(node)).string(),
                           os.str());
  }
}

// ---- sweep --------------------------------------------------------------------

struct SweepArgs {
  std::string config;
  std::string methods = "all";
  std::optional<std::string> out;
  std::optional<std::string> csv;
  std::string format = "markdown";
  std::optional<unsigned> threads;
  std::optional<std::string> reference;
  std::optional<std::size_t> count;
  std::optional<std::size_t> samples;
  std::optional<std::string> objective;
  std::optional<double> coupling_scale;
};

void run_sweep_cmd(const SweepArgs& a) {
  const auto format = parse_format(a.format);
  const auto methods = parse_methods(a.methods);
  require_file(a.config, "config");
  auto spec = nsta::io::sweep_from_json(nsta::io::load_json(a.config));
  spec.methods = methods;
  try {
    if (a.reference)
      spec.reference = nsta::io::parse_error_reference(*a.reference);
    if (a.objective)
      spec.fit.sgdp_objective = nsta::io::parse_objective(*a.objective);
  } catch (const nsta::ConfigError& e) {
    throw UsageError(e.what());
  }
  if (a.samples)
    spec.fit.samples = *a.samples;
  if (a.count) {
    if (*a.count < 1)
      throw UsageError("--count must be at least 1");
    const double first = spec.offsets.front(), last = spec.offsets.back();
    spec.offsets = nsta::uniform_offsets(first, last - first, *a.count);
  }
  if (a.coupling_scale) {
    if (*a.coupling_scale < 0)
      throw UsageError("--coupling-scale must be non-negative");
    spec = nsta::scale_coupling(std::move(spec), *a.coupling_scale);
  }
  spec.validate();
  unsigned threads = nsta::sweep_threads();
  if (a.threads)
    threads = std::max(1u, std::min(threads, *a.threads));
  auto res = nsta::run_sweep_full(spec, threads);
  std::string report = nsta::emit_report(nsta::stats(res.cases), format, spec.name);
  emit(a.out, report);
  if (a.csv) {
    std::ostringstream os;
    nsta::write_cases_csv(os, res.cases);
    nsta::io::write_atomic(*a.csv, os.str());
  }
  std::size_t failed = 0;
  for (const auto& c : res.cases) {
    if (!c.failure.empty())
      ++failed;
    for (const auto& m : c.methods)
      failed += m.ok() ? 0 : 1;
  }
  if (failed)
    std::cerr << "noisy-sta: " << failed << " case/method failures recorded (see CSV nan cells)\n";
}

// ---- report -------------------------------------------------------------------

struct ReportArgs {
  bool defaults = false;
  std::vector<std::string> cases;
  std::vector<std::string> names;
  std::string format = "plain";
  std::optional<std::string> out;
};

void run_report(const ReportArgs& a) {
  if (a.defaults) {
    if (!a.cases.empty())
      throw UsageError("--defaults cannot be combined with --cases");
    emit(a.out, nsta::io::defaults_json().dump(2) + "\n");
    return;
  }
  if (a.cases.empty())
    throw UsageError("report needs --defaults or at least one --cases file");
  if (!a.names.empty() && a.names.size() != a.cases.size())
    throw UsageError("give one --name per --cases file");
  const auto format = parse_format(a.format);
  std::vector<nsta::ReportColumn> cols;
  for (std::size_t i = 0; i < a.cases.size(); ++i) {
    require_file(a.cases[i], "cases file");
    std::istringstream is(nsta::io::read_text(a.cases[i]));
    std::string name = a.names.empty() ? std::filesystem::path(a.cases[i]).stem().string()
                                       : a.names[i];
    cols.push_back({name, nsta::io::stats_from_cases_csv(is)});
  }
  emit(a.out, nsta::emit_report(cols, format));
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Equivalent-waveform fitting for noisy transitions, with a reference "
               "circuit simulator and aggressor sweeps.\n"
               "NOISY_STA_THREADS caps sweep worker threads."};
  app.require_subcommand(1);

  CharacterizeArgs ca;
  auto* c = app.add_subcommand("characterize", "Characterize the receiver with a clean ramp");
  c->add_option("--config", ca.config, "Circuit config whose receiver to use (default model otherwise)");
  c->add_option("--slew-ps", ca.slew_ps, "Input 10-90 slew in ps")->required();
  c->add_option("--load-ff", ca.load_ff, "Output load in fF (default: receiver c_load)");
  c->add_option("--stages", ca.stages, "Inverter stages")->check(CLI::PositiveNumber);
  c->add_option("--drive", ca.drive, "Drive strength multiplier");
  c->add_option("--out", ca.out, "Characterization JSON to write")->required();
  c->add_option("--csv-prefix", ca.csv_prefix, "Also write <prefix>_in.csv and <prefix>_out.csv");

  FitArgs fa;
  auto* f = app.add_subcommand("fit", "Fit an equivalent line to a noisy waveform");
  f->add_option("--method", fa.method, "p1, p2, lsf3, e4, wls5 or sgdp")->required();
  f->add_option("--char", fa.characterization, "Characterization JSON")->required();
  f->add_option("--in", fa.input, "Waveform CSV (time_s,voltage_v)")->required();
  f->add_option("--samples", fa.samples, "Sample count P")->capture_default_str();
  f->add_option("--sgdp-objective", fa.objective, "squared or literal")->capture_default_str();
  f->add_option("--noiseless-arrival-ps", fa.noiseless_arrival_ps,
                "Noiseless 0.5*vdd arrival at this node, in ps");
  f->add_option("--out", fa.out, "Write the JSON result here instead of stdout");

  SimulateArgs sa;
  auto* s = app.add_subcommand("simulate", "Run the reference simulator");
  s->add_option("--config", sa.config, "Circuit config with 'stimuli' or a 'sweep' section")->required();
  s->add_option("--out-dir", sa.out_dir, "Directory for <node>.csv waveforms")->required();
  s->add_option("--offset-ps", sa.offset_ps, "Aggressor offset for sweep configs (default: first)");
  s->add_flag("--quiet-aggressors", sa.quiet, "Hold aggressors at their rail (sweep configs)");
  s->add_option("--observe", sa.observe, "Node to record (repeatable): line.near, line.far, line.K, rx.in, rx.out, rx.sN");

  SweepArgs wa;
  auto* w = app.add_subcommand("sweep", "Score every method over an aggressor-offset sweep");
  w->add_option("--config", wa.config, "Sweep config JSON")->required();
  w->add_option("--methods", wa.methods, "'all' or a comma list")->capture_default_str();
  w->add_option("--out", wa.out, "Report file (stdout otherwise)");
  w->add_option("--csv", wa.csv, "Per-case CSV");
  w->add_option("--format", wa.format, "plain or markdown")->capture_default_str();
  w->add_option("--threads", wa.threads, "Worker threads (also capped by NOISY_STA_THREADS)")
      ->check(CLI::PositiveNumber);
  w->add_option("--error-reference", wa.reference, "absolute or noiseless-calibrated");
  w->add_option("--count", wa.count, "Override the offset count, keeping the window");
  w->add_option("--samples", wa.samples, "Override the sample count P");
  w->add_option("--sgdp-objective", wa.objective, "squared or literal");
  w->add_option("--coupling-scale", wa.coupling_scale, "Multiply every coupling capacitor");

  ReportArgs ra;
  auto* r = app.add_subcommand("report", "Print defaults or tabulate cases CSVs");
  r->add_flag("--defaults", ra.defaults, "Print every default setting as JSON");
  r->add_option("--cases", ra.cases, "Cases CSV from 'sweep --csv' (repeatable)");
  r->add_option("--name", ra.names, "Column name per --cases file (repeatable)");
  r->add_option("--format", ra.format, "plain or markdown")->capture_default_str();
  r->add_option("--out", ra.out, "Write the report here instead of stdout");

  // top-level --help lists every subcommand's flags
  app.set_help_flag();
  app.set_help_all_flag("-h,--help", "Print help for every subcommand and flag");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*c)
      run_characterize(ca);
    else if (*f)
      run_fit(fa);
    else if (*s)
      run_simulate(sa);
    else if (*w)
      run_sweep_cmd(wa);
    else if (*r)
      run_report(ra);
  } catch (const UsageError& e) {
    std::cerr << "noisy-sta: " << e.what() << "\n";
    return kUsage;
  } catch (const nsta::ConfigError& e) {
    std::cerr << "noisy-sta: invalid configuration: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "noisy-sta: " << e.what() << "\n";
    return kRuntime;
  }
  return 0;
}
