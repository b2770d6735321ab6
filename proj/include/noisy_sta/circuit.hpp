#ifndef NOISY_STA_CIRCUIT_HPP
#define NOISY_STA_CIRCUIT_HPP

// Transient reference simulator: coupled RC ladders driven by ramp sources
// through driver resistances, with a nonlinear inverter receiver on the
// victim far end. Trapezoidal integration at a fixed step; the linear
// network is factored once, receiver stages are solved by Newton per step.

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "noisy_sta/errors.hpp"
#include "noisy_sta/waveform.hpp"

namespace nsta {

struct LineSpec {
  std::string name;
  double length_um = 1000.0;
  double r_per_um = 0.85;     // ohm / um
  double c_per_um = 0.48e-15; // F / um
  int segments = 100;
  double far_end_load = 0.0; // F, linear capacitor at the far end

  double total_r() const { return r_per_um * length_um; }
  double total_c() const { return c_per_um * length_um; }
  double segment_r() const { return total_r() / segments; }
  double segment_c() const { return total_c() / segments; }
};

struct CouplingSpec {
  std::string line_a;
  std::string line_b;
  double total_c = 0.0; // F
};

/// Alpha-power-law CMOS inverter (or a chain of identical inverters).
struct InverterModel {
  double vdd = 1.2;
  double vth_n = 0.36;
  double vth_p = 0.36;
  double alpha = 1.3;
  double i_on_n = 0.55e-3; // A per unit drive at |vgs| = vdd, saturated
  double i_on_p = 0.55e-3;
  double drive_strength = 4.0;
  int stages = 1;
  double c_out_per_stage = 5e-15;
  double c_load = 30e-15;   // extra load on the final stage output (about FO4)
  double vdsat_full = 0.5;  // saturation voltage at |vgs| = vdd

  void validate() const {
    if (!(vdd > 0))
      throw ConfigError("inverter vdd must be positive");
    if (!(vth_n > 0 && vth_n < vdd && vth_p > 0 && vth_p < vdd))
      throw ConfigError("inverter thresholds must lie in (0, vdd)");
    if (!(alpha >= 1.0 && alpha <= 2.0))
      throw ConfigError("inverter alpha must lie in [1, 2]");
    if (!(i_on_n > 0 && i_on_p > 0))
      throw ConfigError("inverter on-currents must be positive");
    if (!(drive_strength > 0))
      throw ConfigError("inverter drive strength must be positive");
    if (stages < 1)
      throw ConfigError("inverter needs at least one stage");
    if (!(c_out_per_stage > 0) || c_load < 0)
      throw ConfigError("inverter capacitances must be positive");
    if (!(vdsat_full > 0))
      throw ConfigError("inverter vdsat_full must be positive");
  }

  double stage_cap(int stage) const {
    return c_out_per_stage + (stage == stages - 1 ? c_load : 0.0);
  }
};

/// Idealised memoryless gate v_out(t) = gain * v_in(t - delay) + offset.
/// Unclipped; used for identity and analytic sensitivity checks.
struct LinearGate {
  double vdd = 1.2;
  double gain = 1.0;
  double offset = 0.0;
  double delay = 0.0;
};

using GateModel = std::variant<InverterModel, LinearGate>;

inline double gate_vdd(const GateModel& g) {
  return std::visit([](const auto& m) { return m.vdd; }, g);
}

inline bool gate_inverts(const GateModel& g) {
  if (const auto* inv = std::get_if<InverterModel>(&g))
    return inv->stages % 2 == 1;
  return std::get<LinearGate>(g).gain < 0;
}

struct Stimulus {
  std::string line;
  double start_time = 0.0;
  double slew = 150e-12; // 10-90
  Direction direction = Direction::Rising;
  std::optional<double> amplitude; // defaults to vdd

  double initial(double vdd) const { return direction == Direction::Rising ? 0.0 : vdd; }
  double final_value(double vdd) const {
    double amp = amplitude.value_or(vdd);
    return direction == Direction::Rising ? amp : vdd - amp;
  }
  double end_time() const { return start_time + slew / 0.8; }
  double value(double t, double vdd) const {
    double x = std::clamp((t - start_time) / (slew / 0.8), 0.0, 1.0);
    return initial(vdd) + x * (final_value(vdd) - initial(vdd));
  }
};

struct CircuitConfig {
  double vdd = 1.2;
  std::vector<LineSpec> lines;
  std::vector<CouplingSpec> couplings;
  std::vector<double> driver_r; // ohm, one per line
  std::optional<InverterModel> receiver;
  std::string victim;
  double dt = 0.1e-12;
  double t_stop = 3e-9;
  std::vector<std::string> observed;
};

// ---- device model ---------------------------------------------------------

namespace detail {

struct MosEval {
  double i = 0;    // drain current, vds >= 0 orientation
  double d_vgs = 0;
  double d_vds = 0;
};

inline MosEval alpha_power(double vgs, double vds, double vth, double vdd, double alpha,
                           double i_on, double vdsat_full) {
  MosEval r;
  const double ov = vgs - vth;
  if (ov <= 0)
    return r;
  const double ov_full = vdd - vth;
  const double k = i_on / std::pow(ov_full, alpha);
  const double idsat = k * std::pow(ov, alpha);
  const double didsat = alpha * idsat / ov;
  const double vdsat = vdsat_full * std::pow(ov / ov_full, 0.5 * alpha);
  const double dvdsat = 0.5 * alpha * vdsat / ov;
  if (vds >= vdsat) {
    r.i = idsat;
    r.d_vgs = didsat;
    return r;
  }
  const double x = vds / vdsat;
  const double shape = x * (2.0 - x);
  r.i = idsat * shape;
  r.d_vds = idsat * (2.0 - 2.0 * x) / vdsat;
  const double dx_dvgs = -x / vdsat * dvdsat;
  r.d_vgs = didsat * shape + idsat * (2.0 - 2.0 * x) * dx_dvgs;
  return r;
}

struct StageCurrent {
  double i;       // into the output node
  double d_vout;  // partial derivative wrt output voltage
};

inline StageCurrent inverter_current(double v_in, double v_out, const InverterModel& m) {
  const double scale = m.drive_strength;
  // NMOS: current leaving the output node towards ground.
  double in_n, din_n;
  if (v_out >= 0) {
    auto e = alpha_power(v_in, v_out, m.vth_n, m.vdd, m.alpha, m.i_on_n, m.vdsat_full);
    in_n = e.i;
    din_n = e.d_vds;
  } else {
    auto e = alpha_power(v_in - v_out, -v_out, m.vth_n, m.vdd, m.alpha, m.i_on_n,
                         m.vdsat_full);
    in_n = -e.i;
    din_n = e.d_vgs + e.d_vds;
  }
  // PMOS: current entering the output node from vdd.
  double ip, dip;
  if (v_out <= m.vdd) {
    auto e = alpha_power(m.vdd - v_in, m.vdd - v_out, m.vth_p, m.vdd, m.alpha, m.i_on_p,
                         m.vdsat_full);
    ip = e.i;
    dip = -e.d_vds;
  } else {
    auto e = alpha_power(v_out - v_in, v_out - m.vdd, m.vth_p, m.vdd, m.alpha, m.i_on_p,
                         m.vdsat_full);
    ip = -e.i;
    dip = -(e.d_vgs + e.d_vds);
  }
  return {scale * (ip - in_n), scale * (dip - din_n)};
}

} // namespace detail

/// Current into the inverter output node (pull-up minus pull-down).
inline double receiver_current(double v_in, double v_out, const InverterModel& model) {
  return detail::inverter_current(v_in, v_out, model).i;
}

/// Static output voltage of one inverter stage for a fixed input.
inline double inverter_dc_output(double v_in, const InverterModel& m) {
  // Output current is monotone decreasing in v_out, non-negative at 0 and
  // non-positive at vdd.
  double lo = 0.0, hi = m.vdd;
  double v = v_in < 0.5 * m.vdd ? m.vdd : 0.0;
  for (int it = 0; it < 200; ++it) {
    auto s = detail::inverter_current(v_in, v, m);
    if (s.i == 0.0)
      return v;
    if (s.i > 0)
      lo = v;
    else
      hi = v;
    double next = s.d_vout < 0 ? v - s.i / s.d_vout : 0.5 * (lo + hi);
    if (!(next > lo && next < hi))
      next = 0.5 * (lo + hi);
    if (std::abs(next - v) < 1e-12 || hi - lo < 1e-12)
      return next;
    v = next;
  }
  return v;
}

// ---- receiver integration -------------------------------------------------

inline constexpr double kNewtonTol = 1e-6;
inline constexpr int kNewtonMaxIter = 20;

/// Trapezoidal integrator for a chain of inverter stages driven by a known
/// input voltage.
class ReceiverChain {
public:
  explicit ReceiverChain(InverterModel model) : m_(std::move(model)) {
    m_.validate();
    v_.assign(static_cast<std::size_t>(m_.stages), 0.0);
  }

  const InverterModel& model() const { return m_; }
  std::span<const double> outputs() const { return v_; }
  double output() const { return v_.back(); }

  void set_dc(double v_in) {
    double x = v_in;
    for (auto& v : v_) {
      v = inverter_dc_output(x, m_);
      x = v;
    }
  }

  /// Advance from input vin0 to vin1 over h. Falls back to two levels of
  /// step halving when Newton fails.
  void advance(double vin0, double vin1, double h) {
    std::vector<double> saved = v_;
    for (int level = 0; level <= 2; ++level) {
      const int sub = 1 << level;
      bool ok = true;
      for (int k = 0; k < sub && ok; ++k) {
        double a = vin0 + (vin1 - vin0) * k / sub;
        double b = vin0 + (vin1 - vin0) * (k + 1) / sub;
        ok = try_step(a, b, h / sub);
      }
      if (ok)
        return;
      v_ = saved;
    }
    throw SimulationDiverged("receiver Newton iteration failed to converge");
  }

private:
  bool try_step(double vin0, double vin1, double h) {
    double x0 = vin0, x1 = vin1;
    for (int s = 0; s < m_.stages; ++s) {
      const double cap = m_.stage_cap(s);
      const double g = 2.0 * cap / h;
      const double y0 = v_[static_cast<std::size_t>(s)];
      const double i0 = detail::inverter_current(x0, y0, m_).i;
      double y = y0;
      bool converged = false;
      for (int it = 0; it < kNewtonMaxIter; ++it) {
        auto c = detail::inverter_current(x1, y, m_);
        double f = g * (y - y0) - c.i - i0;
        double df = g - c.d_vout;
        double dy = -f / df;
        dy = std::clamp(dy, -0.5 * m_.vdd, 0.5 * m_.vdd);
        y += dy;
        if (!std::isfinite(y))
          return false;
        if (std::abs(dy) < kNewtonTol) {
          converged = true;
          break;
        }
      }
      if (!converged)
        return false;
      v_[static_cast<std::size_t>(s)] = y;
      x0 = y0;
      x1 = y;
    }
    return true;
  }

  InverterModel m_;
  std::vector<double> v_;
};

/// Drives a gate with a sampled input; returns one waveform per stage output
/// on the input's own time grid. The inverter starts from its DC point.
inline std::vector<SampledWaveform> run_gate(const GateModel& gate, const SampledWaveform& input) {
  const double vdd = gate_vdd(gate);
  std::vector<double> t(input.times().begin(), input.times().end());
  if (const auto* lin = std::get_if<LinearGate>(&gate)) {
    std::vector<double> v(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
      double tt = std::clamp(t[i] - lin->delay, input.t_begin(), input.t_end());
      v[i] = lin->gain * interpolate(input, tt) + lin->offset;
    }
    Direction d = lin->gain >= 0 ? input.direction() : opposite(input.direction());
    return {SampledWaveform(std::move(t), std::move(v), vdd, d)};
  }
  const auto& inv = std::get<InverterModel>(gate);
  ReceiverChain chain(inv);
  chain.set_dc(input.volt(0));
  const auto stages = static_cast<std::size_t>(inv.stages);
  std::vector<std::vector<double>> out(stages, std::vector<double>(t.size()));
  for (std::size_t s = 0; s < stages; ++s)
    out[s][0] = chain.outputs()[s];
  for (std::size_t i = 1; i < t.size(); ++i) {
    chain.advance(input.volt(i - 1), input.volt(i), t[i] - t[i - 1]);
    for (std::size_t s = 0; s < stages; ++s)
      out[s][i] = chain.outputs()[s];
  }
  std::vector<SampledWaveform> result;
  Direction d = input.direction();
  for (std::size_t s = 0; s < stages; ++s) {
    d = opposite(d);
    result.emplace_back(t, std::move(out[s]), vdd, d);
  }
  return result;
}

/// Final-stage output of a gate driven by `input`.
inline SampledWaveform gate_output(const GateModel& gate, const SampledWaveform& input) {
  return run_gate(gate, input).back();
}

/// Latest output 0.5*vdd crossing minus latest input 0.5*vdd crossing.
inline double measure_gate_delay(const SampledWaveform& v_in, const SampledWaveform& v_out) {
  return arrival_time(v_out) - arrival_time(v_in);
}

// ---- linear network -------------------------------------------------------

inline constexpr double kMinDriverR = 1e-6;

class Circuit {
public:
  explicit Circuit(CircuitConfig config) : cfg_(std::move(config)) { build(); }

  const CircuitConfig& config() const { return cfg_; }
  std::size_t node_count() const { return node_count_; }
  std::size_t line_node(std::size_t line, int k) const {
    return line_base_[line] + static_cast<std::size_t>(k);
  }
  std::size_t line_index(const std::string& name) const {
    for (std::size_t i = 0; i < cfg_.lines.size(); ++i)
      if (cfg_.lines[i].name == name)
        return i;
    throw ConfigError("unknown line '" + name + "'");
  }
  /// Capacitance matrix entry: total node capacitance on the diagonal,
  /// negated coupling capacitance off it.
  double capacitance(std::size_t a, std::size_t b) const { return cap_.coeff(a, b); }

  /// Runs a transient from the DC point at t = 0 to t_stop. Returns the
  /// observed nodes (config.observed, or victim far end and receiver output
  /// when empty).
  std::map<std::string, SampledWaveform> simulate(const std::vector<Stimulus>& stimuli) const {
    const double vdd = cfg_.vdd;
    const double h = cfg_.dt;
    std::vector<const Stimulus*> by_line(cfg_.lines.size(), nullptr);
    for (const auto& s : stimuli) {
      std::size_t li = line_index(s.line);
      if (by_line[li])
        throw ConfigError("two stimuli drive line '" + s.line + "'");
      if (!(s.slew > 0))
        throw ConfigError("stimulus slew must be positive");
      by_line[li] = &s;
    }
    auto source = [&](std::size_t li, double t) {
      return by_line[li] ? by_line[li]->value(t, vdd) : 0.0;
    };
    auto fill_b = [&](Eigen::VectorXd& b, double t) {
      b.setZero();
      for (std::size_t li = 0; li < cfg_.lines.size(); ++li)
        b[static_cast<Eigen::Index>(line_node(li, 0))] = g_drv_[li] * source(li, t);
    };

    const auto n = static_cast<Eigen::Index>(node_count_);
    Eigen::VectorXd v(n), b0(n), b1(n), rhs(n);
    fill_b(b0, 0.0);
    v = dc_solver_.solve(b0);

    std::optional<ReceiverChain> rx;
    std::size_t rx_in = 0;
    if (cfg_.receiver) {
      rx.emplace(*cfg_.receiver);
      rx_in = line_node(victim_, cfg_.lines[victim_].segments);
      rx->set_dc(v[static_cast<Eigen::Index>(rx_in)]);
    }

    auto probes = resolve_observed();
    const auto steps = static_cast<std::size_t>(std::llround(cfg_.t_stop / h));
    std::vector<double> times(steps + 1);
    std::vector<std::vector<double>> rec(probes.size(), std::vector<double>(steps + 1));
    auto record = [&](std::size_t i) {
      for (std::size_t p = 0; p < probes.size(); ++p) {
        const auto& pr = probes[p];
        rec[p][i] = pr.stage >= 0 ? rx->outputs()[static_cast<std::size_t>(pr.stage)]
                                  : v[static_cast<Eigen::Index>(pr.node)];
      }
    };
    times[0] = 0.0;
    record(0);
    for (std::size_t i = 1; i <= steps; ++i) {
      const double t1 = h * static_cast<double>(i);
      times[i] = t1;
      fill_b(b1, t1);
      rhs.noalias() = step_rhs_ * v;
      rhs += b0;
      rhs += b1;
      const double vin0 = rx ? v[static_cast<Eigen::Index>(rx_in)] : 0.0;
      v = solver_.solve(rhs);
      if (rx)
        rx->advance(vin0, v[static_cast<Eigen::Index>(rx_in)], h);
      record(i);
      std::swap(b0, b1);
    }

    std::map<std::string, SampledWaveform> out;
    for (std::size_t p = 0; p < probes.size(); ++p)
      out.emplace(probes[p].name, SampledWaveform(times, std::move(rec[p]), vdd));
    return out;
  }

private:
  struct Probe {
    std::string name;
    std::size_t node = 0;
    int stage = -1;
  };

  std::vector<Probe> resolve_observed() const {
    std::vector<std::string> names = cfg_.observed;
    if (names.empty()) {
      names.push_back(cfg_.lines[victim_].name + ".far");
      if (cfg_.receiver)
        names.push_back("rx.out");
    }
    std::vector<Probe> probes;
    for (const auto& name : names)
      probes.push_back(resolve(name));
    return probes;
  }

  Probe resolve(const std::string& name) const {
    Probe p{name};
    if (name.rfind("rx.", 0) == 0) {
      if (!cfg_.receiver)
        throw ConfigError("node '" + name + "' needs a receiver");
      std::string rest = name.substr(3);
      const int stages = cfg_.receiver->stages;
      if (rest == "in") {
        p.node = line_node(victim_, cfg_.lines[victim_].segments);
        return p;
      }
      if (rest == "out") {
        p.stage = stages - 1;
        return p;
      }
      if (rest.size() > 1 && rest[0] == 's') {
        int s = std::stoi(rest.substr(1));
        if (s >= 1 && s <= stages) {
          p.stage = s - 1;
          return p;
        }
      }
      throw ConfigError("unknown receiver node '" + name + "'");
    }
    auto dot = name.rfind('.');
    if (dot == std::string::npos)
      throw ConfigError("node name '" + name + "' must be <line>.<near|far|k>");
    std::size_t li = line_index(name.substr(0, dot));
    std::string idx = name.substr(dot + 1);
    const int segs = cfg_.lines[li].segments;
    int k;
    if (idx == "near")
      k = 0;
    else if (idx == "far")
      k = segs;
    else {
      try {
        k = std::stoi(idx);
      } catch (const std::exception&) {
        throw ConfigError("bad node index in '" + name + "'");
      }
    }
    if (k < 0 || k > segs)
      throw ConfigError("node index out of range in '" + name + "'");
    p.node = line_node(li, k);
    return p;
  }

  void build() {
    if (!(cfg_.vdd > 0))
      throw ConfigError("vdd must be positive");
    if (cfg_.lines.empty())
      throw ConfigError("circuit needs at least one line");
    if (!(cfg_.dt > 0))
      throw ConfigError("dt must be positive");
    if (!(cfg_.t_stop > cfg_.dt))
      throw ConfigError("t_stop must exceed dt");
    if (cfg_.driver_r.size() != cfg_.lines.size())
      throw ConfigError("need one driver resistance per line");
    line_base_.clear();
    node_count_ = 0;
    for (const auto& l : cfg_.lines) {
      if (!(l.length_um > 0))
        throw ConfigError("line '" + l.name + "' length must be positive");
      if (l.segments < 1)
        throw ConfigError("line '" + l.name + "' needs at least one segment");
      if (!(l.r_per_um > 0))
        throw ConfigError("line '" + l.name + "' resistance must be positive");
      if (l.c_per_um < 0 || l.far_end_load < 0)
        throw ConfigError("line '" + l.name + "' capacitance must be non-negative");
      line_base_.push_back(node_count_);
      node_count_ += static_cast<std::size_t>(l.segments) + 1;
    }
    victim_ = cfg_.victim.empty() ? 0 : line_index(cfg_.victim);
    if (cfg_.receiver) {
      cfg_.receiver->validate();
      if (std::abs(cfg_.receiver->vdd - cfg_.vdd) > 1e-12)
        throw ConfigError("receiver vdd differs from circuit vdd");
    }

    using Trip = Eigen::Triplet<double>;
    std::vector<Trip> gt, ct;
    auto stamp2 = [](std::vector<Trip>& m, std::size_t a, std::size_t b, double x) {
      auto ia = static_cast<int>(a), ib = static_cast<int>(b);
      m.emplace_back(ia, ia, x);
      m.emplace_back(ib, ib, x);
      m.emplace_back(ia, ib, -x);
      m.emplace_back(ib, ia, -x);
    };
    auto stamp1 = [](std::vector<Trip>& m, std::size_t a, double x) {
      m.emplace_back(static_cast<int>(a), static_cast<int>(a), x);
    };

    g_drv_.clear();
    for (std::size_t li = 0; li < cfg_.lines.size(); ++li) {
      const auto& l = cfg_.lines[li];
      const double rd = std::max(cfg_.driver_r[li], kMinDriverR);
      if (cfg_.driver_r[li] < 0)
        throw ConfigError("driver resistance must be non-negative");
      g_drv_.push_back(1.0 / rd);
      stamp1(gt, line_node(li, 0), 1.0 / rd);
      const double gs = 1.0 / l.segment_r();
      const double cs = l.segment_c();
      for (int k = 0; k < l.segments; ++k) {
        stamp2(gt, line_node(li, k), line_node(li, k + 1), gs);
        stamp1(ct, line_node(li, k), 0.5 * cs);
        stamp1(ct, line_node(li, k + 1), 0.5 * cs);
      }
      if (l.far_end_load > 0)
        stamp1(ct, line_node(li, l.segments), l.far_end_load);
    }
    for (const auto& c : cfg_.couplings) {
      std::size_t a = line_index(c.line_a), b = line_index(c.line_b);
      if (a == b)
        throw ConfigError("line coupled to itself");
      if (c.total_c < 0)
        throw ConfigError("coupling capacitance must be non-negative");
      const int segs = cfg_.lines[a].segments;
      if (cfg_.lines[b].segments != segs)
        throw ConfigError("coupled lines '" + c.line_a + "' and '" + c.line_b +
                          "' have different segment counts");
      const double cp = c.total_c / segs;
      for (int k = 0; k < segs; ++k) {
        stamp2(ct, line_node(a, k), line_node(b, k), 0.5 * cp);
        stamp2(ct, line_node(a, k + 1), line_node(b, k + 1), 0.5 * cp);
      }
    }

    const auto n = static_cast<Eigen::Index>(node_count_);
    Eigen::SparseMatrix<double> g(n, n), c(n, n);
    g.setFromTriplets(gt.begin(), gt.end());
    c.setFromTriplets(ct.begin(), ct.end());
    cap_ = c;
    const double k = 2.0 / cfg_.dt;
    Eigen::SparseMatrix<double> a = k * c + g;
    step_rhs_ = k * c - g;
    solver_.compute(a);
    dc_solver_.compute(g);
    if (solver_.info() != Eigen::Success || dc_solver_.info() != Eigen::Success)
      throw ConfigError("circuit matrix factorization failed");
  }

  CircuitConfig cfg_;
  std::vector<std::size_t> line_base_;
  std::size_t node_count_ = 0;
  std::size_t victim_ = 0;
  std::vector<double> g_drv_;
  Eigen::SparseMatrix<double> cap_;
  Eigen::SparseMatrix<double> step_rhs_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> dc_solver_;
};

inline Circuit build_circuit(const CircuitConfig& config) { return Circuit(config); }

} // namespace nsta

#endif // NOISY_STA_CIRCUIT_HPP
