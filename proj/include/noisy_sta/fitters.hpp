#ifndef NOISY_STA_FITTERS_HPP
#define NOISY_STA_FITTERS_HPP

// Equivalent linear waveform construction for noisy rising transitions.
//
//   P1    noiseless slew, anchored at the latest 0.5*vdd crossing
//   P2    earliest 10% to latest 90% span, same anchor
//   LSF3  least squares over the noisy critical region
//   E4    area matching above the latest 0.5*vdd crossing
//   WLS5  least squares weighted by the noiseless sensitivity
//   SGDP  output-error minimisation through the sensitivity seen by the
//         noisy input, with a second-order term in d rho / d v_in
//
// Falling records are mirrored into the rising frame by fit().

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "noisy_sta/characterize.hpp"
#include "noisy_sta/errors.hpp"
#include "noisy_sta/waveform.hpp"

namespace nsta {

enum class Method { P1, P2, LSF3, E4, WLS5, SGDP };

inline constexpr std::array<Method, 6> kAllMethods{Method::P1,  Method::P2,   Method::LSF3,
                                                   Method::E4,  Method::WLS5, Method::SGDP};

inline const char* to_string(Method m) {
  switch (m) {
  case Method::P1: return "P1";
  case Method::P2: return "P2";
  case Method::LSF3: return "LSF3";
  case Method::E4: return "E4";
  case Method::WLS5: return "WLS5";
  case Method::SGDP: return "SGDP";
  }
  return "?";
}

inline std::optional<Method> parse_method(std::string_view s) {
  std::string lower(s);
  for (auto& c : lower)
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (Method m : kAllMethods) {
    std::string name = to_string(m);
    for (auto& c : name)
      c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (name == lower)
      return m;
  }
  return std::nullopt;
}

enum class SgdpObjective { Squared, Literal };

struct FitSettings {
  std::size_t samples = 35;
  SgdpObjective sgdp_objective = SgdpObjective::Squared;
  int gauss_newton_max_iters = 50;
  double param_tol = 1e-9;
  bool grid_fallback = true;

  void validate() const {
    if (samples < 4)
      throw ConfigError("fit needs at least 4 samples");
    if (gauss_newton_max_iters < 1)
      throw ConfigError("Gauss-Newton needs at least one iteration");
    if (!(param_tol > 0))
      throw ConfigError("parameter tolerance must be positive");
  }
};

/// Optional knowledge about the noiseless transition at the fitted node.
struct NoiselessReference {
  /// Noiseless input record (used for the P1 slew).
  std::optional<SampledWaveform> input;
  /// Noiseless 0.5*vdd arrival; places the characterization in time.
  std::optional<double> arrival;
};

struct FitDiagnostics {
  double objective = 0.0;
  int iterations = 0;
  bool converged = true;
  bool shift_applied = false;
  double shift = 0.0;
  double window_start = 0.0;
  double window_end = 0.0;
  std::size_t samples = 0;
  bool fallback = false;
  std::string note;
};

struct FitResult {
  LinearWaveform gamma;
  Method method;
  FitDiagnostics diagnostics;
};

namespace detail {

/// Centred, scaled time axis for well-conditioned 2x2 solves.
struct TimeFrame {
  double centre;
  double scale;
  double to_tau(double t) const { return (t - centre) / scale; }
  LinearWaveform to_line(double alpha, double beta, double vdd) const {
    double a = alpha / scale;
    return LinearWaveform(a, beta - a * centre, vdd);
  }
  std::array<double, 2> from_line(const LinearWaveform& l) const {
    return {l.a() * scale, l.value(centre)};
  }
};

inline TimeFrame frame_for(double t0, double t1) {
  return {0.5 * (t0 + t1), 0.5 * (t1 - t0)};
}

struct Samples {
  std::vector<double> t;
  std::vector<double> tau;
  std::vector<double> v;
  TimeFrame frame;
};

inline Samples sample_window(const SampledWaveform& wf, double t0, double t1, std::size_t count) {
  Samples s{uniform_times(t0, t1, count), {}, {}, frame_for(t0, t1)};
  s.tau.resize(count);
  s.v.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    s.tau[k] = s.frame.to_tau(s.t[k]);
    s.v[k] = interpolate(wf, s.t[k]);
  }
  return s;
}

/// argmin sum w_k (v_k - alpha tau_k - beta)^2 in the scaled frame.
inline std::optional<std::array<double, 2>> weighted_ls(std::span<const double> tau,
                                                        std::span<const double> v,
                                                        std::span<const double> w) {
  double s_w = 0, s_t = 0, s_tt = 0, s_v = 0, s_tv = 0;
  for (std::size_t k = 0; k < tau.size(); ++k) {
    double wk = w.empty() ? 1.0 : w[k];
    s_w += wk;
    s_t += wk * tau[k];
    s_tt += wk * tau[k] * tau[k];
    s_v += wk * v[k];
    s_tv += wk * tau[k] * v[k];
  }
  double det = s_tt * s_w - s_t * s_t;
  if (!(s_w > 0) || !(std::abs(det) > 1e-14 * s_w * s_w))
    return std::nullopt;
  double alpha = (s_tv * s_w - s_t * s_v) / det;
  double beta = (s_tt * s_v - s_t * s_tv) / det;
  return std::array<double, 2>{alpha, beta};
}

inline double weighted_sse(std::span<const double> tau, std::span<const double> v,
                           std::span<const double> w, double alpha, double beta) {
  double s = 0;
  for (std::size_t k = 0; k < tau.size(); ++k) {
    double e = v[k] - alpha * tau[k] - beta;
    s += (w.empty() ? 1.0 : w[k]) * e * e;
  }
  return s;
}

inline LinearWaveform mirror_line(const LinearWaveform& l) {
  return LinearWaveform(-l.a(), l.vdd() - l.b(), l.vdd());
}

inline void require_rising(const SampledWaveform& wf) {
  if (wf.direction() != Direction::Rising)
    throw InvalidWaveform("fitters expect a rising record; mirror falling edges first");
}

} // namespace detail

// ---- point based ------------------------------------------------------------

inline FitResult fit_p1(const SampledWaveform& noisy, const NoiselessCharacterization& ch,
                        const NoiselessReference& ref = {}) {
  detail::require_rising(noisy);
  const double vdd = noisy.vdd();
  const double anchor = arrival_time(noisy);
  FitDiagnostics d;
  double slew;
  if (ref.input) {
    slew = slew_10_90(as_rising(*ref.input));
    d.note = "slew from noiseless input record";
  } else {
    slew = slew_10_90(ch.v_in_ref);
    d.note = "slew from characterization ramp";
  }
  if (!(slew > 0))
    throw NotATransition("noiseless slew is zero");
  d.window_start = d.window_end = anchor;
  return {LinearWaveform::through(0.8 * vdd / slew, anchor, 0.5 * vdd, vdd), Method::P1, d};
}

inline FitResult fit_p2(const SampledWaveform& noisy) {
  detail::require_rising(noisy);
  const double vdd = noisy.vdd();
  const double anchor = arrival_time(noisy);
  const double t10 = require_first_crossing(noisy, 0.1 * vdd);
  const double t90 = require_last_crossing(noisy, 0.9 * vdd);
  const double slew = t90 - t10;
  if (!(slew > 0))
    throw NotATransition("noisy 10-90 span is not positive");
  FitDiagnostics d;
  d.window_start = t10;
  d.window_end = t90;
  return {LinearWaveform::through(0.8 * vdd / slew, anchor, 0.5 * vdd, vdd), Method::P2, d};
}

// ---- least squares ------------------------------------------------------------

inline FitResult fit_lsf3(const SampledWaveform& noisy, const FitSettings& settings = {}) {
  detail::require_rising(noisy);
  settings.validate();
  const auto region = critical_region(noisy, CriticalRegion::Kind::Noisy);
  auto s = detail::sample_window(noisy, region.t_first, region.t_last, settings.samples);
  auto sol = detail::weighted_ls(s.tau, s.v, {});
  if (!sol)
    throw DegenerateFit("least-squares system is singular");
  FitDiagnostics d;
  d.objective = detail::weighted_sse(s.tau, s.v, {}, (*sol)[0], (*sol)[1]);
  d.window_start = region.t_first;
  d.window_end = region.t_last;
  d.samples = settings.samples;
  return {s.frame.to_line((*sol)[0], (*sol)[1], noisy.vdd()), Method::LSF3, d};
}

// ---- area based ------------------------------------------------------------

/// Area between v = 0.5*vdd and v = vdd enclosed by the waveform to the
/// right of `anchor` (trapezoidal).
inline double upper_band_area(const SampledWaveform& wf, double anchor) {
  const double vdd = wf.vdd();
  auto gap = [&](double v) { return std::clamp(vdd - v, 0.0, 0.5 * vdd); };
  double area = 0;
  double t_prev = anchor;
  double g_prev = gap(interpolate(wf, anchor));
  auto ts = wf.times();
  auto it = std::upper_bound(ts.begin(), ts.end(), anchor);
  for (auto i = static_cast<std::size_t>(it - ts.begin()); i < wf.size(); ++i) {
    double g = gap(wf.volt(i));
    area += 0.5 * (g + g_prev) * (wf.time(i) - t_prev);
    t_prev = wf.time(i);
    g_prev = g;
  }
  return area;
}

inline FitResult fit_e4(const SampledWaveform& noisy,
                        const NoiselessCharacterization* fallback_ch = nullptr) {
  detail::require_rising(noisy);
  const double vdd = noisy.vdd();
  const double anchor = arrival_time(noisy);
  const double area = upper_band_area(noisy, anchor);
  FitDiagnostics d;
  d.window_start = anchor;
  d.window_end = noisy.t_end();
  d.objective = area;
  if (!(area > 0)) {
    if (!fallback_ch)
      throw DegenerateFit("E4 area above the anchor is empty");
    auto p1 = fit_p1(noisy, *fallback_ch);
    p1.method = Method::E4;
    p1.diagnostics.fallback = true;
    p1.diagnostics.note = "empty area, P1 slope used";
    return p1;
  }
  const double half = 0.5 * vdd;
  const double slope = half * half / (2.0 * area);
  return {LinearWaveform::through(slope, anchor, half, vdd), Method::E4, d};
}

// ---- sensitivity weighted ------------------------------------------------------

/// Offset that maps characterization time onto the noisy record's time axis.
inline double characterization_offset(const SampledWaveform& noisy,
                                      const NoiselessCharacterization& ch,
                                      const NoiselessReference& ref) {
  if (ref.arrival)
    return *ref.arrival - arrival_time(ch.v_in_ref);
  return require_first_crossing(noisy, 0.1 * noisy.vdd()) - ch.region.t_first;
}

namespace detail {

inline FitResult fit_wls5_aligned(const SampledWaveform& noisy, const NoiselessCharacterization& ch,
                                  const FitSettings& settings, double offset) {
  double t0 = ch.region.t_first + offset;
  double t1 = ch.region.t_last + offset;
  t0 = std::max(t0, noisy.t_begin());
  t1 = std::min(t1, noisy.t_end());
  if (!(t0 < t1))
    throw DegenerateFit("noiseless critical region lies outside the noisy record");
  auto s = sample_window(noisy, t0, t1, settings.samples);
  std::vector<double> w(s.t.size());
  for (std::size_t k = 0; k < w.size(); ++k)
    w[k] = ch.rho_t.at(s.t[k] - offset);
  auto sol = weighted_ls(s.tau, s.v, w);
  if (!sol)
    throw DegenerateFit("WLS5 weights vanish over the noiseless critical region");
  FitDiagnostics d;
  d.objective = weighted_sse(s.tau, s.v, w, (*sol)[0], (*sol)[1]);
  d.window_start = t0;
  d.window_end = t1;
  d.samples = settings.samples;
  return {s.frame.to_line((*sol)[0], (*sol)[1], noisy.vdd()), Method::WLS5, d};
}

} // namespace detail

inline FitResult fit_wls5(const SampledWaveform& noisy, const NoiselessCharacterization& ch,
                          const FitSettings& settings = {}, const NoiselessReference& ref = {}) {
  detail::require_rising(noisy);
  settings.validate();
  const double offset = characterization_offset(noisy, ch, ref);
  if (ch.overlap)
    return detail::fit_wls5_aligned(noisy, ch, settings, offset);
  // Shift into the output's frame, fit, shift the line back.
  const double delta = ch.delta;
  auto r = detail::fit_wls5_aligned(time_shifted(noisy, delta), ch, settings, offset + delta);
  r.gamma = r.gamma.shifted(-delta);
  r.diagnostics.window_start -= delta;
  r.diagnostics.window_end -= delta;
  r.diagnostics.shift_applied = true;
  r.diagnostics.shift = delta;
  return r;
}

/// rho^eff over P uniform samples of the noisy critical region, looked up
/// at the noisy input voltage of each sample.
inline SensitivityProfile rho_eff_map(const SampledWaveform& noisy,
                                      const NoiselessCharacterization& ch,
                                      const FitSettings& settings = {}) {
  detail::require_rising(noisy);
  settings.validate();
  const auto region = critical_region(noisy, CriticalRegion::Kind::Noisy);
  SensitivityProfile p;
  p.t = uniform_times(region.t_first, region.t_last, settings.samples);
  p.rho.resize(p.t.size());
  p.drho_dv.resize(p.t.size());
  for (std::size_t k = 0; k < p.t.size(); ++k) {
    auto [r, dr] = rho_at_voltage(ch, interpolate(noisy, p.t[k]));
    p.rho[k] = r;
    p.drho_dv[k] = dr;
  }
  return p;
}

/// Data of the output-error objective in the scaled frame.
struct SgdpProblem {
  detail::Samples s;
  std::vector<double> rho;
  std::vector<double> drho;
  double vdd;

  double residual(std::size_t k, double alpha, double beta) const {
    double e = s.v[k] - alpha * s.tau[k] - beta;
    return rho[k] * e + 0.5 * drho[k] * e * e;
  }
  /// sum_k r_k^2
  double squared(double alpha, double beta) const {
    double f = 0;
    for (std::size_t k = 0; k < s.t.size(); ++k) {
      double r = residual(k, alpha, beta);
      f += r * r;
    }
    return f;
  }
  /// sum_k r_k, the objective exactly as written without the outer square.
  double literal(double alpha, double beta) const {
    double f = 0;
    for (std::size_t k = 0; k < s.t.size(); ++k)
      f += residual(k, alpha, beta);
    return f;
  }
  /// Gradient of squared() wrt (alpha, beta).
  std::array<double, 2> gradient(double alpha, double beta) const {
    double ga = 0, gb = 0;
    for (std::size_t k = 0; k < s.t.size(); ++k) {
      double e = s.v[k] - alpha * s.tau[k] - beta;
      double r = rho[k] * e + 0.5 * drho[k] * e * e;
      double dr_de = rho[k] + drho[k] * e;
      ga += 2.0 * r * dr_de * -s.tau[k];
      gb += 2.0 * r * dr_de * -1.0;
    }
    return {ga, gb};
  }
  std::array<double, 2> to_params(const LinearWaveform& l) const { return s.frame.from_line(l); }
  LinearWaveform to_line(double alpha, double beta) const {
    return s.frame.to_line(alpha, beta, vdd);
  }
};

inline SgdpProblem make_sgdp_problem(const SampledWaveform& noisy,
                                     const NoiselessCharacterization& ch,
                                     const FitSettings& settings) {
  const auto region = critical_region(noisy, CriticalRegion::Kind::Noisy);
  SgdpProblem p{detail::sample_window(noisy, region.t_first, region.t_last, settings.samples),
                {},
                {},
                noisy.vdd()};
  p.rho.resize(p.s.t.size());
  p.drho.resize(p.s.t.size());
  for (std::size_t k = 0; k < p.s.t.size(); ++k) {
    auto [r, dr] = rho_at_voltage(ch, p.s.v[k]);
    p.rho[k] = r;
    p.drho[k] = dr;
  }
  return p;
}

namespace detail {

/// Starting point: the small-curvature limit sum (rho_k e_k)^2.
inline std::optional<std::array<double, 2>> sgdp_seed(const SgdpProblem& p) {
  std::vector<double> w(p.rho.size());
  for (std::size_t k = 0; k < w.size(); ++k)
    w[k] = p.rho[k] * p.rho[k];
  return weighted_ls(p.s.tau, p.s.v, w);
}

struct GaussNewtonOutcome {
  std::array<double, 2> x;
  double f;
  int iterations;
  bool converged;
};

inline GaussNewtonOutcome gauss_newton(const SgdpProblem& p, std::array<double, 2> x,
                                       const FitSettings& settings) {
  double f = p.squared(x[0], x[1]);
  const double scale = p.vdd;
  for (int it = 1; it <= settings.gauss_newton_max_iters; ++it) {
    Eigen::Matrix2d jtj = Eigen::Matrix2d::Zero();
    Eigen::Vector2d jtr = Eigen::Vector2d::Zero();
    for (std::size_t k = 0; k < p.s.t.size(); ++k) {
      double e = p.s.v[k] - x[0] * p.s.tau[k] - x[1];
      double r = p.rho[k] * e + 0.5 * p.drho[k] * e * e;
      double g = p.rho[k] + p.drho[k] * e;
      Eigen::Vector2d j(-g * p.s.tau[k], -g);
      jtj += j * j.transpose();
      jtr += j * r;
    }
    if (f == 0.0)
      return {x, f, it - 1, true};
    Eigen::Vector2d step = jtj.ldlt().solve(-jtr);
    if (!step.allFinite())
      return {x, f, it, false};
    double lambda = 1.0;
    std::array<double, 2> next{};
    double f_next = f;
    bool improved = false;
    for (int ls = 0; ls < 40; ++ls, lambda *= 0.5) {
      next = {x[0] + lambda * step[0], x[1] + lambda * step[1]};
      f_next = p.squared(next[0], next[1]);
      if (f_next <= f) {
        improved = true;
        break;
      }
    }
    double change = std::max(std::abs(next[0] - x[0]) / std::max(std::abs(x[0]), scale),
                             std::abs(next[1] - x[1]) / std::max(std::abs(x[1]), scale));
    if (!improved)
      return {x, f, it, change < settings.param_tol * 1e3};
    x = next;
    f = f_next;
    if (change < settings.param_tol)
      return {x, f, it, true};
  }
  return {x, f, settings.gauss_newton_max_iters, false};
}

/// Compass search around x, shrinking the pattern until it is below tol.
inline GaussNewtonOutcome pattern_refine(const SgdpProblem& p, std::array<double, 2> x,
                                         double tol) {
  double f = p.squared(x[0], x[1]);
  double step_a = 0.05 * std::max(std::abs(x[0]), p.vdd);
  double step_b = 0.05 * std::max(std::abs(x[1]), p.vdd);
  int evals = 0;
  while (step_a > tol * std::max(std::abs(x[0]), p.vdd) && evals < 20000) {
    bool moved = false;
    for (auto [da, db] : {std::pair{1.0, 0.0}, {-1.0, 0.0}, {0.0, 1.0}, {0.0, -1.0}}) {
      std::array<double, 2> y{x[0] + da * step_a, x[1] + db * step_b};
      double fy = p.squared(y[0], y[1]);
      ++evals;
      if (fy < f) {
        x = y;
        f = fy;
        moved = true;
      }
    }
    if (!moved) {
      step_a *= 0.5;
      step_b *= 0.5;
    }
  }
  return {x, f, evals, true};
}

inline FitResult fit_sgdp_aligned(const SampledWaveform& noisy,
                                  const NoiselessCharacterization& ch,
                                  const FitSettings& settings) {
  auto p = make_sgdp_problem(noisy, ch, settings);
  FitDiagnostics d;
  d.window_start = p.s.t.front();
  d.window_end = p.s.t.back();
  d.samples = settings.samples;
  auto seed = sgdp_seed(p);
  if (!seed)
    throw DegenerateFit("sensitivity vanishes over the noisy critical region");

  if (settings.sgdp_objective == SgdpObjective::Literal) {
    bool any_curvature = false;
    Eigen::Matrix2d m = Eigen::Matrix2d::Zero();
    Eigen::Vector2d rhs = Eigen::Vector2d::Zero();
    for (std::size_t k = 0; k < p.s.t.size(); ++k) {
      const double tau = p.s.tau[k], r = p.rho[k], dr = p.drho[k], v = p.s.v[k];
      any_curvature = any_curvature || dr != 0.0;
      m(0, 0) += dr * tau * tau;
      m(0, 1) += dr * tau;
      m(1, 1) += dr;
      rhs[0] += tau * (r + dr * v);
      rhs[1] += r + dr * v;
    }
    m(1, 0) = m(0, 1);
    Eigen::JacobiSVD<Eigen::Matrix2d> svd(m);
    const auto sv = svd.singularValues();
    const double cond = sv[1] > 0 ? sv[0] / sv[1] : std::numeric_limits<double>::infinity();
    std::array<double, 2> x{};
    bool use_fallback = !any_curvature || !(cond <= 1e12);
    const char* why = "stationarity system singular";
    if (!use_fallback) {
      Eigen::Vector2d sol = m.fullPivLu().solve(rhs);
      x = {sol[0], sol[1]};
      use_fallback = !(sol.allFinite() && x[0] > 0);
      why = "stationary point is not a rising line";
    }
    if (use_fallback) {
      auto ws = weighted_ls(p.s.tau, p.s.v, p.rho);
      if (!ws)
        throw DegenerateFit("sensitivity vanishes over the noisy critical region");
      x = *ws;
      d.fallback = true;
      d.note = std::string(why) + ", rho-weighted least squares used";
    }
    d.objective = p.literal(x[0], x[1]);
    d.iterations = 1;
    return {p.to_line(x[0], x[1]), Method::SGDP, d};
  }

  auto gn = gauss_newton(p, *seed, settings);
  if (!gn.converged && settings.grid_fallback) {
    auto refined = pattern_refine(p, gn.x, settings.param_tol);
    if (refined.f <= gn.f) {
      gn.x = refined.x;
      gn.f = refined.f;
      d.fallback = true;
      d.note = "Gauss-Newton stalled, pattern search refinement applied";
    }
  }
  if (!(gn.x[0] > 0)) {
    gn.x = *seed;
    gn.f = p.squared(gn.x[0], gn.x[1]);
    gn.converged = false;
    d.fallback = true;
    d.note = "non-rising iterate, seed returned";
  }
  d.objective = gn.f;
  d.iterations = gn.iterations;
  d.converged = gn.converged;
  return {p.to_line(gn.x[0], gn.x[1]), Method::SGDP, d};
}

} // namespace detail

inline FitResult fit_sgdp(const SampledWaveform& noisy, const NoiselessCharacterization& ch,
                          const FitSettings& settings = {}) {
  detail::require_rising(noisy);
  settings.validate();
  if (ch.overlap)
    return detail::fit_sgdp_aligned(noisy, ch, settings);
  const double delta = ch.delta;
  auto r = detail::fit_sgdp_aligned(time_shifted(noisy, delta), ch, settings);
  r.gamma = r.gamma.shifted(-delta);
  r.diagnostics.window_start -= delta;
  r.diagnostics.window_end -= delta;
  r.diagnostics.shift_applied = true;
  r.diagnostics.shift = delta;
  return r;
}

/// Any method on a record of either polarity; falling records are fitted
/// in the mirrored frame and the line is mirrored back.
inline FitResult fit(Method method, const SampledWaveform& noisy,
                     const NoiselessCharacterization& ch, const FitSettings& settings = {},
                     const NoiselessReference& ref = {}) {
  const bool falling = noisy.direction() == Direction::Falling;
  const SampledWaveform rising = falling ? mirror_falling(noisy) : noisy;
  NoiselessReference r = ref;
  if (falling && r.input)
    r.input = as_rising(*r.input);
  FitResult out = [&] {
    switch (method) {
    case Method::P1: return fit_p1(rising, ch, r);
    case Method::P2: return fit_p2(rising);
    case Method::LSF3: return fit_lsf3(rising, settings);
    case Method::E4: return fit_e4(rising, &ch);
    case Method::WLS5: return fit_wls5(rising, ch, settings, r);
    case Method::SGDP: return fit_sgdp(rising, ch, settings);
    }
    throw ConfigError("unknown method");
  }();
  if (falling)
    out.gamma = detail::mirror_line(out.gamma);
  return out;
}

/// First-order output reconstruction along the SGDP samples:
/// v_out_ref(aligned) + rho_eff * (line - v_noisy). Inspection only.
inline SampledWaveform predict_output_first_order(const NoiselessCharacterization& ch,
                                                  const LinearWaveform& gamma,
                                                  const SampledWaveform& noisy,
                                                  const FitSettings& settings = {},
                                                  const NoiselessReference& ref = {}) {
  detail::require_rising(noisy);
  const double offset = characterization_offset(noisy, ch, ref);
  auto prof = rho_eff_map(noisy, ch, settings);
  std::vector<double> v(prof.size());
  for (std::size_t k = 0; k < prof.size(); ++k) {
    double tr = std::clamp(prof.t[k] - offset, ch.v_out_ref.t_begin(), ch.v_out_ref.t_end());
    double base = interpolate(ch.v_out_ref, tr);
    v[k] = base + prof.rho[k] * (gamma.value(prof.t[k]) - interpolate(noisy, prof.t[k]));
  }
  return SampledWaveform(prof.t, std::move(v), noisy.vdd(), ch.v_out_ref.direction());
}

} // namespace nsta

#endif // NOISY_STA_FITTERS_HPP
