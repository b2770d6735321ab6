#ifndef NOISY_STA_WAVEFORM_HPP
#define NOISY_STA_WAVEFORM_HPP

// Sampled and linear waveforms, level crossings, slew and arrival metrics.
// Units are seconds and volts throughout.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "noisy_sta/errors.hpp"

namespace nsta {

enum class Direction { Rising, Falling };

inline Direction opposite(Direction d) {
  return d == Direction::Rising ? Direction::Falling : Direction::Rising;
}

inline const char* to_string(Direction d) {
  return d == Direction::Rising ? "rising" : "falling";
}

struct Sample {
  double t;
  double v;
};

/// Time-ordered piecewise-linear voltage record.
class SampledWaveform {
public:
  SampledWaveform(std::vector<double> times, std::vector<double> volts, double vdd,
                  Direction direction)
      : t_(std::move(times)), v_(std::move(volts)), vdd_(vdd), direction_(direction) {
    validate();
  }

  /// Direction is inferred from the first and last sample.
  SampledWaveform(std::vector<double> times, std::vector<double> volts, double vdd)
      : t_(std::move(times)), v_(std::move(volts)), vdd_(vdd) {
    validate();
    direction_ = v_.back() >= v_.front() ? Direction::Rising : Direction::Falling;
  }

  static SampledWaveform from_samples(std::span<const Sample> samples, double vdd,
                                      std::optional<Direction> direction = std::nullopt) {
    std::vector<double> t, v;
    t.reserve(samples.size());
    v.reserve(samples.size());
    for (const auto& s : samples) {
      t.push_back(s.t);
      v.push_back(s.v);
    }
    if (direction)
      return SampledWaveform(std::move(t), std::move(v), vdd, *direction);
    return SampledWaveform(std::move(t), std::move(v), vdd);
  }

  std::size_t size() const { return t_.size(); }
  std::span<const double> times() const { return t_; }
  std::span<const double> volts() const { return v_; }
  double time(std::size_t i) const { return t_[i]; }
  double volt(std::size_t i) const { return v_[i]; }
  double t_begin() const { return t_.front(); }
  double t_end() const { return t_.back(); }
  double vdd() const { return vdd_; }
  Direction direction() const { return direction_; }

  bool operator==(const SampledWaveform&) const = default;

private:
  void validate() const {
    if (t_.size() != v_.size())
      throw InvalidWaveform("time and voltage vectors differ in length");
    if (t_.size() < 2)
      throw InvalidWaveform("waveform needs at least 2 samples");
    if (!(vdd_ > 0) || !std::isfinite(vdd_))
      throw InvalidWaveform("vdd must be positive");
    for (std::size_t i = 0; i < t_.size(); ++i) {
      if (!std::isfinite(t_[i]) || !std::isfinite(v_[i]))
        throw InvalidWaveform("non-finite sample at index " + std::to_string(i));
      if (i > 0 && !(t_[i] > t_[i - 1]))
        throw InvalidWaveform("sample times not strictly increasing at index " +
                              std::to_string(i));
    }
  }

  std::vector<double> t_;
  std::vector<double> v_;
  double vdd_ = 0.0;
  Direction direction_ = Direction::Rising;
};

/// Equivalent linear waveform v(t) = a*t + b.
class LinearWaveform {
public:
  LinearWaveform(double a, double b, double vdd) : a_(a), b_(b), vdd_(vdd) {
    if (!(a != 0.0) || !std::isfinite(a) || !std::isfinite(b))
      throw InvalidWaveform("linear waveform needs a finite non-zero slope");
    if (!(vdd > 0))
      throw InvalidWaveform("vdd must be positive");
    if (!std::isfinite(arrival_time()) || !std::isfinite(slew_10_90()))
      throw InvalidWaveform("linear waveform arrival/slew not finite");
  }

  /// Line with the given slope passing through (t, v).
  static LinearWaveform through(double slope, double t, double v, double vdd) {
    return LinearWaveform(slope, v - slope * t, vdd);
  }

  double a() const { return a_; }
  double b() const { return b_; }
  double vdd() const { return vdd_; }

  double value(double t) const { return a_ * t + b_; }
  /// Value saturated to the supply rails.
  double clipped(double t) const { return std::clamp(value(t), 0.0, vdd_); }
  double time_at(double v) const { return (v - b_) / a_; }
  double arrival_time() const { return time_at(0.5 * vdd_); }
  double slew_10_90() const { return 0.8 * vdd_ / std::abs(a_); }

  LinearWaveform shifted(double dt) const { return LinearWaveform(a_, b_ - a_ * dt, vdd_); }

  bool operator==(const LinearWaveform&) const = default;

private:
  double a_;
  double b_;
  double vdd_;
};

struct CriticalRegion {
  enum class Kind { Noiseless, Noisy };
  double t_first;
  double t_last;
  Kind kind;

  bool contains(double t) const { return t >= t_first && t <= t_last; }
  double width() const { return t_last - t_first; }
};

inline double interpolate(const SampledWaveform& wf, double t) {
  const auto ts = wf.times();
  const auto vs = wf.volts();
  if (!(t >= ts.front() && t <= ts.back())) {
    std::ostringstream os;
    os << "interpolation time " << t << " outside [" << ts.front() << ", " << ts.back()
       << "]";
    throw RangeError(os.str());
  }
  auto it = std::lower_bound(ts.begin(), ts.end(), t);
  std::size_t hi = static_cast<std::size_t>(it - ts.begin());
  if (ts[hi] == t)
    return vs[hi];
  std::size_t lo = hi - 1;
  double frac = (t - ts[lo]) / (ts[hi] - ts[lo]);
  return vs[lo] + frac * (vs[hi] - vs[lo]);
}

/// Times where the waveform passes through `level` with a sign change.
/// Samples sitting exactly on the level are attributed once, to the start of
/// the on-level run that precedes the sign change. Touches without a sign
/// change are not crossings.
inline std::vector<double> crossing_times(const SampledWaveform& wf, double level) {
  std::vector<double> out;
  const auto ts = wf.times();
  const auto vs = wf.volts();
  int prev_sign = 0;
  std::size_t prev_idx = 0;
  std::optional<std::size_t> first_on_level;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    double d = vs[i] - level;
    int sign = d > 0 ? 1 : (d < 0 ? -1 : 0);
    if (sign == 0) {
      if (!first_on_level)
        first_on_level = i;
      continue;
    }
    if (prev_sign != 0 && sign != prev_sign) {
      if (first_on_level) {
        out.push_back(ts[*first_on_level]);
      } else {
        double frac = (level - vs[prev_idx]) / (vs[i] - vs[prev_idx]);
        double t = ts[prev_idx] + frac * (ts[i] - ts[prev_idx]);
        out.push_back(std::clamp(t, ts[prev_idx], ts[i]));
      }
    }
    prev_sign = sign;
    prev_idx = i;
    first_on_level.reset();
  }
  return out;
}

inline std::optional<double> first_crossing(const SampledWaveform& wf, double level) {
  auto c = crossing_times(wf, level);
  if (c.empty())
    return std::nullopt;
  return c.front();
}

inline std::optional<double> last_crossing(const SampledWaveform& wf, double level) {
  auto c = crossing_times(wf, level);
  if (c.empty())
    return std::nullopt;
  return c.back();
}

inline double require_first_crossing(const SampledWaveform& wf, double level) {
  if (auto t = first_crossing(wf, level))
    return *t;
  throw NotATransition("waveform never crosses " + std::to_string(level) + " V");
}

inline double require_last_crossing(const SampledWaveform& wf, double level) {
  if (auto t = last_crossing(wf, level))
    return *t;
  throw NotATransition("waveform never crosses " + std::to_string(level) + " V");
}

/// Latest 0.5*vdd crossing.
inline double arrival_time(const SampledWaveform& wf) {
  return require_last_crossing(wf, 0.5 * wf.vdd());
}

/// First 10% to last 90% crossing for rising records; mirrored for falling.
inline double slew_10_90(const SampledWaveform& wf) {
  const double lo = 0.1 * wf.vdd();
  const double hi = 0.9 * wf.vdd();
  double span = wf.direction() == Direction::Rising
                    ? require_last_crossing(wf, hi) - require_first_crossing(wf, lo)
                    : require_last_crossing(wf, lo) - require_first_crossing(wf, hi);
  return std::max(span, 0.0);
}

/// [first 0.1*vdd crossing, last 0.9*vdd crossing] of a rising record.
inline CriticalRegion critical_region(const SampledWaveform& wf, CriticalRegion::Kind kind) {
  const double lo = 0.1 * wf.vdd();
  const double hi = 0.9 * wf.vdd();
  CriticalRegion r{};
  r.kind = kind;
  if (wf.direction() == Direction::Rising) {
    r.t_first = require_first_crossing(wf, lo);
    r.t_last = require_last_crossing(wf, hi);
  } else {
    r.t_first = require_first_crossing(wf, hi);
    r.t_last = require_last_crossing(wf, lo);
  }
  if (!(r.t_first < r.t_last))
    throw NotATransition("critical region is empty");
  return r;
}

inline std::vector<double> uniform_times(double t_start, double t_end, std::size_t count) {
  if (!(t_start < t_end))
    throw RangeError("uniform grid needs t_start < t_end");
  if (count < 2)
    throw RangeError("uniform grid needs at least 2 points");
  std::vector<double> t(count);
  const double step = (t_end - t_start) / static_cast<double>(count - 1);
  for (std::size_t k = 0; k < count; ++k)
    t[k] = t_start + step * static_cast<double>(k);
  t.back() = t_end;
  return t;
}

inline SampledWaveform resample_uniform(const SampledWaveform& wf, double t_start,
                                        double t_end, std::size_t count) {
  if (t_start < wf.t_begin() || t_end > wf.t_end())
    throw RangeError("resample window outside waveform span");
  auto t = uniform_times(t_start, t_end, count);
  std::vector<double> v(count);
  for (std::size_t k = 0; k < count; ++k)
    v[k] = interpolate(wf, t[k]);
  return SampledWaveform(std::move(t), std::move(v), wf.vdd(), wf.direction());
}

/// v -> vdd - v. An involution; maps falling transitions onto rising ones.
inline SampledWaveform mirror_falling(const SampledWaveform& wf) {
  std::vector<double> t(wf.times().begin(), wf.times().end());
  std::vector<double> v(wf.size());
  for (std::size_t i = 0; i < wf.size(); ++i)
    v[i] = wf.vdd() - wf.volt(i);
  return SampledWaveform(std::move(t), std::move(v), wf.vdd(), opposite(wf.direction()));
}

inline SampledWaveform as_rising(const SampledWaveform& wf) {
  return wf.direction() == Direction::Rising ? wf : mirror_falling(wf);
}

inline SampledWaveform time_shifted(const SampledWaveform& wf, double dt) {
  std::vector<double> t(wf.size());
  for (std::size_t i = 0; i < wf.size(); ++i)
    t[i] = wf.time(i) + dt;
  std::vector<double> v(wf.volts().begin(), wf.volts().end());
  return SampledWaveform(std::move(t), std::move(v), wf.vdd(), wf.direction());
}

/// Clean saturated ramp between the rails with the given 10-90 slew,
/// starting to move at t_start, sampled every dt over [t_begin, t_end].
inline SampledWaveform saturated_ramp(double vdd, double slew, double t_start, double t_begin,
                                      double t_end, double dt, Direction dir = Direction::Rising) {
  const double duration = slew / 0.8;
  std::size_t n = static_cast<std::size_t>(std::llround((t_end - t_begin) / dt)) + 1;
  std::vector<double> t(n), v(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = t_begin + dt * static_cast<double>(i);
    double x = std::clamp((t[i] - t_start) / duration, 0.0, 1.0);
    v[i] = dir == Direction::Rising ? vdd * x : vdd * (1.0 - x);
  }
  return SampledWaveform(std::move(t), std::move(v), vdd, dir);
}

/// Linear waveform clipped to the rails, sampled at the given times.
inline SampledWaveform sample_clipped(const LinearWaveform& line, std::span<const double> times) {
  std::vector<double> t(times.begin(), times.end());
  std::vector<double> v(t.size());
  for (std::size_t i = 0; i < t.size(); ++i)
    v[i] = line.clipped(t[i]);
  return SampledWaveform(std::move(t), std::move(v), line.vdd(),
                         line.a() > 0 ? Direction::Rising : Direction::Falling);
}

// ---- CSV ------------------------------------------------------------------

inline constexpr const char* kWaveformCsvHeader = "time_s,voltage_v";

inline void write_waveform_csv(std::ostream& os, const SampledWaveform& wf) {
  os << kWaveformCsvHeader << '\n';
  os << std::setprecision(17);
  for (std::size_t i = 0; i < wf.size(); ++i)
    os << wf.time(i) << ',' << wf.volt(i) << '\n';
}

inline SampledWaveform read_waveform_csv(std::istream& is, double vdd) {
  std::string line;
  if (!std::getline(is, line))
    throw InvalidWaveform("empty waveform CSV");
  if (!line.empty() && line.back() == '\r')
    line.pop_back();
  if (line != kWaveformCsvHeader)
    throw InvalidWaveform("waveform CSV header must be '" + std::string(kWaveformCsvHeader) +
                          "'");
  std::vector<double> t, v;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty())
      continue;
    auto comma = line.find(',');
    if (comma == std::string::npos)
      throw InvalidWaveform("malformed CSV row " + std::to_string(row));
    try {
      std::size_t used = 0;
      double tv = std::stod(line.substr(0, comma), &used);
      double vv = std::stod(line.substr(comma + 1), &used);
      if (!t.empty() && !(tv > t.back()))
        throw InvalidWaveform("non-monotone time at CSV row " + std::to_string(row));
      t.push_back(tv);
      v.push_back(vv);
    } catch (const std::invalid_argument&) {
      throw InvalidWaveform("unparsable number at CSV row " + std::to_string(row));
    } catch (const std::out_of_range&) {
      throw InvalidWaveform("number out of range at CSV row " + std::to_string(row));
    }
  }
  return SampledWaveform(std::move(t), std::move(v), vdd);
}

inline SampledWaveform load_waveform_csv(const std::string& path, double vdd) {
  std::ifstream in(path);
  if (!in)
    throw InvalidWaveform("cannot open waveform file " + path);
  return read_waveform_csv(in, vdd);
}

} // namespace nsta

#endif // NOISY_STA_WAVEFORM_HPP
