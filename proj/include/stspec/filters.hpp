#pragma once

// Periodic pi-pulse sequences, their square-wave filter functions and the
// Fourier transform of the restricted spatiotemporal filter f(x,t).

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "stspec/errors.hpp"
#include "stspec/register.hpp"

namespace stspec {

using complex = std::complex<double>;

struct SequenceSettings {
  double pulse_interval = 1.0;   // tau_p
  double wavenumber_slope = 0.0; // k_p
  int periods = 1;               // n_t

  double filter_frequency() const { return std::numbers::pi / pulse_interval; }  // w_p
  double base_period() const { return 2.0 * pulse_interval; }                      // T_0
  double duration() const { return periods * base_period(); }                      // T
  /// Delta tau_q = (k_p / w_p) x_q.
  double shift_at(double x) const { return wavenumber_slope / filter_frequency() * x; }

  void validate() const {
    if (!(pulse_interval > 0.0) || !std::isfinite(pulse_interval))
      throw PreconditionError("pulse interval must be positive");
    if (periods < 1) throw PreconditionError("n_t must be >= 1");
    if (!(wavenumber_slope >= 0.0) || !std::isfinite(wavenumber_slope))
      throw PreconditionError("k_p must be >= 0 so that all shifts are non-negative");
  }

  SequenceSettings with_periods(int nt) const {
    SequenceSettings s = *this;
    s.periods = nt;
    return s;
  }

  static SequenceSettings from_frequency(double omega_p, double k_p, int nt) {
    return {std::numbers::pi / omega_p, k_p, nt};
  }
};

/// f(t + shift) for the unit square wave of period 2 tau_p starting at +1;
/// zero for negative arguments. Right-continuous at switch points.
inline int time_filter(double t, double shift, double pulse_interval) {
  const double s = t + shift;
  if (s < 0.0) return 0;
  const auto j = static_cast<long long>(std::floor(s / pulse_interval));
  return (j % 2 == 0) ? 1 : -1;
}

struct PulseSchedule {
  int qubit = 0;
  std::vector<double> pulse_times;  // ordered, within [0, T]
};

/// Pulse timings whose sign-switch pattern reproduces f(t + shift) on [0, T].
inline PulseSchedule schedule_from_shift(double shift, const SequenceSettings& s, int qubit = 0) {
  if (!(shift >= 0.0)) throw PreconditionError("shift must be non-negative");
  const double tp = s.pulse_interval;
  const double T = s.duration();
  PulseSchedule out;
  out.qubit = qubit;
  // A filter that starts at -1 needs an extra pulse at t = 0.
  if (time_filter(0.0, shift, tp) < 0) out.pulse_times.push_back(0.0);
  const auto j0 = static_cast<long long>(std::floor(shift / tp)) + 1;
  for (long long j = j0;; ++j) {
    const double t = j * tp - shift;
    if (t >= T * (1.0 - 1e-14)) break;
    if (t > 0.0) out.pulse_times.push_back(t);
  }
  return out;
}

inline std::vector<PulseSchedule> schedules_for_layout(const RegisterLayout& layout,
                                                       const SequenceSettings& s) {
  std::vector<PulseSchedule> out;
  const auto xs = layout.positions();
  for (std::size_t q = 0; q < xs.size(); ++q)
    out.push_back(schedule_from_shift(s.shift_at(xs[q]), s, int(q)));
  return out;
}

/// Sign of the filter induced by a schedule: +1 at t = 0-, flipped by every
/// pulse applied at or before t.
inline int schedule_sign(const PulseSchedule& sched, double t) {
  int sign = 1;
  for (double p : sched.pulse_times) {
    if (p <= t) sign = -sign;
    else break;
  }
  return sign;
}

/// c_{m w_p} = 2/(i m pi) for odd m, 0 otherwise.
inline complex temporal_coefficient(int m) {
  if (m % 2 == 0) return 0.0;
  return complex(0.0, -2.0 / (m * std::numbers::pi));
}

/// h_W(u) = int_0^W e^{-iwu} dw = W e^{-iWu/2} sinc(Wu/2).
inline complex passband(double W, double u) {
  const double z = 0.5 * W * u;
  const double sinc = std::abs(z) < 1e-4 ? 1.0 - z * z / 6.0 + z * z * z * z / 120.0
                                         : std::sin(z) / z;
  return W * sinc * std::polar(1.0, -z);
}

/// int_0^T f(t + shift) e^{-iwt} dt, summed exactly segment by segment.
inline complex qubit_filter_spectrum(double shift, double pulse_interval, double duration,
                                     double omega) {
  const double tp = pulse_interval;
  const auto j = static_cast<long long>(std::floor(shift / tp));
  double sign = (j % 2 == 0) ? 1.0 : -1.0;
  // First switch after t = 0.
  double first = (j + 1) * tp - shift;
  if (first <= 0.0) first += tp;  // guards rounding in floor()
  complex acc = 0.0;
  if (first >= duration) return sign * passband(duration, omega);
  acc += sign * passband(first, omega);
  sign = -sign;
  // Whole segments of length tau_p starting at first, first + tau_p, ...
  // Their phases form a geometric series with ratio z = -e^{-iw tau_p}.
  const auto whole = static_cast<long long>(std::floor((duration - first) / tp * (1 + 1e-15)));
  const complex h = passband(tp, omega);
  const complex phase0 = std::polar(1.0, -omega * first);
  const complex z = -std::polar(1.0, -omega * tp);
  complex alt;
  if (std::abs(1.0 - z) > 1e-3) {
    const complex zn = std::polar(1.0, -double(whole) * (omega * tp - std::numbers::pi));
    alt = sign * phase0 * (1.0 - zn) / (1.0 - z);
  } else {
    complex term = sign * phase0;
    alt = 0.0;
    for (long long i = 0; i < whole; ++i) {
      alt += term;
      term *= z;
    }
  }
  if (whole % 2 == 1) sign = -sign;
  acc += alt * h;
  const double tail_start = first + whole * tp;
  const double rest = duration - tail_start;
  if (rest > 1e-13 * duration)
    acc += sign * std::polar(1.0, -omega * tail_start) * passband(rest, omega);
  return acc;
}

/// Exact Fourier transform of the restricted filter:
///   sum_q e^{-ik x_q} int_0^T f(t + Delta tau_q) e^{-iwt} dt.
/// This is the comb representation resummed over all (m, l).
inline complex filter_transform(double k, double omega, const RegisterLayout& layout,
                                const SequenceSettings& s) {
  complex acc = 0.0;
  for (double x : layout.positions())
    acc += std::polar(1.0, -k * x) *
           qubit_filter_spectrum(s.shift_at(x), s.pulse_interval, s.duration(), omega);
  return acc;
}

struct CombTransform {
  complex value;
  int m_max = 0;
  int l_max = 0;
};

/// Truncated comb form
///   sum_{|m|<=m_max, odd} c_m h_T(w - m w_p) sum_{|l|<=l_max} v_l h_L(k - m k_p - l k_d).
/// The density expands as sum_l v_l e^{+i l k_d x}, so the passband weighted by
/// v_l sits at k = m k_p + l k_d; writing +l k_d instead pairs each passband with
/// conj(v_l), which only agrees for real coefficients.
/// Both tails decay only like 1/m_max and 1/l_max.
inline CombTransform filter_transform_comb(double k, double omega, const RegisterLayout& layout,
                                           const SequenceSettings& s, int m_max, int l_max) {
  if (m_max < 1 || m_max % 2 == 0) throw PreconditionError("m_max must be odd and >= 1");
  if (l_max < 1) throw PreconditionError("l_max must be >= 1");
  const double T = s.duration();
  const double L = layout.length();
  const double wp = s.filter_frequency();
  const double kd = layout.comb_spacing();
  std::vector<complex> v(2 * l_max + 1);
  for (int l = -l_max; l <= l_max; ++l) v[l + l_max] = spatial_coefficient(layout, l);
  complex acc = 0.0;
  for (int m = -m_max; m <= m_max; m += 2) {
    complex spatial = 0.0;
    for (int l = -l_max; l <= l_max; ++l)
      spatial += v[l + l_max] * passband(L, k - m * s.wavenumber_slope - l * kd);
    acc += temporal_coefficient(m) * passband(T, omega - m * wp) * spatial;
  }
  return {acc, m_max, l_max};
}

/// Same comb, but with coefficients of the full register over its length L;
/// only l multiple of n_s contribute.
inline CombTransform filter_transform_comb_full_register(double k, double omega,
                                                         const RegisterLayout& layout,
                                                         const SequenceSettings& s, int m_max,
                                                         int l_max) {
  const double T = s.duration();
  const double L = layout.length();
  const double wp = s.filter_frequency();
  const double kl = 2.0 * std::numbers::pi / L;
  const int ns = layout.repetitions();
  const int lf = l_max * ns;
  std::vector<complex> v(2 * lf + 1);
  for (int l = -lf; l <= lf; ++l) v[l + lf] = full_register_coefficient(layout, l);
  complex acc = 0.0;
  for (int m = -m_max; m <= m_max; m += 2) {
    complex spatial = 0.0;
    for (int l = -lf; l <= lf; ++l)
      spatial += v[l + lf] * passband(L, k - m * s.wavenumber_slope - l * kl);
    acc += temporal_coefficient(m) * passband(T, omega - m * wp) * spatial;
  }
  return {acc, m_max, l_max};
}

}  // namespace stspec
