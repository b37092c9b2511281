#pragma once

// Attenuation function chi(L, T) from the spectral overlap
//   chi = 1/2 int dk dw/(2pi)^2 |f~(k, w)|^2 S(k, w)
// and the spectroscopic (linear-in-T, linear-in-L) parts of it.
//
// For point-like qubits the k integral is a finite lattice sum:
//   int dk/2pi |f~|^2 S = sum_{q,q'} F_q(w) F_q'(w)^* Chat(x_q' - x_q, w),
// with F_q the transform of the shifted square wave. Only the w integral is
// left for adaptive quadrature.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "stspec/errors.hpp"
#include "stspec/filters.hpp"
#include "stspec/quadrature.hpp"
#include "stspec/register.hpp"
#include "stspec/spectra.hpp"

namespace stspec {

/// Chat(x_{b',q'} - x_{b,q}, w) for every block offset r = b' - b >= 0 and
/// every pair of positions inside a block.
class CrossSpectrumTable {
 public:
  CrossSpectrumTable(const SpectralModel& model, const RegisterLayout& layout)
      : model_(model), n0_(layout.block_size()), blocks_(layout.repetitions()) {
    const auto xs = layout.block_positions();
    displacement_.resize(std::size_t(blocks_) * n0_ * n0_);
    for (int r = 0; r < blocks_; ++r)
      for (int a = 0; a < n0_; ++a)
        for (int b = 0; b < n0_; ++b)
          displacement_[index(r, a, b)] = xs[b] - xs[a] + r * layout.period();
    values_.resize(displacement_.size());
    if (model.separable()) {
      spatial_.resize(displacement_.size());
      for (std::size_t i = 0; i < displacement_.size(); ++i)
        spatial_[i] = model.spatial_factor(displacement_[i]);
    }
  }

  void fill(double omega) {
    if (!spatial_.empty()) {
      const double t = model_.temporal_factor(omega);
      for (std::size_t i = 0; i < values_.size(); ++i) values_[i] = spatial_[i] * t;
    } else {
      for (std::size_t i = 0; i < values_.size(); ++i)
        values_[i] = model_.cross_spectrum(displacement_[i], omega);
    }
  }

  /// Chat(x_{b+r, b_pos} - x_{b, a_pos}, w) for the last filled w.
  complex operator()(int r, int a, int b) const { return values_[index(r, a, b)]; }

 private:
  std::size_t index(int r, int a, int b) const {
    return (std::size_t(r) * n0_ + a) * n0_ + b;
  }

  const SpectralModel& model_;
  int n0_;
  int blocks_;
  std::vector<double> displacement_;
  std::vector<double> spatial_;
  std::vector<complex> values_;
};

struct QuadratureSettings {
  double rel_tol = 1e-9;
  int m_max = 41;  // sets the explicitly resolved band |w| <= (m_max + 1) w_p
  std::size_t max_panels = 4'000'000;
};

struct ChiColumn {
  std::vector<double> chi;  // chi for register prefixes of 1, 2, ... blocks
  double error = 0.0;       // largest absolute quadrature error estimate
};

/// chi for register prefixes (rows) and several sequence lengths (columns).
struct ChiTable {
  int blocks = 0;
  std::vector<int> periods;
  std::vector<double> chi;  // row-major: prefix 1..blocks, then periods
  double error = 0.0;

  double at(int prefix, std::size_t column) const {
    return chi[std::size_t(prefix - 1) * periods.size() + column];
  }
};

namespace detail {

/// Integrand w -> g(w) for all prefixes P = 1..blocks and all requested n_t.
/// The filter repeats with period T_0, so F_q(w; n T_0) = F_q(w; T_0) G_n(w)
/// with G_n = sum_{j<n} e^{-i w j T_0}; the lattice sum is done once.
class LatticeIntegrand {
 public:
  LatticeIntegrand(const SpectralModel& model, const RegisterLayout& layout,
                   const SequenceSettings& s, std::vector<int> periods)
      : table_(model, layout),
        n0_(layout.block_size()),
        blocks_(layout.repetitions()),
        settings_(s.with_periods(1)),
        periods_(std::move(periods)),
        filters_(std::size_t(blocks_) * n0_),
        overlap_(blocks_),
        repeat_(periods_.size()) {
    for (int b = 0; b < blocks_; ++b)
      for (int q = 0; q < n0_; ++q)
        shifts_.push_back(s.shift_at(layout.block_positions()[q] + b * layout.period()));
    longest_ = *std::max_element(periods_.begin(), periods_.end());
  }

  std::size_t dimension() const { return overlap_.size() * periods_.size(); }

  void operator()(double omega, std::span<double> out) {
    table_.fill(omega);
    const double t0 = settings_.duration();
    for (std::size_t i = 0; i < shifts_.size(); ++i)
      filters_[i] = qubit_filter_spectrum(shifts_[i], settings_.pulse_interval, t0, omega);
    double total = 0.0;
    for (int p = 0; p < blocks_; ++p) {
      const complex* fp = &filters_[std::size_t(p) * n0_];
      double added = 0.0;
      // Pairs inside the new block.
      for (int a = 0; a < n0_; ++a)
        for (int b = 0; b < n0_; ++b)
          added += (fp[a] * std::conj(fp[b]) * table_(0, a, b)).real();
      // Pairs between an earlier block and the new block, counted twice.
      complex cross = 0.0;
      for (int bl = 0; bl < p; ++bl) {
        const complex* fb = &filters_[std::size_t(bl) * n0_];
        for (int a = 0; a < n0_; ++a)
          for (int b = 0; b < n0_; ++b)
            cross += fb[a] * std::conj(fp[b]) * table_(p - bl, a, b);
      }
      total += added + 2.0 * cross.real();
      overlap_[p] = total;
    }
    // |G_n|^2 by a running sum, exact on the comb resonances as well.
    const complex z = std::polar(1.0, -omega * t0);
    complex g = 0.0, zj = 1.0;
    for (int n = 1; n <= longest_; ++n) {
      g += zj;
      zj *= z;
      for (std::size_t j = 0; j < periods_.size(); ++j)
        if (periods_[j] == n) repeat_[j] = std::norm(g);
    }
    // chi = int_0^inf dw/2pi g(w), g even in w.
    const std::size_t J = periods_.size();
    for (int p = 0; p < blocks_; ++p)
      for (std::size_t j = 0; j < J; ++j)
        out[std::size_t(p) * J + j] = overlap_[p] * repeat_[j] / (2.0 * std::numbers::pi);
  }

 private:
  CrossSpectrumTable table_;
  int n0_;
  int blocks_;
  SequenceSettings settings_;
  std::vector<int> periods_;
  int longest_ = 1;
  std::vector<double> shifts_;
  std::vector<complex> filters_;
  std::vector<double> overlap_;
  std::vector<double> repeat_;
};

}  // namespace detail

/// chi for register prefixes with 1..repetitions blocks and every n_t in
/// `periods` from one vector quadrature. s.periods is ignored.
inline ChiTable chi_quadrature_table(const SpectralModel& model, const RegisterLayout& layout,
                                     const SequenceSettings& s, std::vector<int> periods,
                                     const QuadratureSettings& qs = {}) {
  s.validate();
  if (periods.empty()) throw PreconditionError("no sequence lengths requested");
  for (int n : periods)
    if (n < 1) throw PreconditionError("n_t must be >= 1");
  ChiTable out;
  out.blocks = layout.repetitions();
  out.periods = periods;
  const std::size_t dim = std::size_t(out.blocks) * periods.size();
  out.chi.assign(dim, 0.0);
  const double var = model.variance();
  if (var == 0.0) return out;

  const double T = *std::max_element(periods.begin(), periods.end()) * s.base_period();
  const double band = std::max((qs.m_max + 1) * s.filter_frequency(), 20.0 * model.frequency_scale());
  const int panels = std::max(8, int(std::ceil(band * T / (2.0 * std::numbers::pi))));
  std::vector<double> breaks(panels + 1);
  for (int i = 0; i <= panels; ++i) breaks[i] = band * i / panels;

  detail::LatticeIntegrand g(model, layout, s, std::move(periods));
  quad::VectorIntegrand f = [&](double w, std::span<double> v) { g(w, v); };
  quad::Options opt;
  opt.rel_tol = qs.rel_tol;
  // |phi| <= N T |xi|, so chi <= N^2 T^2 var / 2 bounds every component.
  const double n = layout.qubit_count();
  opt.abs_tol = 1e-15 * n * n * T * T * std::abs(var);
  opt.max_panels = qs.max_panels;
  auto core = quad::integrate(f, breaks, dim, opt);
  if (!core.converged)
    throw AccuracyError("chi quadrature did not converge",
                        *std::max_element(core.error.begin(), core.error.end()));

  double smallest = std::numeric_limits<double>::infinity();
  for (double v : core.value)
    if (std::abs(v) > 0) smallest = std::min(smallest, std::abs(v));
  quad::Options tail_opt = opt;
  if (std::isfinite(smallest)) tail_opt.abs_tol = std::max(opt.abs_tol, qs.rel_tol * smallest);
  auto tail = quad::integrate_to_infinity(f, band, band, dim, tail_opt, 32);
  if (!tail.converged)
    throw AccuracyError("chi quadrature tail did not converge",
                        *std::max_element(tail.error.begin(), tail.error.end()));

  for (std::size_t i = 0; i < dim; ++i) {
    out.chi[i] = core.value[i] + tail.value[i];
    out.error = std::max(out.error, core.error[i] + tail.error[i]);
  }
  return out;
}

/// chi for the register prefixes with 1..repetitions blocks at fixed n_t.
inline ChiColumn chi_quadrature_prefixes(const SpectralModel& model, const RegisterLayout& layout,
                                         const SequenceSettings& s,
                                         const QuadratureSettings& qs = {}) {
  auto t = chi_quadrature_table(model, layout, s, {s.periods}, qs);
  return {std::move(t.chi), t.error};
}

inline double chi_quadrature(const SpectralModel& model, const RegisterLayout& layout,
                             const SequenceSettings& s, const QuadratureSettings& qs = {}) {
  return chi_quadrature_prefixes(model, layout, s, qs).chi.back();
}

/// S*(m w_p | L) for the finite register:
///   sum_{q,q'} e^{i m k_p (x_q - x_q')} Chat(x_q' - x_q, m w_p).
inline double marginal_spectrum(const SpectralModel& model, const RegisterLayout& layout,
                                const SequenceSettings& s, int m) {
  const auto xs = layout.positions();
  const double w = m * s.filter_frequency();
  const double kp = m * s.wavenumber_slope;
  double acc = 0.0;
  for (double xq : xs)
    for (double xr : xs)
      acc += (std::polar(1.0, kp * (xq - xr)) * model.cross_spectrum(xr - xq, w)).real();
  return acc;
}

/// Infinite-register limit S*_S = n_s L_0 sum_{|l|<=l_max} |v_l|^2 S(m k_p - l k_d, m w_p).
inline double marginal_spectrum_formula(const SpectralModel& model, const RegisterLayout& layout,
                                        int m, const SequenceSettings& s, int l_max = 200) {
  const double kd = layout.comb_spacing();
  double acc = 0.0;
  for (int l = -l_max; l <= l_max; ++l)
    acc += comb_weight(layout, l) *
           model.spectrum(m * s.wavenumber_slope - l * kd, m * s.filter_frequency());
  return layout.length() * acc;
}

struct SpectroscopicChi {
  double value = 0.0;
  double tail_estimate = 0.0;  // relative size of the neglected harmonics
  bool truncation_warning = false;
};

/// chi_S = (n_t T_0 / 2) sum_{odd |m| <= m_max} |c_m|^2 S*(m w_p | n_s L_0).
inline SpectroscopicChi chi_spectroscopic(const SpectralModel& model, const RegisterLayout& layout,
                                          const SequenceSettings& s, int m_max = 41) {
  if (m_max < 1) throw PreconditionError("m_max must be >= 1");
  SpectroscopicChi out;
  double weight = 0.0;
  double last = 0.0;
  for (int m = 1; m <= m_max; m += 2) {
    const double c2 = std::norm(temporal_coefficient(m));
    last = marginal_spectrum(model, layout, s, m);
    // S*(-m) = S*(m), so each positive harmonic counts twice.
    out.value += 2.0 * c2 * last;
    weight += 2.0 * c2;
  }
  out.value *= 0.5 * s.duration();
  // Remaining Parseval weight carried at the last evaluated level.
  const double rest = std::max(0.0, 1.0 - weight) * 0.5 * s.duration() * std::abs(last);
  out.tail_estimate = out.value != 0.0 ? rest / std::abs(out.value) : 0.0;
  out.truncation_warning = out.tail_estimate > 0.01;
  return out;
}

/// Second-stage slope dA/dL = sum_{m>0 odd} |c_m|^2 sum_l |v_l|^2 S(m k_p - l k_d, m w_p).
inline double slope_formula(const SpectralModel& model, const RegisterLayout& layout,
                            const SequenceSettings& s, int m_max = 41, int l_max = 200) {
  double acc = 0.0;
  const double kd = layout.comb_spacing();
  std::vector<double> weights(2 * l_max + 1);
  for (int l = -l_max; l <= l_max; ++l) weights[l + l_max] = comb_weight(layout, l);
  for (int m = 1; m <= m_max; m += 2) {
    double inner = 0.0;
    for (int l = -l_max; l <= l_max; ++l)
      inner += weights[l + l_max] *
               model.spectrum(m * s.wavenumber_slope - l * kd, m * s.filter_frequency());
    acc += std::norm(temporal_coefficient(m)) * inner;
  }
  return acc;
}

}  // namespace stspec
