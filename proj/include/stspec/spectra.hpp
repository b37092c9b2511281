#pragma once

// Noise-field statistical models: the spatiotemporal spectral density
// S(k, w), the autocorrelation C(x, t) and the mixed representation
//   Chat(x, w) = int dk/2pi e^{ikx} S(k, w) = int dt C(x, t) e^{-iwt}
// which is what a register of point-like qubits actually samples.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <complex>
#include <memory>
#include <numbers>
#include <random>
#include <string>

#include <boost/math/quadrature/ooura_fourier_integrals.hpp>

#include "stspec/errors.hpp"
#include "stspec/quadrature.hpp"

namespace stspec {

using complex = std::complex<double>;

class SpectralModel {
 public:
  virtual ~SpectralModel() = default;

  /// Power density S(k, w). Must be non-negative and satisfy S(-k,-w) = S(k,w).
  virtual double spectrum(double k, double omega) const = 0;

  /// Mean field xi_0. It never enters the attenuation (the filters have no DC
  /// component) but is kept for completeness.
  virtual double mean() const { return 0.0; }

  virtual double correlation_time() const = 0;
  virtual double correlation_length() const = 0;

  /// Frequency beyond which S decays; used to size integration domains.
  virtual double frequency_scale() const { return 1.0 / correlation_time(); }
  virtual double wavenumber_scale() const { return 1.0 / correlation_length(); }

  virtual bool has_analytic_autocorrelation() const { return false; }

  /// C(x, t). The default performs the inverse 2D transform numerically.
  virtual double autocorrelation(double x, double t) const;

  /// Chat(x, w). The default integrates the spectrum over k numerically.
  virtual complex cross_spectrum(double x, double omega) const;

  /// True when Chat(x, w) = spatial_factor(x) * temporal_factor(w); callers
  /// may then tabulate the spatial part once.
  virtual bool separable() const { return false; }
  virtual double spatial_factor(double) const { return 0.0; }
  virtual double temporal_factor(double) const { return 0.0; }

  double variance() const { return autocorrelation(0.0, 0.0); }
};

namespace detail {

// int_0^inf h(u) du for a smooth integrand decaying on the scale `scale`.
inline double half_line_integral(const std::function<double(double)>& h, double scale) {
  quad::Options opt;
  opt.rel_tol = 1e-11;
  opt.abs_tol = 1e-300;
  quad::VectorIntegrand f = [&](double u, std::span<double> out) { out[0] = h(u); };
  const double K = 40.0 * scale;
  std::vector<double> breaks(161);
  for (int i = 0; i <= 160; ++i) breaks[i] = K * i / 160.0;
  return quad::integrate(f, breaks, 1, opt).value[0] +
         quad::integrate_to_infinity(f, K, K, 1, opt, 32).value[0];
}

// int_0^inf h(u) cos(u a) du and int_0^inf h(u) sin(u a) du for a > 0, using
// the double-exponential Fourier rules of Ooura and Mori.
inline double fourier_cos(const std::function<double(double)>& h, double a) {
  static thread_local boost::math::quadrature::ooura_fourier_cos<double> rule(1e-10, 8);
  return rule.integrate(h, a).first;
}
inline double fourier_sin(const std::function<double(double)>& h, double a) {
  static thread_local boost::math::quadrature::ooura_fourier_sin<double> rule(1e-10, 8);
  return rule.integrate(h, a).first;
}

// int_{-inf}^{inf} du/2pi e^{iux} g(u) for a smooth, decaying g.
inline complex inverse_transform_1d(const std::function<double(double)>& g, double x,
                                    double scale) {
  std::function<double(double)> even = [&](double u) { return g(u) + g(-u); };
  std::function<double(double)> odd = [&](double u) { return g(u) - g(-u); };
  double re = 0.0, im = 0.0;
  if (x == 0.0) {
    re = half_line_integral(even, scale);
  } else {
    re = fourier_cos(even, std::abs(x));
    im = (x > 0 ? 1.0 : -1.0) * fourier_sin(odd, std::abs(x));
  }
  return {re / (2.0 * std::numbers::pi), im / (2.0 * std::numbers::pi)};
}

}  // namespace detail

inline complex SpectralModel::cross_spectrum(double x, double omega) const {
  return detail::inverse_transform_1d([&](double k) { return spectrum(k, omega); }, x,
                                      wavenumber_scale());
}

inline double SpectralModel::autocorrelation(double x, double t) const {
  // C(x,t) = 1/pi int_0^inf Re[Chat(x,w) e^{iwt}] dw, since Chat(x,-w) = conj Chat(x,w).
  std::function<double(double)> re = [&](double w) { return cross_spectrum(x, w).real(); };
  std::function<double(double)> im = [&](double w) { return cross_spectrum(x, w).imag(); };
  double acc = 0.0;
  if (t == 0.0) {
    acc = detail::half_line_integral(re, frequency_scale());
  } else {
    acc = detail::fourier_cos(re, std::abs(t)) -
          (t > 0 ? 1.0 : -1.0) * detail::fourier_sin(im, std::abs(t));
  }
  return acc / std::numbers::pi;
}

/// Lorentzian line shape S_0(z) = 2 / (1 + z^2).
inline double lorentzian_line(double z) { return 2.0 / (1.0 + z * z); }

/// Separable model S(k,w) = S_s(k) S_t(w) with Lorentzian lines mirrored at
/// +-k_s and +-w_s. Its autocorrelation is
///   C(x,t) = nu_s^2 nu_t^2 e^{-|x|/x_c} cos(k_s x) e^{-|t|/t_c} cos(w_s t).
class LorentzianFactorizedModel final : public SpectralModel {
 public:
  struct Params {
    double nu_s = 1.0;
    double nu_t = 1.0;
    double xc = 1.0;
    double tc = 1.0;
    double ks = 0.0;
    double ws = 0.0;
    double mean = 0.0;
  };

  explicit LorentzianFactorizedModel(Params p) : p_(p) {
    for (double v : {p.nu_s, p.nu_t, p.xc, p.tc, p.ks, p.ws, p.mean})
      if (!std::isfinite(v)) throw InvalidModelError("lorentzian model: non-finite parameter");
    if (!(p.xc > 0.0)) throw InvalidModelError("lorentzian model: xc must be positive");
    if (!(p.tc > 0.0)) throw InvalidModelError("lorentzian model: tc must be positive");
  }

  const Params& params() const { return p_; }

  double spatial_spectrum(double k) const {
    return p_.nu_s * p_.nu_s * p_.xc * 0.5 *
           (lorentzian_line(p_.xc * (k + p_.ks)) + lorentzian_line(p_.xc * (k - p_.ks)));
  }
  double temporal_spectrum(double w) const {
    return p_.nu_t * p_.nu_t * p_.tc * 0.5 *
           (lorentzian_line(p_.tc * (w + p_.ws)) + lorentzian_line(p_.tc * (w - p_.ws)));
  }
  double spatial_autocorrelation(double x) const {
    return p_.nu_s * p_.nu_s * std::exp(-std::abs(x) / p_.xc) * std::cos(p_.ks * x);
  }
  double temporal_autocorrelation(double t) const {
    return p_.nu_t * p_.nu_t * std::exp(-std::abs(t) / p_.tc) * std::cos(p_.ws * t);
  }

  double spectrum(double k, double omega) const override {
    return spatial_spectrum(k) * temporal_spectrum(omega);
  }
  double mean() const override { return p_.mean; }
  double correlation_time() const override { return p_.tc; }
  double correlation_length() const override { return p_.xc; }
  double frequency_scale() const override { return std::abs(p_.ws) + 1.0 / p_.tc; }
  double wavenumber_scale() const override { return std::abs(p_.ks) + 1.0 / p_.xc; }
  bool has_analytic_autocorrelation() const override { return true; }
  double autocorrelation(double x, double t) const override {
    return spatial_autocorrelation(x) * temporal_autocorrelation(t);
  }
  complex cross_spectrum(double x, double omega) const override {
    return {spatial_autocorrelation(x) * temporal_spectrum(omega), 0.0};
  }
  bool separable() const override { return true; }
  double spatial_factor(double x) const override { return spatial_autocorrelation(x); }
  double temporal_factor(double w) const override { return temporal_spectrum(w); }

 private:
  Params p_;
};

/// Samples the model and rejects it when S is negative, non-finite or not
/// symmetric under (k,w) -> (-k,-w).
inline void validate_model(const SpectralModel& model, int samples = 256,
                           std::uint64_t seed = 12345) {
  std::mt19937_64 rng(seed);
  const double K = 5.0 * model.wavenumber_scale();
  const double W = 5.0 * model.frequency_scale();
  if (!std::isfinite(K) || !std::isfinite(W) || K <= 0 || W <= 0)
    throw InvalidModelError("model scales must be positive and finite");
  std::uniform_real_distribution<double> uk(-K, K), uw(-W, W);
  for (int i = 0; i < samples; ++i) {
    const double k = uk(rng), w = uw(rng);
    const double s = model.spectrum(k, w);
    const double m = model.spectrum(-k, -w);
    if (!std::isfinite(s)) throw InvalidModelError("spectrum is not finite");
    if (s < 0.0) throw InvalidModelError("spectrum is negative");
    if (std::abs(s - m) > 1e-9 * std::max(std::abs(s), std::abs(m)) + 1e-300)
      throw InvalidModelError("spectrum violates S(-k,-w) = S(k,w)");
  }
}

}  // namespace stspec
