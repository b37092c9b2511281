#include <gtest/gtest.h>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/ooura_fourier_integrals.hpp>
#include <boost/math/quadrature/sinh_sinh.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "stspec/spectra.hpp"

using namespace stspec;
using std::numbers::pi;

namespace {

LorentzianFactorizedModel reference_model() {
  return LorentzianFactorizedModel({.nu_s = 1.0,
                                    .nu_t = 1.0,
                                    .xc = 1.5,
                                    .tc = 1.0,
                                    .ks = 0.2 * 2 * pi,
                                    .ws = 0.2 * 2 * pi});
}

// Exposes only S(k, w); everything else goes through the numeric defaults.
class SpectrumOnly : public SpectralModel {
 public:
  explicit SpectrumOnly(const LorentzianFactorizedModel& m) : m_(m) {}
  double spectrum(double k, double w) const override { return m_.spectrum(k, w); }
  double correlation_time() const override { return m_.correlation_time(); }
  double correlation_length() const override { return m_.correlation_length(); }
  double frequency_scale() const override { return m_.frequency_scale(); }
  double wavenumber_scale() const override { return m_.wavenumber_scale(); }

 private:
  LorentzianFactorizedModel m_;
};

class NegativeModel : public SpectralModel {
 public:
  double spectrum(double k, double) const override { return std::cos(k); }
  double correlation_time() const override { return 1.0; }
  double correlation_length() const override { return 1.0; }
};

class AsymmetricModel : public SpectralModel {
 public:
  double spectrum(double k, double w) const override { return std::exp(-(k - 1) * (k - 1) - w * w); }
  double correlation_time() const override { return 1.0; }
  double correlation_length() const override { return 1.0; }
};

}  // namespace

TEST(Spectra, PeakOfWellSeparatedLines) {
  LorentzianFactorizedModel m({.nu_s = 1.3, .nu_t = 0.7, .xc = 5, .tc = 4, .ks = 10, .ws = 10});
  const double expected = 1.3 * 1.3 * 0.7 * 0.7 * 5 * 4;
  EXPECT_NEAR(m.spectrum(10, 10), expected, 1e-3 * expected);
}

TEST(Spectra, ClosedFormMatchesDefinition) {
  const auto m = reference_model();
  const auto& p = m.params();
  auto s0 = [](double z) { return 2.0 / (1.0 + z * z); };
  for (double k : {-3.0, 0.0, 1.2, 7.0})
    for (double w : {-2.0, 0.5, 4.0}) {
      const double ref = p.xc * p.tc * 0.25 * (s0(p.xc * (k + p.ks)) + s0(p.xc * (k - p.ks))) *
                         (s0(p.tc * (w + p.ws)) + s0(p.tc * (w - p.ws)));
      EXPECT_NEAR(m.spectrum(k, w), ref, 1e-14 * ref);
    }
}

TEST(Spectra, SymmetryAndNonNegativity) {
  const auto m = reference_model();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-30, 30);
  for (int i = 0; i < 1000; ++i) {
    const double k = u(rng), w = u(rng);
    EXPECT_GE(m.spectrum(k, w), 0.0);
    EXPECT_DOUBLE_EQ(m.spectrum(k, w), m.spectrum(-k, -w));
    EXPECT_DOUBLE_EQ(m.autocorrelation(k, w), m.autocorrelation(-k, -w));
  }
}

TEST(Spectra, VarianceEqualsSpectralIntegral) {
  LorentzianFactorizedModel m({.nu_s = 1.1, .nu_t = 0.6, .xc = 1.5, .tc = 0.8, .ks = 1.2, .ws = 0.7});
  boost::math::quadrature::sinh_sinh<double> rule;
  const double total = rule.integrate([&](double w) {
    return rule.integrate([&](double k) { return m.spectrum(k, w); });
  });
  const double var = total / (4 * pi * pi);
  EXPECT_NEAR(var, 1.1 * 1.1 * 0.6 * 0.6, 1e-7);
  EXPECT_DOUBLE_EQ(m.variance(), 1.1 * 1.1 * 0.6 * 0.6);
}

TEST(Spectra, AutocorrelationEnvelope) {
  const auto m = reference_model();
  // The bound is attained at x = 0 because cos(w_s 50 t_c) = 1 for this model.
  for (double x : {0.0, 0.3, 2.0})
    EXPECT_LE(std::abs(m.autocorrelation(x, 50.0)), (1 + 1e-12) * std::exp(-50.0) * m.variance());
  EXPECT_LT(std::abs(m.autocorrelation(0.0, 50.3)), std::exp(-50.0) * m.variance());
}

TEST(Spectra, NumericInverseTransformMatchesAnalytic) {
  const auto m = reference_model();
  const SpectrumOnly numeric(m);
  for (double x : {0.0, 0.5, 0.9})
    for (double t : {0.0, 0.4, 0.9}) {
      const double ref = m.autocorrelation(x, t);
      EXPECT_NEAR(numeric.autocorrelation(x, t), ref, 1e-6 * std::abs(ref)) << x << " " << t;
    }
}

TEST(Spectra, NumericCrossSpectrumMatchesAnalytic) {
  const auto m = reference_model();
  const SpectrumOnly numeric(m);
  for (double x : {-2.0, 0.0, 0.7, 3.1})
    for (double w : {0.0, 1.3, 5.0}) {
      const complex ref = m.cross_spectrum(x, w);
      const complex got = numeric.cross_spectrum(x, w);
      EXPECT_NEAR(got.real(), ref.real(), 1e-8 * m.temporal_spectrum(w));
      EXPECT_NEAR(got.imag(), 0.0, 1e-8 * m.temporal_spectrum(w));
    }
}

TEST(Spectra, WienerKhinchinClosure) {
  // S(k,w) = 4 int_0^inf int_0^inf C(x,t) cos(kx) cos(wt) dx dt for a C even in x and t.
  const auto m = reference_model();
  boost::math::quadrature::ooura_fourier_cos<double> rule;
  for (double k : {0.3, 0.9, 1.5, 2.5, 4.0})
    for (double w : {0.2, 1.0, 1.6, 3.0, 6.0}) {
      auto inner = [&](double t) {
        return rule.integrate([&](double x) { return m.autocorrelation(x, t); }, k).first;
      };
      const double s = 4.0 * rule.integrate(inner, w).first;
      EXPECT_NEAR(s, m.spectrum(k, w), 1e-6 * m.spectrum(k, w)) << k << " " << w;
    }
}

TEST(Spectra, ValidationRejectsBadModels) {
  EXPECT_THROW(validate_model(NegativeModel{}), InvalidModelError);
  EXPECT_THROW(validate_model(AsymmetricModel{}), InvalidModelError);
  EXPECT_NO_THROW(validate_model(reference_model()));
  EXPECT_THROW(LorentzianFactorizedModel({.xc = 0.0}), InvalidModelError);
  EXPECT_THROW(LorentzianFactorizedModel({.tc = -1.0}), InvalidModelError);
  EXPECT_THROW(LorentzianFactorizedModel({.nu_s = std::nan("")}), InvalidModelError);
}

TEST(Spectra, MeanIsStoredButDefaultsToZero) {
  EXPECT_EQ(reference_model().mean(), 0.0);
  LorentzianFactorizedModel m({.mean = 0.4});
  EXPECT_EQ(m.mean(), 0.4);
}
