#pragma once

// Monte-Carlo attenuation: Gaussian field realizations by spectral sampling,
// phase accumulation per realization, and the ensemble estimate
// chi = -ln |<exp(-i phi)>|.
//
// The field at the qubit sites is a superposition of harmonics on the grid
// w_j = (j + 1/2) dw. Per frequency the complex amplitudes of all qubits are
// drawn jointly with covariance (2 dw / pi) Chat(x_q - x_q', w_j), which is the
// k-integral of S over the spatial grid taken in the continuum limit.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "stspec/errors.hpp"
#include "stspec/filters.hpp"
#include "stspec/register.hpp"
#include "stspec/spectra.hpp"

namespace stspec {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Stream seed for one realization; independent of scheduling order.
inline std::uint64_t stream_seed(std::uint64_t seed, int ns, int nt, std::uint64_t index) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ std::uint64_t(ns));
  h = splitmix64(h ^ std::uint64_t(nt));
  return splitmix64(h ^ index);
}

class FieldSynthesizer {
 public:
  struct Options {
    double initial_extent = 0.0;  // w_max of the first attempt; 0 picks 20 / t_c
    double spacing = 0.0;         // dw; required
    double variance_tolerance = 0.02;
    int max_doublings = 12;
  };

  FieldSynthesizer(const SpectralModel& model, std::vector<double> positions, Options opt)
      : positions_(std::move(positions)) {
    if (!(opt.spacing > 0.0)) throw PreconditionError("synthesis grid spacing must be positive");
    const double var = model.variance();
    spacing_ = opt.spacing;
    double extent = opt.initial_extent > 0 ? opt.initial_extent : 20.0 * model.frequency_scale();
    for (int attempt = 0;; ++attempt) {
      const auto modes = std::size_t(std::ceil(extent / spacing_));
      captured_ = 0.0;
      for (std::size_t j = 0; j < modes; ++j)
        captured_ += spacing_ / std::numbers::pi *
                     model.cross_spectrum(0.0, (j + 0.5) * spacing_).real();
      if (var == 0.0 || std::abs(captured_ - var) <= opt.variance_tolerance * std::abs(var)) {
        build(model, modes);
        return;
      }
      if (attempt >= opt.max_doublings)
        throw SynthesisError("synthesized field variance " + std::to_string(captured_) +
                             " misses C(0,0) = " + std::to_string(var) + " by more than " +
                             std::to_string(100 * opt.variance_tolerance) + "%");
      extent *= 2.0;
    }
  }

  std::size_t modes() const { return frequencies_.size(); }
  std::size_t sites() const { return positions_.size(); }
  double spacing() const { return spacing_; }
  double extent() const { return spacing_ * frequencies_.size(); }
  double captured_variance() const { return captured_; }
  const std::vector<double>& frequencies() const { return frequencies_; }

  /// Unit complex normal draws, one per (mode, site).
  void draw_white(std::mt19937_64& rng, std::vector<complex>& w) const {
    std::normal_distribution<double> g(0.0, std::numbers::sqrt2 / 2);
    w.resize(modes() * sites());
    for (auto& v : w) {
      const double re = g(rng);
      v = {re, g(rng)};
    }
  }

  /// Mode amplitudes Z_j = A_j w_j with A_j A_j^H the mode covariance.
  void colour(const std::vector<complex>& w, std::vector<complex>& z) const {
    const std::size_t n = sites();
    z.assign(w.size(), 0.0);
    for (std::size_t j = 0; j < modes(); ++j) {
      const complex* a = &factors_[j * n * n];
      for (std::size_t r = 0; r < n; ++r) {
        complex acc = 0.0;
        for (std::size_t c = 0; c < n; ++c) acc += a[r * n + c] * w[j * n + c];
        z[j * n + r] = acc;
      }
    }
  }

  /// xi(x_q, t) = sum_j Re[Z_jq e^{i w_j t}].
  double field(const std::vector<complex>& z, std::size_t q, double t) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < modes(); ++j)
      acc += (z[j * sites() + q] * std::polar(1.0, frequencies_[j] * t)).real();
    return acc;
  }

  /// b_j = A_j^H F_j, so that phi = sum_j Re[b_j^H w_j] for the filters F_q(w_j).
  std::vector<complex> projection(const std::vector<complex>& filters) const {
    const std::size_t n = sites();
    std::vector<complex> b(modes() * n, 0.0);
    for (std::size_t j = 0; j < modes(); ++j) {
      const complex* a = &factors_[j * n * n];
      for (std::size_t c = 0; c < n; ++c) {
        complex acc = 0.0;
        for (std::size_t r = 0; r < n; ++r) acc += std::conj(a[r * n + c]) * filters[j * n + r];
        b[j * n + c] = acc;
      }
    }
    return b;
  }

 private:
  void build(const SpectralModel& model, std::size_t modes) {
    const std::size_t n = sites();
    frequencies_.resize(modes);
    factors_.assign(modes * n * n, 0.0);
    Eigen::MatrixXcd h(n, n);
    for (std::size_t j = 0; j < modes; ++j) {
      const double w = (j + 0.5) * spacing_;
      frequencies_[j] = w;
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c)
          h(r, c) = model.cross_spectrum(positions_[r] - positions_[c], w);
      h *= 2.0 * spacing_ / std::numbers::pi;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(h);
      const Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
      const Eigen::MatrixXcd a = eig.eigenvectors() * lambda.asDiagonal();
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) factors_[(j * n + r) * n + c] = a(r, c);
    }
  }

  std::vector<double> positions_;
  double spacing_ = 0.0;
  double captured_ = 0.0;
  std::vector<double> frequencies_;
  std::vector<complex> factors_;  // row-major n x n per mode
};

struct MonteCarloSettings {
  int realizations = 10000;
  std::uint64_t seed = 0;
  int m_max = 41;
  int bootstrap = 200;
  int threads = 1;
  int oversampling = 8;  // dw = 2 pi / (oversampling T)
};

struct MonteCarloChi {
  double chi = 0.0;               // -ln |<exp(-i phi)>|
  double stderr_chi = 0.0;        // bootstrap
  double gaussian = 0.0;          // <phi^2> / 2
  double stderr_gaussian = 0.0;   // sample standard error
  double stderr_difference = 0.0; // bootstrap error of chi - gaussian
  double extent = 0.0;
  std::size_t modes = 0;
};

namespace detail {

template <class F>
void parallel_for(int threads, std::size_t n, F&& body) {
  threads = std::max(1, std::min<int>(threads, int(n)));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += threads) body(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace detail

inline MonteCarloChi chi_monte_carlo(const SpectralModel& model, const RegisterLayout& layout,
                                     const SequenceSettings& s, const MonteCarloSettings& mc) {
  s.validate();
  if (mc.realizations < 100) throw PreconditionError("Monte Carlo needs >= 100 realizations");
  if (mc.bootstrap < 2) throw PreconditionError("bootstrap needs >= 2 resamples");
  const auto xs = layout.positions();
  const double T = s.duration();
  FieldSynthesizer::Options fo;
  fo.spacing = 2.0 * std::numbers::pi / (mc.oversampling * T);
  fo.initial_extent = (mc.m_max + 1) * s.filter_frequency();
  FieldSynthesizer field(model, xs, fo);

  const std::size_t n = xs.size();
  std::vector<complex> filters(field.modes() * n);
  for (std::size_t j = 0; j < field.modes(); ++j)
    for (std::size_t q = 0; q < n; ++q)
      filters[j * n + q] = qubit_filter_spectrum(s.shift_at(xs[q]), s.pulse_interval, T,
                                                 field.frequencies()[j]);
  const auto b = field.projection(filters);

  const std::size_t count = mc.realizations;
  std::vector<double> phi(count);
  detail::parallel_for(mc.threads, count, [&](std::size_t i) {
    std::mt19937_64 rng(stream_seed(mc.seed, layout.repetitions(), s.periods, i));
    std::vector<complex> w;
    field.draw_white(rng, w);
    double acc = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) acc += (std::conj(b[k]) * w[k]).real();
    phi[i] = acc;
  });

  auto estimate = [&](const auto& index) {
    double c = 0.0, sn = 0.0, p2 = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      const double p = phi[index(i)];
      c += std::cos(p);
      sn += std::sin(p);
      p2 += p * p;
    }
    const double chi = -std::log(std::hypot(c, sn) / count);
    return std::pair{chi, 0.5 * p2 / count};
  };

  MonteCarloChi out;
  out.extent = field.extent();
  out.modes = field.modes();
  std::tie(out.chi, out.gaussian) = estimate([](std::size_t i) { return i; });

  double m2 = 0.0;
  for (double p : phi) m2 += std::pow(0.5 * p * p - out.gaussian, 2);
  out.stderr_gaussian = std::sqrt(m2 / (count - 1) / count);

  // The bootstrap stream sits right after the realization streams.
  std::mt19937_64 boot_rng(stream_seed(mc.seed, layout.repetitions(), s.periods, count));
  std::uniform_int_distribution<std::size_t> pick(0, count - 1);
  std::vector<std::size_t> idx(count);
  double sc = 0, sc2 = 0, sd = 0, sd2 = 0;
  for (int r = 0; r < mc.bootstrap; ++r) {
    for (auto& v : idx) v = pick(boot_rng);
    const auto [chi, gauss] = estimate([&](std::size_t i) { return idx[i]; });
    sc += chi;
    sc2 += chi * chi;
    sd += chi - gauss;
    sd2 += (chi - gauss) * (chi - gauss);
  }
  const double nb = mc.bootstrap;
  out.stderr_chi = std::sqrt(std::max(0.0, (sc2 - sc * sc / nb) / (nb - 1)));
  out.stderr_difference = std::sqrt(std::max(0.0, (sd2 - sd * sd / nb) / (nb - 1)));
  return out;
}

}  // namespace stspec
