#pragma once

// Attenuation data matrices chi(n_s L_0, n_t T_0) and the two-stage slope
// extraction: a_{n_s} from chi vs T per row, then A from a_{n_s} vs L.

#include <algorithm>
#include <bit>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "stspec/attenuation.hpp"
#include "stspec/errors.hpp"
#include "stspec/fit.hpp"
#include "stspec/montecarlo.hpp"

namespace stspec {

enum class Method { quadrature, monte_carlo };

inline std::string to_string(Method m) {
  return m == Method::quadrature ? "quadrature" : "monte_carlo";
}

inline Method method_from_string(const std::string& s) {
  if (s == "quadrature") return Method::quadrature;
  if (s == "monte_carlo") return Method::monte_carlo;
  throw PreconditionError("unknown method '" + s + "'");
}

struct AttenuationGrid {
  double pulse_interval = 1.0;    // tau_p
  double wavenumber_slope = 0.0;  // k_p
  double block_length = 1.0;      // L_0
  int ns_min = 1, ns_max = 1;
  int nt_min = 1, nt_max = 1;
  Method method = Method::quadrature;
  std::vector<double> values;  // row-major, one row per n_s
  std::vector<double> errors;  // statistical error per entry; zero for quadrature

  int rows() const { return ns_max - ns_min + 1; }
  int cols() const { return nt_max - nt_min + 1; }
  double base_period() const { return 2.0 * pulse_interval; }
  double filter_frequency() const { return std::numbers::pi / pulse_interval; }

  double& at(int ns, int nt) { return values[index(ns, nt)]; }
  double at(int ns, int nt) const { return values[index(ns, nt)]; }
  double error(int ns, int nt) const { return errors[index(ns, nt)]; }

  void resize() {
    if (ns_min < 1 || ns_max < ns_min || nt_min < 1 || nt_max < nt_min)
      throw PreconditionError("grid ranges must satisfy 1 <= min <= max");
    values.assign(std::size_t(rows()) * cols(), 0.0);
    errors.assign(values.size(), 0.0);
  }

  /// Empty string when the grid is consistent.
  std::string violation() const {
    if (values.size() != std::size_t(rows()) * cols() || errors.size() != values.size())
      return "matrix shape does not match the n_s and n_t ranges";
    for (double v : values) {
      if (!std::isfinite(v)) return "non-finite attenuation value";
      if (v < 0.0) return "negative attenuation value";
    }
    return {};
  }

 private:
  std::size_t index(int ns, int nt) const {
    if (ns < ns_min || ns > ns_max || nt < nt_min || nt > nt_max)
      throw PreconditionError("grid index out of range");
    return std::size_t(ns - ns_min) * cols() + (nt - nt_min);
  }
};

struct EngineSettings {
  Method method = Method::quadrature;
  QuadratureSettings quadrature;
  MonteCarloSettings monte_carlo;
  int threads = 1;
};

/// Fills chi over [ns_min, ns_max] x [nt_min, nt_max] for one (tau_p, k_p).
/// `block` is the single-block layout; its repetitions are ignored.
inline AttenuationGrid simulate_grid(const SpectralModel& model, const RegisterLayout& block,
                                     double pulse_interval, double wavenumber_slope, int ns_min,
                                     int ns_max, int nt_min, int nt_max,
                                     const EngineSettings& engine) {
  AttenuationGrid g;
  g.pulse_interval = pulse_interval;
  g.wavenumber_slope = wavenumber_slope;
  g.block_length = block.period();
  g.ns_min = ns_min;
  g.ns_max = ns_max;
  g.nt_min = nt_min;
  g.nt_max = nt_max;
  g.method = engine.method;
  g.resize();
  const SequenceSettings base{pulse_interval, wavenumber_slope, 1};
  base.validate();
  const auto full = block.with_repetitions(ns_max);

  if (engine.method == Method::quadrature) {
    std::vector<int> periods(g.cols());
    for (int j = 0; j < g.cols(); ++j) periods[j] = nt_min + j;
    const auto t = chi_quadrature_table(model, full, base, periods, engine.quadrature);
    for (int ns = ns_min; ns <= ns_max; ++ns)
      for (int j = 0; j < g.cols(); ++j) {
        g.values[g.cols() * (ns - ns_min) + j] = t.at(ns, j);
        g.errors[g.cols() * (ns - ns_min) + j] = t.error;  // shared absolute bound
      }
    return g;
  }

  // Distinct settings draw from distinct streams of the same seed.
  MonteCarloSettings mc = engine.monte_carlo;
  mc.seed = splitmix64(splitmix64(mc.seed ^ std::bit_cast<std::uint64_t>(pulse_interval)) ^
                       std::bit_cast<std::uint64_t>(wavenumber_slope));
  mc.threads = engine.threads;
  for (int ns = ns_min; ns <= ns_max; ++ns)
    for (int nt = nt_min; nt <= nt_max; ++nt) {
      const auto r = chi_monte_carlo(model, block.with_repetitions(ns), base.with_periods(nt), mc);
      g.at(ns, nt) = r.chi;
      g.errors[std::size_t(ns - ns_min) * g.cols() + (nt - nt_min)] = r.stderr_chi;
    }
  return g;
}

struct SlopeReport {
  double slope = 0.0;                 // A(k_p, w_p)
  std::vector<double> row_slopes;     // a_{n_s}, one per grid row
  std::vector<LinearFit> stage1;      // chi vs T per n_s
  LinearFit stage2;                   // a_{n_s} vs L
  std::optional<double> correlation_time;    // envelope decay of stage-1 residuals
  std::optional<double> correlation_length;  // envelope decay of stage-2 residuals
};

inline SlopeReport slopes_from_grid(const AttenuationGrid& g, const FitOptions& opt = {}) {
  if (g.cols() < 5) throw PreconditionError("grid needs at least 5 n_t values, has " + std::to_string(g.cols()));
  if (g.rows() < 5) throw PreconditionError("grid needs at least 5 n_s values, has " + std::to_string(g.rows()));
  if (const auto v = g.violation(); !v.empty()) throw PreconditionError(v);

  SlopeReport out;
  std::vector<double> T(g.cols());
  for (int j = 0; j < g.cols(); ++j) T[j] = (g.nt_min + j) * g.base_period();
  std::vector<double> decays;
  for (int ns = g.ns_min; ns <= g.ns_max; ++ns) {
    const std::span<const double> row(g.values.data() + std::size_t(ns - g.ns_min) * g.cols(),
                                      std::size_t(g.cols()));
    auto fit = fit_linear_tail(T, row, opt, "stage 1 (n_s=" + std::to_string(ns) + ")");
    out.row_slopes.push_back(fit.slope);
    if (fit.decay_length) decays.push_back(*fit.decay_length);
    out.stage1.push_back(std::move(fit));
  }
  if (!decays.empty()) {
    std::nth_element(decays.begin(), decays.begin() + decays.size() / 2, decays.end());
    out.correlation_time = decays[decays.size() / 2];
  }

  std::vector<double> L(g.rows());
  for (int i = 0; i < g.rows(); ++i) L[i] = (g.ns_min + i) * g.block_length;
  out.stage2 = fit_linear_tail(L, out.row_slopes, opt, "stage 2");
  out.slope = out.stage2.slope;
  out.correlation_length = out.stage2.decay_length;
  return out;
}

}  // namespace stspec
