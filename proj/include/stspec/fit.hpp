#pragma once

// Linear-trend extraction from attenuation data: chi(T) -> a_{n_s} T + b over
// the linear regime, then a_{n_s}(L) -> A L + B.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stspec/errors.hpp"

namespace stspec {

struct FitOptions {
  int min_points = 4;
  /// Accept a fit when residual-per-dof <= tolerance * (slope * span)^2.
  double tolerance = 1e-4;
  /// Onset slope, selected slope, and the slope implied by the selected tail's
  /// curvature across the data range must agree within this fraction.
  double stability = 0.05;
};

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t cutoff = 0;    // first retained index
  double residual = 0.0;     // residual sum of squares per degree of freedom
  std::size_t dof = 0;
  std::optional<double> decay_length;  // envelope scale of pre-cutoff deviations
};

namespace detail {

struct Ols {
  double slope, intercept, ssr;
};

inline Ols ols(std::span<const double> x, std::span<const double> y) {
  const double n = double(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double ssr = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - slope * x[i] - intercept;
    ssr += r * r;
  }
  return {slope, intercept, ssr};
}

}  // namespace detail

/// Scans the cutoff, fits the retained tail by least squares, and keeps the
/// cutoff with the smallest residual per degree of freedom.
inline LinearFit fit_linear_tail(std::span<const double> x, std::span<const double> y,
                                 const FitOptions& opt = {}, const std::string& stage = "fit") {
  if (opt.min_points < 3) throw PreconditionError("min_points must be >= 3");
  if (x.size() != y.size()) throw PreconditionError("x and y differ in length");
  const std::size_t n = x.size();
  if (n < std::size_t(opt.min_points) + 2)
    throw PreconditionError("linear fit needs at least min_points + 2 = " +
                            std::to_string(opt.min_points + 2) + " points, got " +
                            std::to_string(n));
  for (std::size_t i = 1; i < n; ++i)
    if (!(x[i] > x[i - 1])) throw PreconditionError("abscissae must be strictly increasing");
  for (double v : y)
    if (!std::isfinite(v)) throw PreconditionError("non-finite data value");

  const auto [ylo, yhi] = std::minmax_element(y.begin(), y.end());
  const double floor = 1e-24 * std::max(1e-300, (*yhi - *ylo) * (*yhi - *ylo));

  const std::size_t last = n - opt.min_points;
  std::vector<detail::Ols> fits;
  std::vector<double> per_dof;
  for (std::size_t c = 0; c <= last; ++c) {
    fits.push_back(detail::ols(x.subspan(c), y.subspan(c)));
    per_dof.push_back(std::max(0.0, fits.back().ssr / double(n - c - 2)));
  }
  auto accepted = [&](std::size_t c) {
    const double span = x[n - 1] - x[c];
    const double scale = fits[c].slope * span;
    return per_dof[c] <= std::max(floor, opt.tolerance * scale * scale);
  };

  // Residuals below the rounding floor count as exact zeros; ties keep the
  // earliest cutoff.
  for (auto& r : per_dof)
    if (r <= floor) r = 0.0;
  const auto best = std::size_t(std::min_element(per_dof.begin(), per_dof.end()) - per_dof.begin());

  if (!accepted(best))
    throw NoLinearTrendError(stage, "best residual per dof " + std::to_string(per_dof[best]) +
                                        " exceeds the acceptance threshold");
  std::size_t onset = best;
  for (std::size_t c = 0; c <= last; ++c)
    if (accepted(c)) {
      onset = c;
      break;
    }
  // A decaying transient leaves the selected tail nearly straight, while a
  // drifting slope keeps its curvature; extrapolate that curvature over the
  // whole abscissa range.
  std::vector<double> slopes{fits[onset].slope, fits[best].slope};
  if (n - best >= 3) {
    const std::size_t m = n - best;
    const double mid = 0.5 * (x[best] + x[n - 1]);
    Eigen::MatrixXd design(m, 3);
    Eigen::VectorXd rhs(m);
    for (std::size_t i = 0; i < m; ++i) {
      const double u = x[best + i] - mid;
      design.row(i) << 1.0, u, u * u;
      rhs(i) = y[best + i];
    }
    const Eigen::Vector3d q = design.colPivHouseholderQr().solve(rhs);
    const double range = x[n - 1] - x[0];
    slopes.push_back(q(1) - q(2) * range);
    slopes.push_back(q(1) + q(2) * range);
  }
  const auto [lo, hi] = std::minmax_element(slopes.begin(), slopes.end());
  if (*hi - *lo > opt.stability * std::abs(fits[best].slope))
    throw NoLinearTrendError(stage, "slope drifts between " + std::to_string(*lo) + " and " +
                                        std::to_string(*hi) + " across the data range");

  LinearFit out;
  out.slope = fits[best].slope;
  out.intercept = fits[best].intercept;
  out.cutoff = best;
  out.residual = per_dof[best];
  out.dof = n - best - 2;

  // Envelope of the pre-cutoff deviations: log|r| = log A - x / ell.
  std::vector<double> ex, ly;
  for (std::size_t i = 0; i < best; ++i) {
    const double r = std::abs(y[i] - out.slope * x[i] - out.intercept);
    if (r > 0) {
      ex.push_back(x[i]);
      ly.push_back(std::log(r));
    }
  }
  if (ex.size() >= 2) {
    const auto env = detail::ols(ex, ly);
    if (env.slope < 0) out.decay_length = -1.0 / env.slope;
  }
  return out;
}

inline LinearFit fit_linear_tail(const std::vector<double>& x, const std::vector<double>& y,
                                 const FitOptions& opt = {}, const std::string& stage = "fit") {
  return fit_linear_tail(std::span<const double>(x), std::span<const double>(y), opt, stage);
}

}  // namespace stspec
