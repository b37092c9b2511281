#pragma once

// Globally adaptive Gauss-Kronrod (7/15) quadrature for vector-valued
// integrands. All components share one panel partition; a panel is refined
// while any component misses its tolerance.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "stspec/errors.hpp"

namespace stspec::quad {

struct Options {
  double rel_tol = 1e-10;
  double abs_tol = 0.0;
  std::size_t max_panels = 200000;
};

struct Result {
  std::vector<double> value;
  std::vector<double> error;
  std::size_t panels = 0;
  bool converged = false;
};

/// Integrand contract: fill `out` (already sized) with the components at x.
using VectorIntegrand = std::function<void(double, std::span<double>)>;

namespace detail {

inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};

inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};

// Gauss weights for the 7-point rule living on the odd Kronrod nodes.
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a = 0.0;
  double b = 0.0;
  std::vector<double> value;
  std::vector<double> error;
  double priority = 0.0;
};

inline void gk15(const VectorIntegrand& f, double a, double b, std::size_t dim,
                 std::vector<double>& buf, Panel& p) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  p.a = a;
  p.b = b;
  p.value.assign(dim, 0.0);
  p.error.assign(dim, 0.0);
  std::vector<double> gauss(dim, 0.0);
  std::vector<double> lo(dim, 0.0);

  buf.assign(dim, 0.0);
  f(c, buf);
  for (std::size_t d = 0; d < dim; ++d) {
    p.value[d] = kWgk[7] * buf[d];
    gauss[d] = kWg[3] * buf[d];
  }
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kXgk[j];
    std::fill(lo.begin(), lo.end(), 0.0);
    f(c - dx, lo);
    std::fill(buf.begin(), buf.end(), 0.0);
    f(c + dx, buf);
    for (std::size_t d = 0; d < dim; ++d) {
      const double s = lo[d] + buf[d];
      p.value[d] += kWgk[j] * s;
      if (j % 2 == 1) gauss[d] += kWg[j / 2] * s;
    }
  }
  for (std::size_t d = 0; d < dim; ++d) {
    p.value[d] *= h;
    gauss[d] *= h;
    p.error[d] = std::abs(p.value[d] - gauss[d]);
  }
}

}  // namespace detail

/// Integrates `f` over consecutive intervals [breaks[i], breaks[i+1]].
inline Result integrate(const VectorIntegrand& f, std::span<const double> breaks,
                        std::size_t dim, const Options& opt = {}) {
  using detail::Panel;
  Result res;
  res.value.assign(dim, 0.0);
  res.error.assign(dim, 0.0);
  if (breaks.size() < 2 || dim == 0) {
    res.converged = true;
    return res;
  }

  std::vector<Panel> panels;
  panels.reserve(breaks.size() * 2);
  std::vector<double> buf;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    if (!(breaks[i + 1] > breaks[i])) continue;
    Panel p;
    detail::gk15(f, breaks[i], breaks[i + 1], dim, buf, p);
    panels.push_back(std::move(p));
  }

  auto totals = [&] {
    std::fill(res.value.begin(), res.value.end(), 0.0);
    std::fill(res.error.begin(), res.error.end(), 0.0);
    for (const auto& p : panels)
      for (std::size_t d = 0; d < dim; ++d) {
        res.value[d] += p.value[d];
        res.error[d] += p.error[d];
      }
  };
  auto target = [&](std::size_t d) {
    return std::max(opt.abs_tol, opt.rel_tol * std::abs(res.value[d]));
  };
  auto done = [&] {
    for (std::size_t d = 0; d < dim; ++d)
      if (res.error[d] > target(d)) return false;
    return true;
  };
  // Priority of a panel: its worst error relative to each component target.
  auto rank = [&](Panel& p) {
    double worst = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double t = target(d);
      worst = std::max(worst, t > 0 ? p.error[d] / t : p.error[d] * 1e300);
    }
    p.priority = worst;
  };

  totals();
  while (!done()) {
    if (panels.size() >= opt.max_panels) break;
    for (auto& p : panels) rank(p);
    // Refine the worst few percent of panels in one sweep.
    std::vector<std::size_t> order(panels.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const std::size_t batch = std::max<std::size_t>(1, panels.size() / 20);
    std::partial_sort(order.begin(), order.begin() + std::min(batch, order.size()),
                      order.end(), [&](std::size_t l, std::size_t r) {
                        return panels[l].priority > panels[r].priority;
                      });
    std::vector<Panel> fresh;
    for (std::size_t i = 0; i < std::min(batch, order.size()); ++i) {
      Panel& p = panels[order[i]];
      if (p.priority <= 0.0) break;
      const double mid = 0.5 * (p.a + p.b);
      if (!(mid > p.a && mid < p.b)) continue;
      Panel right;
      detail::gk15(f, mid, p.b, dim, buf, right);
      Panel left;
      detail::gk15(f, p.a, mid, dim, buf, left);
      p = std::move(left);
      fresh.push_back(std::move(right));
    }
    if (fresh.empty()) break;
    for (auto& p : fresh) panels.push_back(std::move(p));
    totals();
  }
  res.panels = panels.size();
  res.converged = done();
  return res;
}

/// Integrates over [a, inf) using x = a + s (1 - u) / u, u in (0, 1].
inline Result integrate_to_infinity(const VectorIntegrand& f, double a, double scale,
                                    std::size_t dim, const Options& opt = {},
                                    int initial_panels = 16) {
  VectorIntegrand g = [&](double u, std::span<double> out) {
    if (u <= 0.0) {
      std::fill(out.begin(), out.end(), 0.0);
      return;
    }
    const double x = a + scale * (1.0 - u) / u;
    f(x, out);
    const double jac = scale / (u * u);
    for (auto& v : out) v *= jac;
  };
  std::vector<double> breaks(initial_panels + 1);
  for (int i = 0; i <= initial_panels; ++i) breaks[i] = double(i) / initial_panels;
  return integrate(g, breaks, dim, opt);
}

/// Scalar convenience wrapper; throws AccuracyError when not converged.
inline double integrate_scalar(const std::function<double(double)>& f, double a, double b,
                               const Options& opt = {}, int initial_panels = 1) {
  VectorIntegrand g = [&](double x, std::span<double> out) { out[0] = f(x); };
  std::vector<double> breaks(initial_panels + 1);
  for (int i = 0; i <= initial_panels; ++i)
    breaks[i] = a + (b - a) * double(i) / initial_panels;
  auto r = integrate(g, breaks, 1, opt);
  if (!r.converged) throw AccuracyError("scalar quadrature did not converge", r.error[0]);
  return r.value[0];
}

}  // namespace stspec::quad
