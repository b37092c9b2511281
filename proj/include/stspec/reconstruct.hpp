#pragma once

// Comb deconvolution of spectroscopic slopes. A slope matrix for primary
// settings (k_0, w_0) holds A_{m,l} = A(m (k_0 + l k_d), m w_0). Inverting the
// harmonic mixing (U) and then the spatial comb mixing (V^(m)) yields
// S(m k_0 - l' k_d, m w_0) for l' in the truncation set of harmonic m.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stspec/attenuation.hpp"
#include "stspec/errors.hpp"
#include "stspec/register.hpp"
#include "stspec/spectra.hpp"

namespace stspec {

namespace detail {

inline void require_odd_cutoff(int m_c) {
  if (m_c < 1 || m_c % 2 == 0) throw PreconditionError("m_c must be odd and >= 1");
}

}  // namespace detail

/// U_{m,m'} = (4/pi^2) (m/m')^2 when m divides m', over odd m, m' <= m_c.
inline Eigen::MatrixXd build_U(int m_c) {
  detail::require_odd_cutoff(m_c);
  const int n = (m_c + 1) / 2;
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      const int m = 2 * i + 1, mp = 2 * j + 1;
      if (mp % m == 0) {
        const double ratio = double(mp / m);
        u(i, j) = 4.0 / (std::numbers::pi * std::numbers::pi * ratio * ratio);
      }
    }
  return u;
}

inline Eigen::MatrixXd build_U_inverse(int m_c) {
  const Eigen::MatrixXd u = build_U(m_c);
  return u.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(u.rows(), u.cols()));
}

enum class IndexStrategy { centered, largest_weights };

inline std::string to_string(IndexStrategy s) {
  return s == IndexStrategy::centered ? "centered" : "largest_weights";
}

inline IndexStrategy strategy_from_string(const std::string& s) {
  if (s == "centered") return IndexStrategy::centered;
  if (s == "largest_weights") return IndexStrategy::largest_weights;
  throw PreconditionError("unknown index strategy '" + s + "'");
}

/// Truncation set for harmonic m. The comb weights do not depend on m, so
/// both strategies return the same set for every harmonic.
inline std::vector<int> choose_index_set(const RegisterLayout& layout, int m, int l_c,
                                         IndexStrategy strategy, int l_scan = 40) {
  (void)m;
  if (l_c < 0) throw PreconditionError("l_c must be >= 0");
  if (strategy == IndexStrategy::centered) {
    if (l_c % 2 != 0) throw PreconditionError("centered index set needs even l_c");
    std::vector<int> out;
    for (int l = -l_c / 2; l <= l_c / 2; ++l) out.push_back(l);
    return out;
  }
  l_scan = std::max(l_scan, l_c);
  double wmax = 0.0;
  std::vector<std::pair<int, double>> w;
  for (int l = -l_scan; l <= l_scan; ++l) {
    w.emplace_back(l, comb_weight(layout, l));
    wmax = std::max(wmax, w.back().second);
  }
  // Weights equal up to rounding compare equal, so ties go to smaller |l|.
  auto key = [&](double v) { return wmax > 0 ? std::llround(v / wmax * 1e10) : 0LL; };
  std::stable_sort(w.begin(), w.end(), [&](const auto& a, const auto& b) {
    const auto ka = key(a.second), kb = key(b.second);
    if (ka != kb) return ka > kb;
    if (std::abs(a.first) != std::abs(b.first)) return std::abs(a.first) < std::abs(b.first);
    return a.first < b.first;
  });
  std::vector<int> out;
  for (int i = 0; i <= l_c; ++i) out.push_back(w[i].first);
  std::sort(out.begin(), out.end());
  return out;
}

/// V^(m)_{l,j} = |v_{L_j + m l}|^2 for l = 0..l_c.
inline Eigen::MatrixXd build_V(const RegisterLayout& layout, int m, const std::vector<int>& set) {
  const int n = int(set.size());
  Eigen::MatrixXd v(n, n);
  for (int l = 0; l < n; ++l)
    for (int j = 0; j < n; ++j) v(l, j) = comb_weight(layout, set[j] + m * l);
  return v;
}

inline double condition_number(const Eigen::MatrixXd& a) {
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  return smin > 0.0 ? s(0) / smin : std::numeric_limits<double>::infinity();
}

inline Eigen::MatrixXd build_V_inverse(const RegisterLayout& layout, int m, int l_c,
                                       const std::vector<int>& set, double cond_limit = 1e8,
                                       double* condition = nullptr) {
  if (int(set.size()) != l_c + 1) throw PreconditionError("index set must hold l_c + 1 indices");
  auto sorted = set;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw PreconditionError("index set entries must be distinct");
  const Eigen::MatrixXd v = build_V(layout, m, set);
  const double cond = condition_number(v);
  if (condition) *condition = cond;
  if (!(cond <= cond_limit)) throw IllConditionedError(m, set, cond);
  return v.partialPivLu().inverse();
}

struct SlopeMatrix {
  double k0 = 0.0;
  double omega0 = 0.0;
  int m_c = 1;
  int l_c = 0;
  std::vector<double> values;    // row-major: row (m - 1) / 2, column l
  std::vector<double> residual;  // stage-2 residual per dof for each entry
  std::vector<std::size_t> dof;

  SlopeMatrix() = default;
  SlopeMatrix(double k0_, double omega0_, int m_c_, int l_c_) : k0(k0_), omega0(omega0_), m_c(m_c_), l_c(l_c_) {
    detail::require_odd_cutoff(m_c);
    if (l_c < 0) throw PreconditionError("l_c must be >= 0");
    values.assign(std::size_t(rows()) * cols(), 0.0);
    residual.assign(values.size(), 0.0);
    dof.assign(values.size(), 0);
  }

  int rows() const { return (m_c + 1) / 2; }
  int cols() const { return l_c + 1; }
  std::size_t index(int m, int l) const {
    if (m < 1 || m > m_c || m % 2 == 0 || l < 0 || l > l_c)
      throw PreconditionError("slope matrix index (m=" + std::to_string(m) + ", l=" +
                              std::to_string(l) + ") out of range");
    return std::size_t((m - 1) / 2) * cols() + l;
  }
  double& at(int m, int l) { return values[index(m, l)]; }
  double at(int m, int l) const { return values[index(m, l)]; }

  /// Sequence settings whose slope fills entry (m, l).
  double filter_frequency(int m) const { return m * omega0; }
  double wavenumber_slope(int m, int l, double kd) const { return m * (k0 + l * kd); }
};

/// Slopes predicted by the comb truncated to `sets` and to harmonics <= m_c;
/// comb_deconvolution inverts this map exactly.
inline SlopeMatrix truncated_slopes(const SpectralModel& model, const RegisterLayout& layout,
                                    double k0, double omega0, int m_c, int l_c,
                                    const std::map<int, std::vector<int>>& sets) {
  SlopeMatrix a(k0, omega0, m_c, l_c);
  const Eigen::MatrixXd u = build_U(m_c);
  const double kd = layout.comb_spacing();
  for (int mp = 1; mp <= m_c; mp += 2)
    for (int l = 0; l <= l_c; ++l) {
      double acc = 0.0;
      for (int M = mp; M <= m_c; M += 2 * mp) {
        double inner = 0.0;
        for (int lp : sets.at(M))
          inner += comb_weight(layout, lp + M * l) * model.spectrum(M * k0 - lp * kd, M * omega0);
        acc += u((mp - 1) / 2, (M - 1) / 2) * inner;
      }
      a.at(mp, l) = acc;
    }
  return a;
}

/// Slopes from the full second-stage slope formula.
inline SlopeMatrix exact_slopes(const SpectralModel& model, const RegisterLayout& layout,
                                double k0, double omega0, int m_c, int l_c, int m_max = 41,
                                int l_max = 200) {
  SlopeMatrix a(k0, omega0, m_c, l_c);
  const double kd = layout.comb_spacing();
  for (int m = 1; m <= m_c; m += 2)
    for (int l = 0; l <= l_c; ++l) {
      const auto s = SequenceSettings::from_frequency(a.filter_frequency(m), a.wavenumber_slope(m, l, kd), 1);
      a.at(m, l) = slope_formula(model, layout, s, m_max, l_max);
    }
  return a;
}

struct ReconstructedPoint {
  double k = 0.0;
  double omega = 0.0;
  double value = 0.0;
  int m = 1;
  int lprime = 0;
  double k0 = 0.0;
  double omega0 = 0.0;
  bool negative = false;
};

struct ReconstructionResult {
  std::vector<ReconstructedPoint> points;
  std::map<int, std::vector<int>> index_sets;
  double condition_U = 0.0;
  std::map<int, double> condition_V;  // every harmonic that was attempted
  std::vector<int> skipped;           // harmonics with ill-conditioned V^(m)
  bool has_negative = false;
};

struct ReconstructionOptions {
  int m_c = 3;
  int l_c = 4;
  IndexStrategy strategy = IndexStrategy::centered;
  double cond_limit = 1e8;
};

inline ReconstructionResult comb_deconvolution(const std::vector<SlopeMatrix>& groups,
                                          const RegisterLayout& layout,
                                          const ReconstructionOptions& opt = {}) {
  detail::require_odd_cutoff(opt.m_c);
  ReconstructionResult out;
  const Eigen::MatrixXd u_inv = build_U_inverse(opt.m_c);
  out.condition_U = condition_number(build_U(opt.m_c));

  std::map<int, Eigen::MatrixXd> v_inv;
  for (int m = 1; m <= opt.m_c; m += 2) {
    auto set = choose_index_set(layout, m, opt.l_c, opt.strategy);
    out.index_sets[m] = set;
    double cond = 0.0;
    try {
      v_inv[m] = build_V_inverse(layout, m, opt.l_c, set, opt.cond_limit, &cond);
    } catch (const IllConditionedError&) {
      out.skipped.push_back(m);
    }
    out.condition_V[m] = cond;
  }
  if (v_inv.empty())
    throw ReconstructionError("every comb matrix V^(m) for m <= " + std::to_string(opt.m_c) +
                              " is ill-conditioned; reconstruction is impossible");

  const double kd = layout.comb_spacing();
  for (const auto& a : groups) {
    if (a.m_c != opt.m_c || a.l_c != opt.l_c)
      throw PreconditionError("slope matrix shape does not match m_c and l_c");
    if (a.values.size() != std::size_t(a.rows()) * a.cols())
      throw PreconditionError("slope matrix is incomplete");
    const Eigen::MatrixXd A = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        a.values.data(), a.rows(), a.cols());
    const Eigen::MatrixXd B = u_inv * A;
    for (const auto& [m, vi] : v_inv) {
      const Eigen::VectorXd s = vi * B.row((m - 1) / 2).transpose();
      const auto& set = out.index_sets[m];
      for (int j = 0; j < int(set.size()); ++j) {
        ReconstructedPoint p;
        p.k = m * a.k0 - set[j] * kd;
        p.omega = m * a.omega0;
        p.value = s(j);
        p.m = m;
        p.lprime = set[j];
        p.k0 = a.k0;
        p.omega0 = a.omega0;
        p.negative = p.value < 0.0;
        out.has_negative = out.has_negative || p.negative;
        out.points.push_back(p);
      }
    }
  }
  return out;
}

}  // namespace stspec
