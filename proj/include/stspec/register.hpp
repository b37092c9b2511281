#pragma once

// Linear qubit register built from n_s identical blocks of period L_0.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "stspec/errors.hpp"

namespace stspec {

using complex = std::complex<double>;

class RegisterLayout {
 public:
  RegisterLayout() = default;

  /// Validates 0 < x_1 < ... < x_N0 < L_0 and x_1 + x_N0 = L_0.
  RegisterLayout(std::vector<double> block_positions, double period, int repetitions = 1)
      : positions_(std::move(block_positions)), period_(period), repetitions_(repetitions) {
    if (auto why = violation()) throw LayoutError(*why);
  }

  std::span<const double> block_positions() const { return positions_; }
  double period() const { return period_; }
  int repetitions() const { return repetitions_; }
  int block_size() const { return int(positions_.size()); }
  int qubit_count() const { return block_size() * repetitions_; }
  double length() const { return period_ * repetitions_; }
  double comb_spacing() const { return 2.0 * std::numbers::pi / period_; }

  RegisterLayout with_repetitions(int ns) const { return {positions_, period_, ns}; }

  /// Positions of all N = n_s N_0 qubits, block by block.
  std::vector<double> positions() const {
    std::vector<double> out;
    out.reserve(qubit_count());
    for (int r = 0; r < repetitions_; ++r)
      for (double x : positions_) out.push_back(x + r * period_);
    return out;
  }

  std::optional<std::string> violation() const {
    if (positions_.empty()) return "layout needs at least one qubit per block";
    if (!(period_ > 0.0) || !std::isfinite(period_)) return "period must be positive";
    if (repetitions_ < 1) return "repetitions must be >= 1";
    for (std::size_t i = 0; i < positions_.size(); ++i) {
      const double x = positions_[i];
      if (!std::isfinite(x) || !(x > 0.0) || !(x < period_))
        return "block positions must lie inside (0, L0)";
      if (i > 0 && !(x > positions_[i - 1]))
        return "block positions must be strictly increasing";
    }
    const double closure = positions_.front() + positions_.back() - period_;
    if (std::abs(closure) > 1e-9 * period_) return "block must satisfy x_1 + x_N0 = L0";
    return std::nullopt;
  }

  friend bool operator==(const RegisterLayout&, const RegisterLayout&) = default;

 private:
  std::vector<double> positions_;
  double period_ = 1.0;
  int repetitions_ = 1;
};

// Shortest round-trip decimal form of a double.
inline std::string format_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  while (first < last && *first == ' ') ++first;
  auto r = std::from_chars(first, last, v);
  if (r.ec != std::errc{}) throw Error("cannot parse number '" + std::string(s) + "'");
  return v;
}

/// Text form "L0 ns x_1 ... x_N0"; round-trips bit-exactly.
inline std::string serialize(const RegisterLayout& layout) {
  std::string s = format_double(layout.period()) + " " + std::to_string(layout.repetitions());
  for (double x : layout.block_positions()) s += " " + format_double(x);
  return s;
}

inline RegisterLayout deserialize_layout(const std::string& text) {
  std::istringstream in(text);
  std::string tok;
  std::vector<std::string> toks;
  while (in >> tok) toks.push_back(tok);
  if (toks.size() < 3) throw LayoutError("layout text needs period, repetitions, positions");
  std::vector<double> xs;
  for (std::size_t i = 2; i < toks.size(); ++i) xs.push_back(parse_double(toks[i]));
  return {std::move(xs), parse_double(toks[0]), std::stoi(toks[1])};
}

enum class LayoutKind { regular, compressed, jittered };

struct LayoutRecipe {
  LayoutKind kind = LayoutKind::regular;
  int block_size = 4;
  double period = 1.0;
  double gamma = 1.0;   // compressed
  double sigma = 0.0;   // jittered
  std::uint64_t seed = 0;
  int max_retries = 100;
};

/// Generates a regular, compressed or jittered block.
inline RegisterLayout make_layout(const LayoutRecipe& r) {
  if (r.block_size < 1) throw LayoutError("N0 must be >= 1");
  if (!(r.period > 0.0)) throw LayoutError("L0 must be positive");
  const int n0 = r.block_size;
  const double step = r.period / (n0 + 1);
  std::vector<double> xs(n0);
  switch (r.kind) {
    case LayoutKind::regular:
      for (int q = 1; q <= n0; ++q) xs[q - 1] = q * step;
      break;
    case LayoutKind::compressed:
      if (!(r.gamma > 0.0 && r.gamma <= 1.0)) throw LayoutError("gamma must be in (0, 1]");
      for (int q = 1; q <= n0; ++q)
        xs[q - 1] = q * r.gamma * step + (1.0 - r.gamma) * r.period / 2.0;
      break;
    case LayoutKind::jittered: {
      if (!(r.sigma >= 0.0)) throw LayoutError("sigma must be >= 0");
      std::mt19937_64 rng(r.seed);
      for (int attempt = 0; attempt <= r.max_retries; ++attempt) {
        for (int q = 1; q < n0; ++q) {
          std::normal_distribution<double> g(q * step, r.sigma);
          xs[q - 1] = r.sigma > 0.0 ? g(rng) : q * step;
        }
        xs[n0 - 1] = n0 == 1 ? r.period / 2.0 : r.period - xs[0];
        RegisterLayout candidate;
        bool ok = true;
        try {
          candidate = RegisterLayout(xs, r.period, 1);
        } catch (const LayoutError&) {
          ok = false;
        }
        if (ok) return candidate;
      }
      throw LayoutError("jittered layout: no valid ordering after " +
                        std::to_string(r.max_retries) + " redraws");
    }
  }
  return {std::move(xs), r.period, 1};
}

/// v_{l k_d} = (1/L_0) sum_q exp(-i l k_d x_q) over one block.
inline complex spatial_coefficient(const RegisterLayout& layout, int l) {
  const double kd = layout.comb_spacing();
  complex s = 0.0;
  for (double x : layout.block_positions()) s += std::polar(1.0, -l * kd * x);
  return s / layout.period();
}

inline double comb_weight(const RegisterLayout& layout, int l) {
  return std::norm(spatial_coefficient(layout, l));
}

/// Coefficient v_{l 2pi/L} of the whole register over its full length L.
inline complex full_register_coefficient(const RegisterLayout& layout, int l) {
  const double L = layout.length();
  const double kl = 2.0 * std::numbers::pi / L;
  complex s = 0.0;
  for (double x : layout.positions()) s += std::polar(1.0, -l * kl * x);
  return s / L;
}

struct RevivalReport {
  std::optional<double> period;  // set when similarity >= threshold
  double best_lag = 0.0;         // refined lag with the highest similarity
  double similarity = 0.0;       // Pearson correlation at that lag, clamped to [0, 1]
  bool degenerate = false;       // |v_l|^2 does not vary with l
};

/// Looks for near-periodic revivals of |v_l|^2, l = 0..l_max.
inline RevivalReport revival_diagnostic(const RegisterLayout& layout, int l_max,
                                        double threshold = 0.9) {
  const int n0 = layout.block_size();
  if (l_max < 2 * (n0 + 1)) throw PreconditionError("revival diagnostic needs l_max >= 2(N0+1)");
  std::vector<double> w(l_max + 1);
  for (int l = 0; l <= l_max; ++l) w[l] = comb_weight(layout, l);

  RevivalReport rep;
  const auto [lo, hi] = std::minmax_element(w.begin(), w.end());
  if (*hi - *lo <= 1e-12 * std::max(1.0, *hi)) {
    rep.degenerate = true;
    rep.period = 1.0;
    rep.best_lag = 1.0;
    rep.similarity = 1.0;
    return rep;
  }

  auto pearson = [&](int lag) {
    const int n = l_max + 1 - lag;
    double ma = 0, mb = 0;
    for (int i = 0; i < n; ++i) {
      ma += w[i];
      mb += w[i + lag];
    }
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (int i = 0; i < n; ++i) {
      const double a = w[i] - ma, b = w[i + lag] - mb;
      sab += a * b;
      saa += a * a;
      sbb += b * b;
    }
    if (saa <= 0 || sbb <= 0) return 0.0;
    return sab / std::sqrt(saa * sbb);
  };

  const int max_lag = l_max / 2;
  std::vector<double> sim(max_lag + 1, 0.0);
  for (int lag = 1; lag <= max_lag; ++lag) sim[lag] = pearson(lag);

  // First local maximum within 2% of the global maximum (lags >= 2).
  double best = -1.0;
  for (int lag = 2; lag <= max_lag; ++lag) best = std::max(best, sim[lag]);
  int lag0 = 2;
  for (int lag = 2; lag <= max_lag; ++lag)
    if (sim[lag] >= best - 0.02 && sim[lag] >= sim[lag - 1] &&
        (lag == max_lag || sim[lag] >= sim[lag + 1])) {
      lag0 = lag;
      break;
    }

  // Refine with higher harmonics: least-squares slope of peak lag vs harmonic.
  double num = 0.0, den = 0.0;
  for (int h = 1; h * lag0 <= max_lag; ++h) {
    const int centre = int(std::lround(h * (num > 0 ? num / den : lag0)));
    if (centre < 2 || centre > max_lag) break;
    int arg = centre;
    for (int d = -1; d <= 1; ++d) {
      const int c = centre + d;
      if (c >= 2 && c <= max_lag && sim[c] > sim[arg]) arg = c;
    }
    num += h * double(arg);
    den += double(h) * h;
  }
  rep.best_lag = den > 0 ? num / den : lag0;
  rep.similarity = std::clamp(sim[lag0], 0.0, 1.0);
  if (rep.similarity >= threshold) rep.period = rep.best_lag;
  return rep;
}

}  // namespace stspec
