#pragma once

// Batch stages: simulate -> slopes -> reconstruct, plus pulse-schedule export.
// Layout under the output directory:
//   coefficients.csv                       comb coefficients v_l of the block
//   grids/grid_k<kp>_w<wp>.csv (+ .json)   one per (k_p, w_p) setting
//   slopes/fits.csv                        every stage-1 and stage-2 fit line
//   slopes/slopes_k<k0>_w<w0>.csv (+ .json) one per (k_0, w_0) group
//   reconstruction.csv (+ .json)
//   schedules/schedule_k<kp>_w<wp>.csv

#include <exception>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stspec/config.hpp"
#include "stspec/io.hpp"

namespace stspec {

constexpr int kCoefficientRange = 40;

struct Setting {
  double wavenumber_slope = 0.0;  // k_p
  double filter_frequency = 1.0;  // w_p

  double pulse_interval() const { return std::numbers::pi / filter_frequency; }
  std::string name() const {
    return "k" + label(wavenumber_slope / kTwoPi) + "_w" + label(filter_frequency / kTwoPi);
  }
};

inline std::string group_name(double k0, double omega0) {
  return "k" + label(k0 / kTwoPi) + "_w" + label(omega0 / kTwoPi);
}

/// (k_p, w_p) = (m (k_0 + l k_d), m w_0) over every group, m and l; duplicates
/// are merged and the order is fixed by the reduced values.
inline std::vector<Setting> required_settings(const RunConfig& c) {
  std::map<std::pair<long long, long long>, Setting> unique;
  const auto& r = c.sweep.reconstruction;
  for (double k0 : c.sweep.k0)
    for (double w0 : c.sweep.omega0)
      for (int m = 1; m <= r.m_c; m += 2)
        for (int l = 0; l <= r.l_c; ++l) {
          const Setting s{m * (k0 + l * kTwoPi), m * w0};
          const auto key = std::pair{std::llround(s.wavenumber_slope / kTwoPi * 1e9),
                                     std::llround(s.filter_frequency / kTwoPi * 1e9)};
          unique.emplace(key, s);
        }
  std::vector<Setting> out;
  for (const auto& [key, s] : unique) out.push_back(s);
  return out;
}

namespace detail {

/// parallel_for that carries the first exception (in index order) back to the caller.
template <class F>
void parallel_for_checked(int threads, std::size_t n, F&& body) {
  std::vector<std::exception_ptr> errors(n);
  parallel_for(threads, n, [&](std::size_t i) {
    try {
      body(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline nlohmann::json layout_json(const RegisterLayout& b) {
  return {{"block_positions", b.block_positions()}, {"L0", b.period()}};
}

}  // namespace detail

struct StageContext {
  const RunConfig& config;
  fs::path out;
  int threads = 1;
  std::ostream* log = nullptr;

  std::string hash() const { return config_hash(config.source); }
  fs::path grid_path(const Setting& s) const { return out / "grids" / ("grid_" + s.name() + ".csv"); }
  fs::path slope_path(double k0, double w0) const {
    return out / "slopes" / ("slopes_" + group_name(k0, w0) + ".csv");
  }
  void note(const std::string& msg) const {
    if (log) *log << msg << "\n";
  }
};

inline std::vector<fs::path> cmd_simulate(const StageContext& ctx) {
  const auto& c = ctx.config;
  const auto settings = required_settings(c);
  const auto model = c.make_model();
  const auto block = c.block();
  const auto engine = c.engine_settings(1);
  const std::string hash = ctx.hash();
  ctx.note("simulate: " + std::to_string(settings.size()) + " settings, method " + to_string(engine.method));

  std::vector<fs::path> written(settings.size() * 2 + 1);
  try {
    std::string coeffs = header_line(hash) + "l,re_v,im_v,abs_v2\n";
    for (int l = -kCoefficientRange; l <= kCoefficientRange; ++l) {
      const auto v = spatial_coefficient(block, l);
      coeffs += std::to_string(l) + "," + num(v.real()) + "," + num(v.imag()) + "," + num(std::norm(v)) + "\n";
    }
    write_atomic(ctx.out / "coefficients.csv", coeffs);
    written.back() = ctx.out / "coefficients.csv";
    detail::parallel_for_checked(ctx.threads, settings.size(), [&](std::size_t i) {
      const auto& s = settings[i];
      const auto g = simulate_grid(model, block, s.pulse_interval(), s.wavenumber_slope, c.sweep.ns_min,
                                   c.sweep.ns_max, c.sweep.nt_min, c.sweep.nt_max, engine);
      const auto path = ctx.grid_path(s);
      write_atomic(path, grid_csv(g, hash));
      written[2 * i] = path;
      nlohmann::json meta = {{"version", STSPEC_VERSION},
                             {"config_hash", hash},
                             {"k_p_over_kd", s.wavenumber_slope / kTwoPi},
                             {"omega_p_tc_over_2pi", s.filter_frequency / kTwoPi},
                             {"tau_p", s.pulse_interval()},
                             {"ns", {c.sweep.ns_min, c.sweep.ns_max}},
                             {"nt", {c.sweep.nt_min, c.sweep.nt_max}},
                             {"method", to_string(engine.method)},
                             {"model", c.source.at("model")},
                             {"layout", detail::layout_json(block)}};
      if (engine.method == Method::monte_carlo) {
        meta["seed"] = engine.monte_carlo.seed;
        meta["realizations"] = engine.monte_carlo.realizations;
      } else {
        meta["rel_tol"] = engine.quadrature.rel_tol;
      }
      auto side = path;
      side.replace_extension(".json");
      write_atomic(side, meta.dump(2) + "\n");
      written[2 * i + 1] = side;
    });
  } catch (...) {
    for (const auto& p : written)
      if (!p.empty()) fs::remove(p);
    throw;
  }
  return written;
}

struct SlopesOutcome {
  std::vector<fs::path> files;
  std::vector<std::string> failures;  // settings whose fits were rejected
};

inline SlopesOutcome cmd_slopes(const StageContext& ctx) {
  const auto& c = ctx.config;
  const auto settings = required_settings(c);
  std::vector<std::string> missing;
  for (const auto& s : settings)
    if (!fs::exists(ctx.grid_path(s))) missing.push_back(ctx.grid_path(s).filename().string());
  if (!missing.empty()) {
    std::string msg = std::to_string(missing.size()) + " attenuation grid(s) missing:";
    for (const auto& m : missing) msg += " " + m;
    throw InputError(msg);
  }
  ctx.note("slopes: fitting " + std::to_string(settings.size()) + " grids");

  const auto block = c.block();
  const auto model = c.make_model();
  struct Entry {
    std::optional<SlopeReport> report;
    std::string error;
    double reference = 0.0;
  };
  std::vector<Entry> entries(settings.size());
  detail::parallel_for_checked(ctx.threads, settings.size(), [&](std::size_t i) {
    const auto& s = settings[i];
    AttenuationGrid g;
    g.pulse_interval = s.pulse_interval();
    g.wavenumber_slope = s.wavenumber_slope;
    g.block_length = block.period();
    g.ns_min = c.sweep.ns_min;
    g.ns_max = c.sweep.ns_max;
    g.nt_min = c.sweep.nt_min;
    g.nt_max = c.sweep.nt_max;
    read_grid_values(ctx.grid_path(s), g);
    entries[i].reference = slope_formula(model, block, {s.pulse_interval(), s.wavenumber_slope, 1},
                                         c.engine.quadrature.m_max, c.engine.slope_l_max);
    try {
      entries[i].report = slopes_from_grid(g, c.engine.fit);
    } catch (const NoLinearTrendError& e) {
      entries[i].error = e.what();
    } catch (const PreconditionError& e) {
      entries[i].error = e.what();
    }
  });

  std::map<std::pair<long long, long long>, std::size_t> lookup;
  for (std::size_t i = 0; i < settings.size(); ++i)
    lookup[{std::llround(settings[i].wavenumber_slope / kTwoPi * 1e9),
            std::llround(settings[i].filter_frequency / kTwoPi * 1e9)}] = i;

  SlopesOutcome out;
  out.files.push_back(ctx.out / "slopes" / "fits.csv");
  for (std::size_t i = 0; i < settings.size(); ++i)
    if (!entries[i].error.empty()) out.failures.push_back(settings[i].name() + ": " + entries[i].error);

  const std::string hash = ctx.hash();
  std::string lines = header_line(hash) +
                      "k_p_over_kd,omega_p_tc_over_2pi,stage,ns,slope,intercept,cutoff,residual,dof\n";
  for (std::size_t i = 0; i < settings.size(); ++i) {
    if (!entries[i].report) continue;
    const auto& rep = *entries[i].report;
    const std::string key = num(settings[i].wavenumber_slope / kTwoPi) + "," +
                            num(settings[i].filter_frequency / kTwoPi) + ",";
    auto row = [&](const std::string& stage, int ns, const LinearFit& f) {
      lines += key + stage + "," + std::to_string(ns) + "," + num(f.slope) + "," + num(f.intercept) + "," +
               std::to_string(f.cutoff) + "," + num(f.residual) + "," + std::to_string(f.dof) + "\n";
    };
    for (std::size_t j = 0; j < rep.stage1.size(); ++j) row("1", c.sweep.ns_min + int(j), rep.stage1[j]);
    row("2", 0, rep.stage2);
  }
  write_atomic(ctx.out / "slopes" / "fits.csv", lines);

  const auto& r = c.sweep.reconstruction;
  for (double k0 : c.sweep.k0)
    for (double w0 : c.sweep.omega0) {
      SlopeMatrix a(k0, w0, r.m_c, r.l_c);
      nlohmann::json fits = nlohmann::json::array();
      for (int m = 1; m <= r.m_c; m += 2)
        for (int l = 0; l <= r.l_c; ++l) {
          const auto key = std::pair{std::llround(m * (k0 + l * kTwoPi) / kTwoPi * 1e9),
                                     std::llround(m * w0 / kTwoPi * 1e9)};
          const auto& e = entries[lookup.at(key)];
          const auto idx = a.index(m, l);
          nlohmann::json f = {{"m", m}, {"l", l}, {"reference_slope", e.reference}};
          if (e.report) {
            a.values[idx] = e.report->slope;
            a.residual[idx] = e.report->stage2.residual;
            a.dof[idx] = e.report->stage2.dof;
            std::vector<std::size_t> cut1;
            for (const auto& s1 : e.report->stage1) cut1.push_back(s1.cutoff);
            f["slope"] = e.report->slope;
            f["relative_deviation"] = e.reference != 0.0 ? e.report->slope / e.reference - 1.0 : 0.0;
            f["stage1_cutoffs"] = cut1;
            f["stage2_cutoff"] = e.report->stage2.cutoff;
            f["stage2_residual"] = e.report->stage2.residual;
            f["row_slopes"] = e.report->row_slopes;
            if (e.report->correlation_time) f["t_c_estimate"] = *e.report->correlation_time;
            if (e.report->correlation_length) f["x_c_estimate"] = *e.report->correlation_length;
          } else {
            a.values[idx] = std::nan("");
            f["error"] = e.error;
          }
          fits.push_back(std::move(f));
        }
      const auto path = ctx.slope_path(k0, w0);
      write_atomic(path, slope_csv(a, hash));
      auto side = path;
      side.replace_extension(".json");
      const nlohmann::json meta = {{"version", STSPEC_VERSION},
                                   {"config_hash", hash},
                                   {"k0_over_kd", k0 / kTwoPi},
                                   {"omega0_tc_over_2pi", w0 / kTwoPi},
                                   {"m_c", r.m_c},
                                   {"l_c", r.l_c},
                                   {"fits", fits}};
      write_atomic(side, meta.dump(2) + "\n");
      out.files.push_back(path);
      out.files.push_back(side);
    }
  ctx.note("slopes: wrote " + std::to_string((out.files.size() - 1) / 2) + " slope matrices, " +
           std::to_string(out.failures.size()) + " failed fits");
  return out;
}

inline ReconstructionResult cmd_reconstruct(const StageContext& ctx) {
  const auto& c = ctx.config;
  const auto& r = c.sweep.reconstruction;
  std::vector<std::string> missing;
  for (double k0 : c.sweep.k0)
    for (double w0 : c.sweep.omega0)
      if (!fs::exists(ctx.slope_path(k0, w0)))
        missing.push_back("(k0=" + label(k0 / kTwoPi) + ", omega0=" + label(w0 / kTwoPi) + ")");
  if (!missing.empty()) {
    std::string msg = std::to_string(missing.size()) + " slope matrix file(s) missing for settings:";
    for (const auto& m : missing) msg += " " + m;
    throw InputError(msg);
  }
  std::vector<SlopeMatrix> groups;
  for (double k0 : c.sweep.k0)
    for (double w0 : c.sweep.omega0) {
      auto a = read_slope_matrix(ctx.slope_path(k0, w0), k0, w0, r.m_c, r.l_c);
      for (int m = 1; m <= r.m_c; m += 2)
        for (int l = 0; l <= r.l_c; ++l)
          if (!std::isfinite(a.at(m, l)))
            throw ReconstructionError("slope matrix " + group_name(k0, w0) + " has no valid slope for m=" +
                                      std::to_string(m) + ", l=" + std::to_string(l));
      groups.push_back(std::move(a));
    }
  ctx.note("reconstruct: " + std::to_string(groups.size()) + " slope matrices");

  const auto block = c.block();
  const auto res = comb_deconvolution(groups, block, r);
  const auto model = c.make_model();
  const std::string hash = ctx.hash();

  std::string csv = header_line(hash) +
                    "k_over_kd,omega_tc_over_2pi,S_reconstructed,S_model_if_known,m,lprime,k0,omega0,flag\n";
  double worst = 0.0, peak = 0.0;
  for (const auto& p : res.points) peak = std::max(peak, model.spectrum(p.k, p.omega));
  for (const auto& p : res.points) {
    const double ref = model.spectrum(p.k, p.omega);
    if (ref > 0.1 * peak) worst = std::max(worst, std::abs(p.value - ref) / ref);
    csv += num(p.k / kTwoPi) + "," + num(p.omega / kTwoPi) + "," + num(p.value) + "," + num(ref) + "," +
           std::to_string(p.m) + "," + std::to_string(p.lprime) + "," + num(p.k0 / kTwoPi) + "," +
           num(p.omega0 / kTwoPi) + "," + (p.negative ? "negative" : "ok") + "\n";
  }
  const fs::path path = ctx.out / "reconstruction.csv";
  write_atomic(path, csv);

  nlohmann::json cond_v = nlohmann::json::object(), sets = nlohmann::json::object();
  for (const auto& [m, v] : res.condition_V) cond_v[std::to_string(m)] = v;
  for (const auto& [m, s] : res.index_sets) sets[std::to_string(m)] = s;
  const nlohmann::json meta = {{"version", STSPEC_VERSION},
                               {"config_hash", hash},
                               {"points", res.points.size()},
                               {"condition_U", res.condition_U},
                               {"condition_V", cond_v},
                               {"index_sets", sets},
                               {"skipped_harmonics", res.skipped},
                               {"negative_values", res.has_negative},
                               {"strategy", to_string(r.strategy)},
                               {"cond_limit", r.cond_limit},
                               {"max_relative_error_above_10pct_peak", worst}};
  write_atomic(ctx.out / "reconstruction.json", meta.dump(2) + "\n");
  ctx.note("reconstruct: " + std::to_string(res.points.size()) + " points written to " + path.string());
  return res;
}

/// Pulse times of every qubit for the largest register and longest sequence
/// of each setting.
inline std::vector<fs::path> cmd_schedule(const StageContext& ctx) {
  const auto& c = ctx.config;
  const auto layout = c.block().with_repetitions(c.sweep.ns_max);
  const auto xs = layout.positions();
  const std::string hash = ctx.hash();
  std::vector<fs::path> out;
  for (const auto& s : required_settings(c)) {
    const SequenceSettings seq{s.pulse_interval(), s.wavenumber_slope, c.sweep.nt_max};
    std::string csv = header_line(hash) + "qubit,x_over_L0,pulse_index,t\n";
    for (const auto& sched : schedules_for_layout(layout, seq))
      for (std::size_t j = 0; j < sched.pulse_times.size(); ++j)
        csv += std::to_string(sched.qubit) + "," + num(xs[sched.qubit]) + "," + std::to_string(j) + "," +
               num(sched.pulse_times[j]) + "\n";
    const auto path = ctx.out / "schedules" / ("schedule_" + s.name() + ".csv");
    write_atomic(path, csv);
    out.push_back(path);
  }
  return out;
}

}  // namespace stspec
