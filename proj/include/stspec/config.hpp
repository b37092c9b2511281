#pragma once

// Run configuration. Files use reduced units: lengths in L_0, wavenumbers in
// k_d = 2 pi / L_0, times in the file's time unit u, frequencies in cycles per
// u (multiples of 2 pi / u). Internally L_0 = 1 and u = 1, so only wavenumbers
// and frequencies are rescaled by 2 pi on load.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stspec/errors.hpp"
#include "stspec/fit.hpp"
#include "stspec/grid.hpp"
#include "stspec/reconstruct.hpp"
#include "stspec/register.hpp"
#include "stspec/spectra.hpp"

namespace stspec {

using json = nlohmann::json;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct ModelConfig {
  std::string type = "lorentzian_factorized";
  LorentzianFactorizedModel::Params params;  // internal units
};

struct RegisterConfig {
  std::optional<std::vector<double>> positions;
  LayoutRecipe recipe;
};

struct SweepConfig {
  std::vector<double> k0;      // internal units
  std::vector<double> omega0;  // internal units
  int ns_min = 1, ns_max = 1;
  int nt_min = 1, nt_max = 1;
  ReconstructionOptions reconstruction;
};

struct EngineConfig {
  Method method = Method::quadrature;
  int realizations = 10000;
  std::optional<std::uint64_t> seed;
  QuadratureSettings quadrature;
  FitOptions fit;
  int slope_l_max = 2000;  // comb terms for reference slopes in diagnostics
};

struct RunConfig {
  ModelConfig model;
  RegisterConfig reg;
  SweepConfig sweep;
  EngineConfig engine;
  std::string output = "out";
  json source;  // the parsed document, after command-line overrides

  LorentzianFactorizedModel make_model() const { return LorentzianFactorizedModel(model.params); }

  RegisterLayout block() const {
    if (reg.positions) return RegisterLayout(*reg.positions, 1.0);
    return make_layout(reg.recipe);
  }

  EngineSettings engine_settings(int threads) const {
    EngineSettings e;
    e.method = engine.method;
    e.quadrature = engine.quadrature;
    e.monte_carlo.realizations = engine.realizations;
    e.monte_carlo.seed = engine.seed.value_or(0);
    e.monte_carlo.m_max = engine.quadrature.m_max;
    e.threads = threads;
    return e;
  }
};

namespace detail {

inline const json& section(const json& doc, const std::string& key) {
  if (!doc.contains(key)) throw ConfigError(key, "missing section");
  if (!doc.at(key).is_object()) throw ConfigError(key, "must be an object");
  return doc.at(key);
}

template <class T>
T field(const json& obj, const std::string& path, const std::string& key) {
  const std::string where = path + "." + key;
  if (!obj.contains(key)) throw ConfigError(where, "missing");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where, "has the wrong type");
  }
}

template <class T>
T field_or(const json& obj, const std::string& path, const std::string& key, T fallback) {
  return obj.contains(key) ? field<T>(obj, path, key) : fallback;
}

inline double positive(double v, const std::string& where) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(where, "must be a positive number");
  return v;
}

inline std::pair<int, int> range(const json& obj, const std::string& path, const std::string& key) {
  const auto r = field<std::vector<int>>(obj, path, key);
  const std::string where = path + "." + key;
  if (r.size() != 2) throw ConfigError(where, "must be [min, max]");
  if (r[0] < 1 || r[1] < r[0]) throw ConfigError(where, "must satisfy 1 <= min <= max");
  return {r[0], r[1]};
}

}  // namespace detail

/// Validates every section before anything is computed.
inline RunConfig parse_config(const json& doc) {
  using detail::field;
  using detail::field_or;
  if (!doc.is_object()) throw ConfigError("<root>", "must be an object");
  RunConfig c;
  c.source = doc;

  const auto& m = detail::section(doc, "model");
  c.model.type = field_or<std::string>(m, "model", "type", "lorentzian_factorized");
  if (c.model.type != "lorentzian_factorized")
    throw ConfigError("model.type", "unknown model '" + c.model.type + "'");
  auto& p = c.model.params;
  p.nu_s = field_or<double>(m, "model", "nu_s", 1.0);
  p.nu_t = field_or<double>(m, "model", "nu_t", 1.0);
  p.xc = detail::positive(field<double>(m, "model", "xc"), "model.xc");
  p.tc = detail::positive(field<double>(m, "model", "tc"), "model.tc");
  p.ks = kTwoPi * field_or<double>(m, "model", "ks", 0.0);
  p.ws = kTwoPi * field_or<double>(m, "model", "ws", 0.0);
  p.mean = field_or<double>(m, "model", "mean", 0.0);
  try {
    LorentzianFactorizedModel check(p);
  } catch (const InvalidModelError& e) {
    throw ConfigError("model", e.what());
  }

  const auto& r = detail::section(doc, "register");
  if (r.contains("positions")) {
    c.reg.positions = field<std::vector<double>>(r, "register", "positions");
    try {
      RegisterLayout check(*c.reg.positions, 1.0);
    } catch (const LayoutError& e) {
      throw ConfigError("register.positions", e.what());
    }
  } else {
    const auto kind = field<std::string>(r, "register", "kind");
    if (kind == "regular") c.reg.recipe.kind = LayoutKind::regular;
    else if (kind == "compressed") c.reg.recipe.kind = LayoutKind::compressed;
    else if (kind == "jittered") c.reg.recipe.kind = LayoutKind::jittered;
    else throw ConfigError("register.kind", "must be regular, compressed or jittered");
    c.reg.recipe.block_size = field_or<int>(r, "register", "N0", 4);
    c.reg.recipe.gamma = field_or<double>(r, "register", "gamma", 1.0);
    c.reg.recipe.sigma = field_or<double>(r, "register", "sigma", 0.0);
    c.reg.recipe.seed = field_or<std::uint64_t>(r, "register", "seed", 0);
    try {
      make_layout(c.reg.recipe);
    } catch (const Error& e) {
      throw ConfigError("register", e.what());
    }
  }

  const auto& s = detail::section(doc, "sweep");
  for (double v : field<std::vector<double>>(s, "sweep", "k0")) {
    if (!(v >= 0.0)) throw ConfigError("sweep.k0", "entries must be >= 0");
    c.sweep.k0.push_back(kTwoPi * v);
  }
  for (double v : field<std::vector<double>>(s, "sweep", "omega0"))
    c.sweep.omega0.push_back(kTwoPi * detail::positive(v, "sweep.omega0"));
  if (c.sweep.k0.empty()) throw ConfigError("sweep.k0", "must not be empty");
  if (c.sweep.omega0.empty()) throw ConfigError("sweep.omega0", "must not be empty");
  std::tie(c.sweep.ns_min, c.sweep.ns_max) = detail::range(s, "sweep", "ns");
  std::tie(c.sweep.nt_min, c.sweep.nt_max) = detail::range(s, "sweep", "nt");
  auto& ro = c.sweep.reconstruction;
  ro.m_c = field<int>(s, "sweep", "mc");
  if (ro.m_c < 1 || ro.m_c % 2 == 0) throw ConfigError("sweep.mc", "must be odd and >= 1");
  ro.l_c = field<int>(s, "sweep", "lc");
  if (ro.l_c < 0) throw ConfigError("sweep.lc", "must be >= 0");
  try {
    ro.strategy = strategy_from_string(field_or<std::string>(s, "sweep", "strategy", "centered"));
  } catch (const PreconditionError& e) {
    throw ConfigError("sweep.strategy", e.what());
  }
  if (ro.strategy == IndexStrategy::centered && ro.l_c % 2 != 0)
    throw ConfigError("sweep.lc", "centered index sets need an even l_c");
  ro.cond_limit = detail::positive(field_or<double>(s, "sweep", "cond_limit", 1e8), "sweep.cond_limit");

  const auto& e = detail::section(doc, "engine");
  try {
    c.engine.method = method_from_string(field_or<std::string>(e, "engine", "method", "quadrature"));
  } catch (const PreconditionError& err) {
    throw ConfigError("engine.method", err.what());
  }
  c.engine.realizations = field_or<int>(e, "engine", "realizations", 10000);
  if (e.contains("seed")) c.engine.seed = field<std::uint64_t>(e, "engine", "seed");
  c.engine.quadrature.rel_tol = detail::positive(field_or<double>(e, "engine", "rel_tol", 1e-9), "engine.rel_tol");
  c.engine.quadrature.m_max = field_or<int>(e, "engine", "m_max", 41);
  if (c.engine.quadrature.m_max < 1 || c.engine.quadrature.m_max % 2 == 0)
    throw ConfigError("engine.m_max", "must be odd and >= 1");
  c.engine.fit.min_points = field_or<int>(e, "engine", "fit_min_points", 4);
  if (c.engine.fit.min_points < 3) throw ConfigError("engine.fit_min_points", "must be >= 3");
  c.engine.fit.tolerance = detail::positive(field_or<double>(e, "engine", "fit_tolerance", 1e-4), "engine.fit_tolerance");
  c.engine.fit.stability = detail::positive(field_or<double>(e, "engine", "fit_stability", 0.05), "engine.fit_stability");
  if (c.engine.method == Method::monte_carlo) {
    if (!c.engine.seed) throw ConfigError("engine.seed", "required when method is monte_carlo");
    if (c.engine.realizations < 100) throw ConfigError("engine.realizations", "must be >= 100");
  }

  const int need = c.engine.fit.min_points + 2;
  if (c.sweep.nt_max - c.sweep.nt_min + 1 < std::max(5, need))
    throw ConfigError("sweep.nt", "needs at least " + std::to_string(std::max(5, need)) + " values");
  if (c.sweep.ns_max - c.sweep.ns_min + 1 < std::max(5, need))
    throw ConfigError("sweep.ns", "needs at least " + std::to_string(std::max(5, need)) + " values");

  c.output = field_or<std::string>(doc, "<root>", "output", "out");
  return c;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open file");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path, std::string("invalid JSON: ") + e.what());
  }
}

inline RunConfig load_config(const std::string& path, std::optional<std::uint64_t> seed = {}) {
  json doc = read_json_file(path);
  if (seed) {
    if (!doc.contains("engine") || !doc["engine"].is_object()) throw ConfigError("engine", "missing section");
    doc["engine"]["seed"] = *seed;
  }
  return parse_config(doc);
}

}  // namespace stspec
