#pragma once

// Stage files: CSV tables with a version/hash header line plus JSON sidecars.
// Every file is written to a temporary name and renamed into place.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stspec/errors.hpp"
#include "stspec/grid.hpp"
#include "stspec/reconstruct.hpp"
#include "stspec/register.hpp"

#ifndef STSPEC_VERSION
#define STSPEC_VERSION "0.0.0"
#endif

namespace stspec {

namespace fs = std::filesystem;

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Hash of the canonical (key-sorted, compact) JSON form.
inline std::string config_hash(const nlohmann::json& doc) { return hex64(fnv1a(doc.dump())); }

inline std::string header_line(const std::string& hash) {
  return std::string("# stspec ") + STSPEC_VERSION + " config_hash=" + hash + "\n";
}

inline void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw InputError("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Round-trip formatting for values; "nan" for missing entries.
inline std::string num(double v) { return std::isfinite(v) ? format_double(v) : "nan"; }

/// Short stable label for file names.
inline std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", std::abs(v) < 5e-13 ? 0.0 : v);
  return buf;
}

struct CsvTable {
  std::string header;  // the "# stspec ..." line, without newline
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    throw InputError("missing column '" + name + "'");
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream s(line);
  while (std::getline(s, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline CsvTable read_csv(const fs::path& path) {
  std::istringstream in(read_file(path));
  CsvTable t;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (t.header.empty()) t.header = line;
      continue;
    }
    if (t.columns.empty()) {
      t.columns = split_csv_line(line);
      continue;
    }
    auto row = split_csv_line(line);
    if (row.size() != t.columns.size())
      throw InputError(path.string() + ": row has " + std::to_string(row.size()) +
                       " cells, expected " + std::to_string(t.columns.size()));
    t.rows.push_back(std::move(row));
  }
  if (t.columns.empty()) throw InputError(path.string() + ": no column header");
  return t;
}

inline double cell_double(const std::string& s, const fs::path& where) {
  if (s == "nan") return std::nan("");
  try {
    return parse_double(s);
  } catch (const std::exception&) {
    throw InputError(where.string() + ": bad number '" + s + "'");
  }
}

// Attenuation grids: columns ns,nt,chi,stderr,method.

inline std::string grid_csv(const AttenuationGrid& g, const std::string& hash) {
  std::string s = header_line(hash) + "ns,nt,chi,stderr,method\n";
  for (int ns = g.ns_min; ns <= g.ns_max; ++ns)
    for (int nt = g.nt_min; nt <= g.nt_max; ++nt)
      s += std::to_string(ns) + "," + std::to_string(nt) + "," + num(g.at(ns, nt)) + "," +
           num(g.error(ns, nt)) + "," + to_string(g.method) + "\n";
  return s;
}

/// Fills values of a grid whose settings and ranges are already set.
inline void read_grid_values(const fs::path& path, AttenuationGrid& g) {
  const auto t = read_csv(path);
  const auto cns = t.column("ns"), cnt = t.column("nt"), cchi = t.column("chi"),
             cerr = t.column("stderr"), cm = t.column("method");
  g.resize();
  std::vector<bool> seen(g.values.size(), false);
  for (const auto& r : t.rows) {
    int ns = 0, nt = 0;
    try {
      ns = std::stoi(r[cns]);
      nt = std::stoi(r[cnt]);
    } catch (const std::exception&) {
      throw InputError(path.string() + ": bad index row");
    }
    if (ns < g.ns_min || ns > g.ns_max || nt < g.nt_min || nt > g.nt_max) continue;
    const std::size_t i = std::size_t(ns - g.ns_min) * g.cols() + (nt - g.nt_min);
    g.values[i] = cell_double(r[cchi], path);
    g.errors[i] = cell_double(r[cerr], path);
    try {
      g.method = method_from_string(r[cm]);
    } catch (const PreconditionError& e) {
      throw InputError(path.string() + ": " + e.what());
    }
    seen[i] = true;
  }
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (!seen[i])
      throw InputError(path.string() + ": missing entry n_s=" +
                       std::to_string(g.ns_min + int(i) / g.cols()) +
                       " n_t=" + std::to_string(g.nt_min + int(i) % g.cols()));
}

// Slope matrices: one row per (m, l).

inline std::string slope_csv(const SlopeMatrix& a, const std::string& hash) {
  std::string s = header_line(hash) + "m,l,k_p_over_kd,omega_p_tc_over_2pi,slope,residual,dof\n";
  for (int m = 1; m <= a.m_c; m += 2)
    for (int l = 0; l <= a.l_c; ++l) {
      const auto i = a.index(m, l);
      s += std::to_string(m) + "," + std::to_string(l) + "," +
           num(a.wavenumber_slope(m, l, 2 * std::numbers::pi) / (2 * std::numbers::pi)) + "," +
           num(a.filter_frequency(m) / (2 * std::numbers::pi)) + "," + num(a.values[i]) + "," +
           num(a.residual[i]) + "," + std::to_string(a.dof[i]) + "\n";
    }
  return s;
}

inline SlopeMatrix read_slope_matrix(const fs::path& path, double k0, double omega0, int m_c, int l_c) {
  const auto t = read_csv(path);
  SlopeMatrix a(k0, omega0, m_c, l_c);
  std::fill(a.values.begin(), a.values.end(), std::nan(""));
  const auto cm = t.column("m"), cl = t.column("l"), cs = t.column("slope"),
             cr = t.column("residual"), cd = t.column("dof");
  for (const auto& r : t.rows) {
    int m = 0, l = 0;
    try {
      m = std::stoi(r[cm]);
      l = std::stoi(r[cl]);
    } catch (const std::exception&) {
      throw InputError(path.string() + ": bad index row");
    }
    if (m < 1 || m > m_c || m % 2 == 0 || l < 0 || l > l_c) continue;
    const auto i = a.index(m, l);
    a.values[i] = cell_double(r[cs], path);
    a.residual[i] = cell_double(r[cr], path);
    a.dof[i] = std::size_t(std::stoul(r[cd]));
  }
  return a;
}

}  // namespace stspec
