// Binary field dumps (MAGE1 format), solver checkpoints with JSON sidecars,
// and RFC-4180 CSV emission.
//
// MAGE1 layout: magic "MAGE1" (5 bytes), u8 n_complex, u8 mode (0 full,
// 1 reduced), u32 little-endian resolution per represented axis, then
// float64 little-endian values in row-major node order.  Hermitian fields
// store, per node, the real diagonal followed by the packed lower-triangle
// real/imag pairs.  See docs/format.md.
#pragma once

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mage/solver.hpp"

namespace mage {

namespace detail {

inline void write_exact(std::ofstream& out, const void* data, std::size_t bytes) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
}

inline void read_exact(std::ifstream& in, void* data, std::size_t bytes,
                       const std::string& path) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
  if (static_cast<std::size_t>(in.gcount()) != bytes)
    throw CorruptCheckpoint("truncated field file: " + path);
}

inline void write_mage_header(std::ofstream& out, const PeriodicGrid& g) {
  write_exact(out, "MAGE1", 5);
  const std::uint8_t n = static_cast<std::uint8_t>(g.n_complex());
  const std::uint8_t mode = static_cast<std::uint8_t>(g.mode());
  write_exact(out, &n, 1);
  write_exact(out, &mode, 1);
  for (int r : g.resolution()) {
    const std::uint32_t v = static_cast<std::uint32_t>(r);
    write_exact(out, &v, 4);
  }
}

inline void check_mage_header(std::ifstream& in, const PeriodicGrid& g,
                              const std::string& path) {
  char magic[5];
  read_exact(in, magic, 5, path);
  if (std::memcmp(magic, "MAGE1", 5) != 0)
    throw UnsupportedFormat("bad magic in " + path);
  std::uint8_t n = 0, mode = 0;
  read_exact(in, &n, 1, path);
  read_exact(in, &mode, 1, path);
  if (n != g.n_complex() || mode != static_cast<std::uint8_t>(g.mode()))
    throw UnsupportedFormat("field header does not match the expected grid: " + path);
  for (int r : g.resolution()) {
    std::uint32_t v = 0;
    read_exact(in, &v, 4, path);
    if (v != static_cast<std::uint32_t>(r))
      throw UnsupportedFormat("field resolution does not match the expected grid: " + path);
  }
}

}  // namespace detail

inline void write_scalar(const std::string& path, const ScalarField& f) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path + " for writing");
  detail::write_mage_header(out, f.grid());
  detail::write_exact(out, f.values().data(), f.values().size() * sizeof(double));
}

inline ScalarField read_scalar(const std::string& path, const PeriodicGrid& grid) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptCheckpoint("cannot open " + path);
  detail::check_mage_header(in, grid, path);
  ScalarField f(grid);
  detail::read_exact(in, f.values().data(), f.values().size() * sizeof(double), path);
  char extra;
  if (in.read(&extra, 1); in.gcount() != 0)
    throw CorruptCheckpoint("trailing bytes in " + path);
  return f;
}

inline void write_hermitian(const std::string& path, const HermitianField& f) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path + " for writing");
  detail::write_mage_header(out, f.grid());
  detail::write_exact(out, f.data().data(), f.data().size() * sizeof(double));
}

inline HermitianField read_hermitian(const std::string& path, const PeriodicGrid& grid) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptCheckpoint("cannot open " + path);
  detail::check_mage_header(in, grid, path);
  HermitianField f(grid);
  detail::read_exact(in, f.data().data(), f.data().size() * sizeof(double), path);
  char extra;
  if (in.read(&extra, 1); in.gcount() != 0)
    throw CorruptCheckpoint("trailing bytes in " + path);
  return f;
}

// Checkpoint = MAGE1 dump of phi plus a JSON sidecar with the solve metadata.
inline void save_checkpoint(const std::string& base_path, const Solution& sol, double t) {
  write_scalar(base_path + ".mage", sol.phi);
  nlohmann::json meta;
  meta["t"] = t;
  meta["c_t"] = sol.c_t;
  meta["residual_sup"] = sol.residual_sup;
  meta["newton_iters"] = sol.newton_iters;
  meta["converged"] = sol.converged;
  meta["residual_tol"] = sol.residual_tol;
  meta["linear_tol"] = sol.linear_tol;
  std::ofstream out(base_path + ".json", std::ios::trunc);
  if (!out) throw Error("cannot open " + base_path + ".json for writing");
  out << meta.dump(2) << "\n";
}

struct CheckpointData {
  ScalarField phi;
  double t = 0.0;
  double c_t = 0.0;
  double residual_sup = 0.0;
  int newton_iters = 0;
  bool converged = false;
};

inline CheckpointData load_checkpoint(const std::string& base_path, const PeriodicGrid& grid) {
  CheckpointData data{read_scalar(base_path + ".mage", grid)};
  std::ifstream in(base_path + ".json");
  if (!in) throw CorruptCheckpoint("missing sidecar " + base_path + ".json");
  nlohmann::json meta = nlohmann::json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (meta.is_discarded()) throw CorruptCheckpoint("unparsable sidecar " + base_path + ".json");
  data.t = meta.value("t", 0.0);
  data.c_t = meta.value("c_t", 0.0);
  data.residual_sup = meta.value("residual_sup", 0.0);
  data.newton_iters = meta.value("newton_iters", 0);
  data.converged = meta.value("converged", false);
  return data;
}

// Minimal RFC-4180 table: string cells, quoted only when needed; numeric
// cells pre-formatted with %.17g so reruns are byte identical.
struct ResultTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  static std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
  }

  void add_row(std::vector<std::string> cells) { rows.push_back(std::move(cells)); }
  bool empty() const { return rows.empty(); }
};

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

inline void write_csv(const std::string& path, const ResultTable& table) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  for (std::size_t c = 0; c < table.columns.size(); ++c)
    out << (c ? "," : "") << csv_escape(table.columns[c]);
  out << "\r\n";
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << csv_escape(row[c]);
    out << "\r\n";
  }
}

inline ResultTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  ResultTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char c = line[i];
      if (quoted) {
        if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else if (c == '"') {
          quoted = false;
        } else {
          cur += c;
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        cells.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    cells.push_back(cur);
    if (first) {
      table.columns = cells;
      first = false;
    } else {
      table.rows.push_back(cells);
    }
  }
  return table;
}

}  // namespace mage
