// Discrete pluripotential primitives: Perron envelopes, extremal functions,
// Monge-Ampere mass on node sets, capacity lower bounds, the sublevel
// comparison inequality, capacity decay tables, and the De Giorgi iteration.
//
// The envelope enforces chi0 + i del dbar P >= 0 through directional
// second-difference constraints.  A real lattice offset u with companion
// J u (the offset of i times the corresponding complex direction v) yields
//   4 v* chi0 v + D^2_u P + D^2_{Ju} P >= 0,
// i.e. P <= (P(x+u)+P(x-u)+P(x+Ju)+P(x-Ju))/4 + v* chi0 v.  In Reduced mode
// the Ju differences vanish on the represented grid and the constraint
// becomes P <= (P(x+u)+P(x-u))/2 + 2 v* chi0 v.  Capacity is approximated
// from below only, by a finite dictionary of admissible potentials.
#pragma once

#include <memory>
#include <optional>

#include "mage/calculus.hpp"

namespace mage {

struct EnvelopeOptions {
  double tol = 1e-10;       // stop when the max per-sweep change drops below
  long max_sweeps = 100000;
  int levels = 3;           // coarse-to-fine initialization levels
  double contact_tol = 1e-6;
};

struct EnvelopeResult {
  ScalarField P;
  std::vector<std::uint8_t> contact;  // P = h within contact_tol
  long sweeps = 0;
};

using NodeMask = std::vector<std::uint8_t>;

namespace detail {

struct EnvelopeDirection {
  int u[4] = {0, 0, 0, 0};   // lattice offset
  int ju[4] = {0, 0, 0, 0};  // offset of i * v (Full mode only)
  double shift = 0.0;        // v* chi0 v, resp. 2 v* chi0 v in Reduced mode
  bool has_ju = false;
};

inline std::vector<EnvelopeDirection> envelope_directions(const PeriodicGrid& g,
                                                          const Herm& chi0) {
  std::vector<EnvelopeDirection> dirs;
  const int n = g.n_complex();
  const bool full = g.mode() == GridMode::Full;
  auto spacing = g.spacing();

  if (!full) {
    // complex directions with real components only
    std::vector<std::vector<int>> offs;
    if (n == 1) offs = {{1}};
    else offs = {{1, 0}, {0, 1}, {1, 1}, {1, -1}};
    for (const auto& d : offs) {
      EnvelopeDirection e;
      complex_t v0 = d[0] * spacing[0];
      complex_t v1 = n == 2 ? complex_t(d[1] * spacing[1], 0.0) : complex_t(0.0);
      for (int a = 0; a < n; ++a) e.u[a] = d[a];
      e.shift = 2.0 * quad_form(chi0, v0, v1);
      dirs.push_back(e);
    }
    return dirs;
  }

  // Full mode: complex directions c; u realizes c, ju realizes i*c.
  struct CDir {
    complex_t c0, c1;
  };
  std::vector<CDir> cdirs;
  if (n == 1) {
    cdirs = {{{1, 0}, {0, 0}}, {{1, 1}, {0, 0}}};
  } else {
    cdirs = {{{1, 0}, {0, 0}}, {{0, 0}, {1, 0}},
             {{1, 0}, {1, 0}}, {{1, 0}, {-1, 0}},
             {{1, 0}, {0, 1}}, {{1, 0}, {0, -1}}};
  }
  for (const auto& c : cdirs) {
    EnvelopeDirection e;
    e.has_ju = true;
    const complex_t i_c0 = complex_t(0, 1) * c.c0;
    const complex_t i_c1 = complex_t(0, 1) * c.c1;
    e.u[g.x_axis(0)] = int(std::lround(c.c0.real()));
    e.u[g.y_axis(0)] = int(std::lround(c.c0.imag()));
    e.ju[g.x_axis(0)] = int(std::lround(i_c0.real()));
    e.ju[g.y_axis(0)] = int(std::lround(i_c0.imag()));
    if (n == 2) {
      e.u[g.x_axis(1)] = int(std::lround(c.c1.real()));
      e.u[g.y_axis(1)] = int(std::lround(c.c1.imag()));
      e.ju[g.x_axis(1)] = int(std::lround(i_c1.real()));
      e.ju[g.y_axis(1)] = int(std::lround(i_c1.imag()));
    }
    const complex_t v0 = c.c0 * spacing[g.x_axis(0)];
    const complex_t v1 = n == 2 ? c.c1 * spacing[g.x_axis(1)] : complex_t(0.0);
    e.shift = quad_form(chi0, v0, v1);
    dirs.push_back(e);
  }
  return dirs;
}

// One red-black Gauss-Seidel sweep; returns the max change.
inline double envelope_sweep(const PeriodicGrid& g, const ScalarField& h,
                             const std::vector<EnvelopeDirection>& dirs,
                             ScalarField& P) {
  double change = 0.0;
  int idx[4];
  for (int color = 0; color < 2; ++color) {
    for (index_t i = 0; i < g.node_count(); ++i) {
      g.decompose(i, idx);
      int parity = 0;
      for (int a = 0; a < g.axis_count(); ++a) parity += idx[a];
      if ((parity & 1) != color) continue;
      double cap = h[i];
      for (const auto& d : dirs) {
        const index_t up = g.shift(i, d.u);
        int neg[4];
        for (int a = 0; a < 4; ++a) neg[a] = -d.u[a];
        const index_t um = g.shift(i, neg);
        double c;
        if (d.has_ju) {
          const index_t jp = g.shift(i, d.ju);
          for (int a = 0; a < 4; ++a) neg[a] = -d.ju[a];
          const index_t jm = g.shift(i, neg);
          c = 0.25 * (P[up] + P[um] + P[jp] + P[jm]) + d.shift;
        } else {
          c = 0.5 * (P[up] + P[um]) + d.shift;
        }
        cap = std::min(cap, c);
      }
      change = std::max(change, std::abs(P[i] - cap));
      P[i] = cap;
    }
  }
  return change;
}

inline ScalarField restrict_to(const PeriodicGrid& coarse, const ScalarField& fine,
                               int stride) {
  ScalarField out(coarse);
  int idx[4], fidx[4];
  for (index_t i = 0; i < coarse.node_count(); ++i) {
    coarse.decompose(i, idx);
    for (int a = 0; a < coarse.axis_count(); ++a) fidx[a] = idx[a] * stride + stride / 2;
    out[i] = fine[fine.grid().compose(fidx)];
  }
  return out;
}

inline void prolong_into(const ScalarField& coarse, int stride, ScalarField& fine) {
  int idx[4], cidx[4];
  const PeriodicGrid& fg = fine.grid();
  const PeriodicGrid& cg = coarse.grid();
  for (index_t i = 0; i < fg.node_count(); ++i) {
    fg.decompose(i, idx);
    for (int a = 0; a < fg.axis_count(); ++a)
      cidx[a] = std::min(idx[a] / stride, cg.resolution()[a] - 1);
    fine[i] = coarse[cg.compose(cidx)];
  }
}

// Exact 1-d envelope by primal active set: on every maximal free arc the
// fixed point satisfies P(i+1) - 2 P(i) + P(i-1) = -2s with s = 2 chi0 h^2,
// which has the closed form linear-interp + s j (L+1-j) between the contact
// anchors.  Alternates arc solves with clip (add contact) and release
// (drop contact nodes whose constraint cap dips below the obstacle).
inline EnvelopeResult envelope_1d_active_set(const ScalarField& h, const Herm& chi0,
                                             const EnvelopeOptions& opts) {
  const PeriodicGrid& g = h.grid();
  const index_t n = g.node_count();
  const double hh = g.spacing()[0];
  const double s = 2.0 * chi0.d0 * hh * hh;

  ScalarField P = h;
  std::vector<std::uint8_t> contact(static_cast<std::size_t>(n), 1);
  auto cap_at = [&](index_t i) {
    return 0.5 * (P[g.shift(i, 0, +1)] + P[g.shift(i, 0, -1)]) + s;
  };

  long iters = 0;
  for (; iters < 200; ++iters) {
    // release contact nodes where the obstacle violates the constraint
    bool changed = false;
    for (index_t i = 0; i < n; ++i) {
      if (contact[static_cast<std::size_t>(i)] && cap_at(i) < h[i] - 1e-15) {
        contact[static_cast<std::size_t>(i)] = 0;
        changed = true;
      }
    }
    // solve every maximal free arc exactly between contact anchors
    index_t n_contact = 0;
    for (auto b : contact) n_contact += b;
    if (n_contact == 0)
      throw NoConvergence("1-d envelope lost all contact nodes", 0.0);
    index_t start = -1;
    for (index_t i = 0; i < n; ++i)
      if (contact[static_cast<std::size_t>(i)]) {
        start = i;
        break;
      }
    index_t a = start;
    do {
      // advance to the next contact node, solving the arc between
      index_t b = g.shift(a, 0, +1);
      index_t len = 0;
      while (!contact[static_cast<std::size_t>(b)]) {
        b = g.shift(b, 0, +1);
        ++len;
      }
      if (len > 0) {
        const double pa = h[a], pb = h[b];
        index_t j = 1;
        for (index_t i = g.shift(a, 0, +1); i != b; i = g.shift(i, 0, +1), ++j) {
          const double lin = pa + (pb - pa) * double(j) / double(len + 1);
          const double val = lin + s * double(j) * double(len + 1 - j);
          if (std::abs(P[i] - val) > 1e-15) changed = true;
          P[i] = val;
        }
      }
      P[a] = h[a];
      a = b;
    } while (a != start);
    // clip arc overshoots back onto the obstacle
    for (index_t i = 0; i < n; ++i) {
      if (!contact[static_cast<std::size_t>(i)] && P[i] > h[i] - 1e-15) {
        P[i] = h[i];
        contact[static_cast<std::size_t>(i)] = 1;
        changed = true;
      }
    }
    if (!changed) break;
  }
  if (iters >= 200)
    throw NoConvergence("1-d envelope active set did not settle", 0.0);

  EnvelopeResult out;
  out.P = std::move(P);
  out.sweeps = iters;
  out.contact.assign(static_cast<std::size_t>(n), 0);
  for (index_t i = 0; i < n; ++i)
    if (std::abs(out.P[i] - h[i]) <= opts.contact_tol * (1.0 + std::abs(h[i])))
      out.contact[static_cast<std::size_t>(i)] = 1;
  return out;
}

}  // namespace detail

// Largest chi0-admissible function below the obstacle h (chi0 constant psd).
inline EnvelopeResult psh_envelope(const ScalarField& h, const Herm& chi0,
                                   const EnvelopeOptions& opts = {}) {
  const PeriodicGrid& g = h.grid();
  if (chi0.n != g.n_complex()) throw GridMismatch("chi0 dimension mismatch");
  if (g.n_complex() == 1 && g.mode() == GridMode::Reduced)
    return detail::envelope_1d_active_set(h, chi0, opts);

  // coarse-to-fine initialization
  ScalarField P = h;
  long total_sweeps = 0;
  std::vector<int> strides;
  for (int l = opts.levels - 1; l >= 1; --l) strides.push_back(1 << l);
  strides.push_back(1);
  std::vector<std::unique_ptr<PeriodicGrid>> held_grids;  // coarse fields point here
  ScalarField init;
  bool have_init = false;
  for (int stride : strides) {
    bool usable = true;
    for (int r : g.resolution())
      if (r % stride != 0 || r / stride < 8) usable = false;
    if (!usable && stride != 1) continue;
    const PeriodicGrid* lg = &g;
    if (stride != 1) {
      std::vector<int> res;
      for (int r : g.resolution()) res.push_back(r / stride);
      held_grids.push_back(std::make_unique<PeriodicGrid>(g.n_complex(), g.mode(), res));
      lg = held_grids.back().get();
    }
    ScalarField hl = stride == 1 ? h : detail::restrict_to(*lg, h, stride);
    ScalarField Pl = hl;
    if (have_init) {
      const int rel = lg->resolution()[0] / init.grid().resolution()[0];
      ScalarField lifted(*lg);
      detail::prolong_into(init, rel, lifted);
      for (index_t i = 0; i < lg->node_count(); ++i) Pl[i] = std::min(hl[i], lifted[i]);
    }
    auto dirs = detail::envelope_directions(*lg, chi0);
    long sweeps = 0;
    double prev_change = 0.0;
    double err_est = std::numeric_limits<double>::infinity();
    while (sweeps < opts.max_sweeps) {
      const double change = detail::envelope_sweep(*lg, hl, dirs, Pl);
      ++sweeps;
      // Gauss-Seidel contracts geometrically; bound the distance to the
      // fixed point by the tail sum of the change sequence.
      double rho = prev_change > 0.0 ? change / prev_change : 0.5;
      rho = std::clamp(rho, 0.0, 0.999999);
      err_est = change * (1.0 + rho / (1.0 - rho));
      prev_change = change;
      if (err_est <= opts.tol) break;
    }
    total_sweeps += sweeps;
    if (stride == 1) {
      if (err_est > opts.tol)
        throw NoConvergence("Perron sweep did not reach tolerance", err_est);
      P = Pl;
    } else {
      init = Pl;
      have_init = true;
    }
  }

  EnvelopeResult out;
  out.P = std::move(P);
  out.sweeps = total_sweeps;
  out.contact.assign(static_cast<std::size_t>(g.node_count()), 0);
  for (index_t i = 0; i < g.node_count(); ++i)
    if (std::abs(out.P[i] - h[i]) <= opts.contact_tol * (1.0 + std::abs(h[i])))
      out.contact[static_cast<std::size_t>(i)] = 1;
  return out;
}

// V_t for chi + t theta (theta constant).  Pointwise semipositive constant
// representatives give V_t = 0; a potential part is handled through the
// obstacle reduction V = P_{chi0 + t theta}(h) - h.  Output uses the phi <= 0
// normalization.
inline ScalarField extremal_function(const BackgroundForm& chi, const BackgroundForm& theta,
                                     double t, const PeriodicGrid& grid,
                                     const EnvelopeOptions& opts = {}) {
  if (theta.potential_part)
    throw ConfigError("extremal_function expects a constant theta");
  const Herm chi0 = chi.constant_part + t * theta.constant_part;
  if (!chi.potential_part) {
    if (min_eig(chi.constant_part) >= 0.0 || min_eig(chi0) >= 0.0)
      return ScalarField(grid, 0.0);
    throw ConfigError("chi + t theta is not semipositive and carries no potential");
  }
  const ScalarField& hpot = *chi.potential_part;
  if (!hpot.grid().same_layout(grid))
    throw GridMismatch("chi potential lives on a different grid");
  EnvelopeResult env = psh_envelope(hpot, chi0, opts);
  ScalarField v(grid);
  for (index_t i = 0; i < grid.node_count(); ++i) v[i] = env.P[i] - hpot[i];
  return v;
}

// Relative extremal function of a node set: obstacle 0 on the mask and a
// finite bound elsewhere.
inline EnvelopeResult extremal_function_masked(const Herm& chi0, const NodeMask& mask,
                                               const PeriodicGrid& grid, double bound = 10.0,
                                               const EnvelopeOptions& opts = {}) {
  ScalarField h(grid, bound);
  for (index_t i = 0; i < grid.node_count(); ++i)
    if (mask[static_cast<std::size_t>(i)]) h[i] = 0.0;
  return psh_envelope(h, chi0, opts);
}

// Monge-Ampere mass of u on the masked nodes; negative determinants clamp to 0.
inline double ma_mass_on_set(const ScalarField& u, const HermitianField& chi_t,
                             const NodeMask& mask) {
  const PeriodicGrid& g = u.grid();
  double acc = 0.0;
  for (index_t i = 0; i < g.node_count(); ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    const double d = det(chi_t.at(i) + complex_hessian_at(u, i));
    if (d > 0.0) acc += d;
  }
  return acc * g.cell_volume();
}

inline NodeMask sublevel_mask(const ScalarField& u, const ScalarField& v_t, double s) {
  NodeMask mask(static_cast<std::size_t>(u.size()), 0);
  for (index_t i = 0; i < u.size(); ++i)
    if (u[i] - v_t[i] < -s) mask[static_cast<std::size_t>(i)] = 1;
  return mask;
}

inline NodeMask full_mask(const PeriodicGrid& g) {
  return NodeMask(static_cast<std::size_t>(g.node_count()), 1);
}

struct CapacityEstimate {
  double value = 0.0;
  ScalarField witness;
  int dictionary_size = 0;
};

// Lattice Chebyshev distance to the mask (in nodes), by multi-source BFS.
inline std::vector<int> mask_distance(const PeriodicGrid& g, const NodeMask& mask) {
  std::vector<int> dist(static_cast<std::size_t>(g.node_count()), -1);
  std::vector<index_t> frontier;
  for (index_t i = 0; i < g.node_count(); ++i)
    if (mask[static_cast<std::size_t>(i)]) {
      dist[static_cast<std::size_t>(i)] = 0;
      frontier.push_back(i);
    }
  int d = 0;
  while (!frontier.empty()) {
    ++d;
    std::vector<index_t> next;
    for (index_t i : frontier) {
      for (int a = 0; a < g.axis_count(); ++a) {
        for (int sgn : {+1, -1}) {
          const index_t j = g.shift(i, a, sgn);
          if (dist[static_cast<std::size_t>(j)] < 0) {
            dist[static_cast<std::size_t>(j)] = d;
            next.push_back(j);
          }
        }
      }
    }
    frontier = std::move(next);
  }
  return dist;
}

// Default dictionary: V_t, V_t + 1, envelope-projected indicator bumps of the
// mask at three scales, and band-clipped rescalings of any provided chi_t-psh
// potentials (solved phi_t are the natural candidates).
inline std::vector<ScalarField> capacity_dictionary(const NodeMask& mask, const Herm& chi0,
                                                    const ScalarField& v_t,
                                                    const std::vector<const ScalarField*>& potentials,
                                                    const EnvelopeOptions& opts = {}) {
  const PeriodicGrid& g = v_t.grid();
  std::vector<ScalarField> dict;
  dict.push_back(v_t);
  {
    ScalarField u = v_t;
    u += 1.0;
    dict.push_back(std::move(u));
  }
  bool empty = true, all = true;
  for (auto b : mask) {
    if (b) empty = false;
    else all = false;
  }
  if (!empty && !all) {
    const std::vector<int> dist = mask_distance(g, mask);
    const int nmax = *std::max_element(g.resolution().begin(), g.resolution().end());
    for (int scale : {std::max(2, nmax / 32), std::max(3, nmax / 8), std::max(4, nmax / 2)}) {
      ScalarField raw = v_t;
      for (index_t i = 0; i < g.node_count(); ++i) {
        const double b = std::max(0.0, 1.0 - double(dist[static_cast<std::size_t>(i)]) / scale);
        raw[i] += b;
      }
      EnvelopeResult proj = psh_envelope(raw, chi0, opts);
      ScalarField u = proj.P;
      for (index_t i = 0; i < g.node_count(); ++i) u[i] = std::max(u[i], v_t[i]);
      dict.push_back(std::move(u));
    }
  }
  for (const ScalarField* phi : potentials) {
    if (!phi) continue;
    const double top = phi->sup();
    for (double s : {0.25, 0.5, 1.0}) {
      ScalarField u(g);
      for (index_t i = 0; i < g.node_count(); ++i)
        u[i] = std::max(v_t[i], v_t[i] + 1.0 + s * ((*phi)[i] - top));
      dict.push_back(std::move(u));
    }
  }
  return dict;
}

inline CapacityEstimate capacity_lower_bound(const NodeMask& mask, const HermitianField& chi_t,
                                             const ScalarField& v_t,
                                             const std::vector<ScalarField>& dictionary) {
  if (dictionary.empty()) throw EmptyDictionary();
  CapacityEstimate best;
  best.dictionary_size = static_cast<int>(dictionary.size());
  best.value = -1.0;
  for (const ScalarField& u : dictionary) {
    const double m = ma_mass_on_set(u, chi_t, mask);
    if (m > best.value) {
      best.value = m;
      best.witness = u;
    }
  }
  if (best.value < 0.0) best.value = 0.0;
  return best;
}

struct ComparisonCheck {
  bool holds = false;
  double margin = 0.0;  // rhs - lhs; the check is necessary-condition only
  double lhs = 0.0;     // r^n * capacity lower bound of the deeper sublevel
  double rhs = 0.0;     // MA mass of u on the shallower sublevel
};

inline ComparisonCheck comparison_check(const ScalarField& u, const HermitianField& chi_t,
                                        const Herm& chi0, const ScalarField& v_t, double s,
                                        double r, const EnvelopeOptions& opts = {}) {
  if (!(r > 0.0 && r <= 1.0) || !(s > 0.0))
    throw ConfigError("comparison_check needs 0 < r <= 1 and s > 0");
  const NodeMask deep = sublevel_mask(u, v_t, s + r);
  const NodeMask shallow = sublevel_mask(u, v_t, s);
  std::vector<const ScalarField*> pots = {&u};
  auto dict = capacity_dictionary(deep, chi0, v_t, pots, opts);
  const CapacityEstimate cap = capacity_lower_bound(deep, chi_t, v_t, dict);
  ComparisonCheck out;
  out.lhs = std::pow(r, u.grid().n_complex()) * cap.value;
  out.rhs = ma_mass_on_set(u, chi_t, shallow);
  out.margin = out.rhs - out.lhs;
  out.holds = out.margin >= -1e-12;
  return out;
}

struct DecayRow {
  double s = 0.0;
  double mass = 0.0;       // normalized sublevel MA mass
  double cap_lower = 0.0;  // normalized capacity lower bound
  double fit_residual = 0.0;
};

struct DecayTable {
  std::vector<DecayRow> rows;
  double fit_C = 0.0;
  double fit_exponent = 0.0;  // empirical decay exponent against (s-1)
  double q = 0.0;
};

inline DecayTable capacity_decay_table(const ScalarField& phi_t, const ScalarField& v_t,
                                       const HermitianField& chi_t, const Herm& chi0,
                                       const std::vector<double>& s_grid, double q,
                                       const EnvelopeOptions& opts = {}) {
  const PeriodicGrid& g = phi_t.grid();
  double total = 0.0;
  for (index_t i = 0; i < g.node_count(); ++i) total += det(chi_t.at(i));
  total *= g.cell_volume();

  DecayTable table;
  table.q = q;
  std::vector<const ScalarField*> pots = {&phi_t};
  for (double s : s_grid) {
    DecayRow row;
    row.s = s;
    const NodeMask mask = sublevel_mask(phi_t, v_t, s);
    bool empty = true;
    for (auto b : mask)
      if (b) empty = false;
    if (!empty) {
      row.mass = ma_mass_on_set(phi_t, chi_t, mask) / total;
      auto dict = capacity_dictionary(mask, chi0, v_t, pots, opts);
      row.cap_lower = capacity_lower_bound(mask, chi_t, v_t, dict).value / total;
    }
    table.rows.push_back(row);
  }
  // monotone nonincreasing by construction of sublevel sets; enforce against
  // dictionary noise
  for (std::size_t k = 1; k < table.rows.size(); ++k) {
    table.rows[k].mass = std::min(table.rows[k].mass, table.rows[k - 1].mass);
    table.rows[k].cap_lower = std::min(table.rows[k].cap_lower, table.rows[k - 1].cap_lower);
  }
  // least-squares fit log cap = log C - e log(s - 1) over usable rows
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (const auto& row : table.rows) {
    if (row.s > 1.0 && row.cap_lower > 0.0) {
      const double x = std::log(row.s - 1.0);
      const double y = std::log(row.cap_lower);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      ++m;
    }
  }
  if (m >= 2 && sxx * m - sx * sx > 1e-30) {
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    const double icept = (sy - slope * sx) / m;
    table.fit_exponent = -slope;
    table.fit_C = std::exp(icept);
  } else if (m >= 1) {
    table.fit_exponent = 1.0 / q;
    double c = 0.0;
    for (const auto& row : table.rows)
      if (row.s > 1.0 && row.cap_lower > 0.0)
        c = std::max(c, row.cap_lower * std::pow(row.s - 1.0, 1.0 / q));
    table.fit_C = c;
  }
  for (auto& row : table.rows) {
    if (row.s > 1.0 && table.fit_C > 0.0)
      row.fit_residual = row.cap_lower - table.fit_C * std::pow(row.s - 1.0, -table.fit_exponent);
  }
  return table;
}

struct DeGiorgiBound {
  double s0 = 0.0;
  double S = 0.0;
  bool vanishing_checked = false;
};

// Lemma-style scalar iteration bound: s0 is the smallest sampled s with
// F(s)^alpha <= 1/(2A); the hypothesis r F(s+r) <= A F(s)^{1+alpha} is
// verified on the sample grid; S = s0 + 2, beyond which F must vanish.
inline DeGiorgiBound degiorgi_bound(const std::vector<std::pair<double, double>>& samples,
                                    double A, double alpha,
                                    std::optional<double> s0_hint = std::nullopt) {
  if (!(A > 0.0) || !(alpha > 0.0)) throw ConfigError("degiorgi_bound needs A, alpha > 0");
  if (samples.empty()) throw ConfigError("degiorgi_bound needs samples");
  for (std::size_t k = 0; k + 1 < samples.size(); ++k) {
    if (!(samples[k + 1].first > samples[k].first))
      throw ConfigError("degiorgi samples must have increasing s");
    if (samples[k + 1].second > samples[k].second + 1e-12)
      throw ConfigError("degiorgi samples must be nonincreasing");
  }

  // hypothesis check on all sampled pairs with 0 < r <= 1
  std::vector<std::pair<double, double>> violations;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t j = i + 1; j < samples.size(); ++j) {
      const double r = samples[j].first - samples[i].first;
      if (r > 1.0) break;
      const double lhs = r * samples[j].second;
      const double rhs = A * std::pow(samples[i].second, 1.0 + alpha);
      if (lhs > rhs + 1e-12) violations.emplace_back(samples[i].first, r);
    }
  }
  if (!violations.empty()) throw HypothesisViolated(std::move(violations));

  const double threshold = 1.0 / (2.0 * A);
  DeGiorgiBound out;
  bool found = false;
  for (const auto& [s, F] : samples) {
    if (s0_hint && s < *s0_hint - 1e-12) continue;
    if (std::pow(F, alpha) <= threshold) {
      out.s0 = s;
      found = true;
      break;
    }
  }
  if (!found)
    throw ConfigError("no sampled s reaches the De Giorgi threshold F(s)^alpha <= 1/(2A)");
  out.S = out.s0 + 2.0;

  for (const auto& [s, F] : samples) {
    if (s >= out.S - 1e-12) {
      out.vanishing_checked = true;
      if (F > 1e-14) throw NotVanishing(s, F);
    }
  }
  return out;
}

}  // namespace mage
