// Anisotropic lattice geodesics: diameter and metric-ball volumes via
// Dijkstra on a stencil graph over the real torus.
//
// The Riemannian quadratic form of a Hermitian metric H on a real tangent
// vector (xi, eta) is w* H w with w = xi + i eta; edge weights integrate
// sqrt(v^T g_real v) along the straight segment with endpoint (trapezoid)
// 2-point quadrature.  Reduced-mode fields are extended fiber-invariantly to
// all 2n real axes; 4-axis extensions may resample the metric to a coarser
// resolution to keep Dijkstra feasible.
#pragma once

#include <array>
#include <functional>
#include <queue>

#include "mage/field.hpp"

namespace mage {

struct GeodesicOptions {
  int stencil_radius = 2;           // offsets with Chebyshev norm <= radius, coprime
  int source_count = 8;             // farthest-point-sampled Dijkstra sources
  index_t all_pairs_threshold = 4096;  // exact all-pairs below this node count
  int extension_resolution = 0;     // 0: resolution of the metric's x-axes
                                    // (capped at 14 per axis for 4-axis graphs)
};

namespace detail {

inline int gcd_int(int a, int b) {
  a = std::abs(a);
  b = std::abs(b);
  while (b) {
    const int t = a % b;
    a = b;
    b = t;
  }
  return a;
}

inline std::vector<std::array<int, 4>> stencil_offsets(int dims, int radius) {
  std::vector<std::array<int, 4>> out;
  std::array<int, 4> v{0, 0, 0, 0};
  std::function<void(int)> rec = [&](int a) {
    if (a == dims) {
      int g = 0;
      bool nonzero = false;
      for (int i = 0; i < dims; ++i) {
        if (v[i] != 0) nonzero = true;
        g = gcd_int(g, v[i]);
      }
      if (!nonzero || g != 1) return;
      // keep one representative per +-pair (first nonzero component positive)
      for (int i = 0; i < dims; ++i) {
        if (v[i] > 0) break;
        if (v[i] < 0) return;
      }
      out.push_back(v);
      return;
    }
    for (int w = -radius; w <= radius; ++w) {
      v[a] = w;
      rec(a + 1);
    }
    v[a] = 0;
  };
  rec(0);
  return out;
}

}  // namespace detail

// Dijkstra engine over the fiber-invariant extension of a metric field.
class GeodesicEstimator {
 public:
  GeodesicEstimator(const HermitianField& metric, const GeodesicOptions& opts = {})
      : opts_(opts) {
    const PeriodicGrid& mg = metric.grid();
    const int n = mg.n_complex();
    const int dims = 2 * n;

    int ext_res = opts.extension_resolution;
    if (ext_res == 0) {
      ext_res = mg.resolution()[0];
      if (dims == 4) ext_res = std::min(ext_res, 14);
    }
    std::vector<int> res(dims, ext_res);
    if (mg.mode() == GridMode::Full && opts.extension_resolution == 0) {
      // Full metric at its own resolution unless asked to resample
      res.assign(mg.resolution().begin(), mg.resolution().end());
    }
    ext_ = PeriodicGrid(n, GridMode::Full, res);

    // index maps from extension axes onto metric axes (nearest node)
    const index_t ne = ext_.node_count();
    metric_node_.resize(static_cast<std::size_t>(ne));
    sqrt_q_cache_.resize(static_cast<std::size_t>(ne));
    int eidx[4], midx[4];
    for (index_t i = 0; i < ne; ++i) {
      ext_.decompose(i, eidx);
      for (int j = 0; j < n; ++j) {
        const int ax_ext = ext_.x_axis(j);
        const int mx = mg.x_axis(j);
        midx[mx] = nearest_index(eidx[ax_ext], ext_.resolution()[ax_ext], mg.resolution()[mx]);
        if (mg.mode() == GridMode::Full) {
          const int ay_ext = ext_.y_axis(j);
          const int my = mg.y_axis(j);
          midx[my] = nearest_index(eidx[ay_ext], ext_.resolution()[ay_ext], mg.resolution()[my]);
        }
      }
      metric_node_[static_cast<std::size_t>(i)] = mg.compose(midx);
    }

    offsets_ = detail::stencil_offsets(dims, opts.stencil_radius);
    // physical displacement of each offset
    disp_.resize(offsets_.size());
    for (std::size_t k = 0; k < offsets_.size(); ++k)
      for (int a = 0; a < dims; ++a)
        disp_[k][a] = offsets_[k][a] * ext_.spacing()[a];

    herms_.resize(static_cast<std::size_t>(ne));
    dets_.resize(static_cast<std::size_t>(ne));
    for (index_t i = 0; i < ne; ++i) {
      const Herm h = metric.at(metric_node_[static_cast<std::size_t>(i)]);
      herms_[static_cast<std::size_t>(i)] = h;
      dets_[static_cast<std::size_t>(i)] = det(h);
    }

    // edge-weight halves, cached when the table fits
    if (ne * static_cast<index_t>(offsets_.size()) <= (index_t(32) << 20)) {
      sqrt_q_cache_.resize(static_cast<std::size_t>(ne) * offsets_.size());
      for (index_t i = 0; i < ne; ++i)
        for (std::size_t k = 0; k < offsets_.size(); ++k)
          sqrt_q_cache_[static_cast<std::size_t>(i) * offsets_.size() + k] =
              std::sqrt(quad(i, k));
    }

    // decomposed coordinates for fast neighbor lookup
    coords_.resize(static_cast<std::size_t>(ne));
    for (index_t i = 0; i < ne; ++i) {
      int idx[4];
      ext_.decompose(i, idx);
      for (int a = 0; a < dims; ++a) coords_[static_cast<std::size_t>(i)][a] = idx[a];
    }
  }

  const PeriodicGrid& extension_grid() const { return ext_; }

  // single-source geodesic distances on the extension graph
  std::vector<double> distances(index_t source) const {
    const index_t ne = ext_.node_count();
    std::vector<double> dist(static_cast<std::size_t>(ne),
                             std::numeric_limits<double>::infinity());
    using Item = std::pair<double, index_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
    dist[static_cast<std::size_t>(source)] = 0.0;
    heap.emplace(0.0, source);
    const bool cached = !sqrt_q_cache_.empty();
    while (!heap.empty()) {
      const auto [d, i] = heap.top();
      heap.pop();
      if (d > dist[static_cast<std::size_t>(i)]) continue;
      for (std::size_t k = 0; k < offsets_.size(); ++k) {
        const double qi = cached ? sqrt_q_cache_[static_cast<std::size_t>(i) * offsets_.size() + k]
                                 : std::sqrt(quad(i, k));
        for (int sgn : {+1, -1}) {
          const index_t j = neighbor(i, k, sgn);
          const double qj = cached ? sqrt_q_cache_[static_cast<std::size_t>(j) * offsets_.size() + k]
                                   : std::sqrt(quad(j, k));
          const double nd = d + 0.5 * (qi + qj);
          if (nd < dist[static_cast<std::size_t>(j)]) {
            dist[static_cast<std::size_t>(j)] = nd;
            heap.emplace(nd, j);
          }
        }
      }
    }
    return dist;
  }

  double diameter() const {
    const index_t ne = ext_.node_count();
    // exact all-pairs only when the total relaxation work stays small; the
    // 4-axis stencils are an order of magnitude denser than the planar ones
    const bool all_pairs =
        ne <= opts_.all_pairs_threshold &&
        ne * static_cast<index_t>(offsets_.size()) <= (index_t(1) << 18);
    if (all_pairs) {
      double best = 0.0;
      for (index_t s = 0; s < ne; ++s) {
        const auto d = distances(s);
        for (double v : d)
          if (std::isfinite(v)) best = std::max(best, v);
      }
      return best;
    }
    // farthest-point sampling
    std::vector<double> min_dist(static_cast<std::size_t>(ne),
                                 std::numeric_limits<double>::infinity());
    index_t src = 0;
    double best = 0.0;
    for (int s = 0; s < opts_.source_count; ++s) {
      const auto d = distances(src);
      index_t far = 0;
      double fmax = -1.0;
      for (index_t i = 0; i < ne; ++i) {
        const std::size_t ii = static_cast<std::size_t>(i);
        best = std::max(best, d[ii]);
        min_dist[ii] = std::min(min_dist[ii], d[ii]);
        if (min_dist[ii] > fmax) {
          fmax = min_dist[ii];
          far = i;
        }
      }
      src = far;
    }
    return best;
  }

  // Vol_g(B(x, r)) / r^{2n} from a single-source pass.
  double ball_volume_ratio(index_t source, double r) const {
    const auto d = distances(source);
    const double cell = ext_.cell_volume();
    double vol = 0.0;
    for (index_t i = 0; i < ext_.node_count(); ++i)
      if (d[static_cast<std::size_t>(i)] < r) vol += dets_[static_cast<std::size_t>(i)] * cell;
    return vol / std::pow(r, ext_.axis_count());
  }

  std::vector<double> ball_volume_ratios(index_t source, const std::vector<double>& radii) const {
    const auto d = distances(source);
    const double cell = ext_.cell_volume();
    std::vector<double> out;
    for (double r : radii) {
      double vol = 0.0;
      for (index_t i = 0; i < ext_.node_count(); ++i)
        if (d[static_cast<std::size_t>(i)] < r) vol += dets_[static_cast<std::size_t>(i)] * cell;
      out.push_back(vol / std::pow(r, ext_.axis_count()));
    }
    return out;
  }

  // extension node nearest to the given torus point
  index_t node_at(const std::vector<double>& point) const {
    int idx[4];
    for (int a = 0; a < ext_.axis_count(); ++a) {
      const double x = a < static_cast<int>(point.size()) ? point[a] : 0.5;
      int i = int(std::lround(x * ext_.resolution()[a] - 0.5));
      i %= ext_.resolution()[a];
      if (i < 0) i += ext_.resolution()[a];
      idx[a] = i;
    }
    return ext_.compose(idx);
  }

 private:
  static int nearest_index(int ext_idx, int ext_res, int metric_res) {
    const double x = (ext_idx + 0.5) / double(ext_res);
    int i = int(std::lround(x * metric_res - 0.5));
    i %= metric_res;
    if (i < 0) i += metric_res;
    return i;
  }

  index_t neighbor(index_t i, std::size_t offset_k, int sgn) const {
    const auto& off = offsets_[offset_k];
    const auto& c = coords_[static_cast<std::size_t>(i)];
    int idx[4];
    for (int a = 0; a < ext_.axis_count(); ++a) {
      int v = c[a] + sgn * off[a];
      const int r = ext_.resolution()[a];
      v %= r;
      if (v < 0) v += r;
      idx[a] = v;
    }
    return ext_.compose(idx);
  }

  double quad(index_t i, std::size_t offset_k) const {
    const int n = ext_.n_complex();
    const auto& dsp = disp_[offset_k];
    double xi[2] = {0, 0}, eta[2] = {0, 0};
    for (int j = 0; j < n; ++j) {
      xi[j] = dsp[ext_.x_axis(j)];
      eta[j] = dsp[ext_.y_axis(j)];
    }
    return real_quad_form(herms_[static_cast<std::size_t>(i)], xi, eta);
  }

  GeodesicOptions opts_;
  PeriodicGrid ext_;
  std::vector<index_t> metric_node_;
  std::vector<Herm> herms_;
  std::vector<double> dets_;
  std::vector<double> sqrt_q_cache_;
  std::vector<std::array<int, 4>> coords_;
  std::vector<std::array<int, 4>> offsets_;
  std::vector<std::array<double, 4>> disp_;
};

inline double diameter(const HermitianField& metric, const GeodesicOptions& opts = {}) {
  if (!metric.positivity_checked()) {
    const auto [e, node] = metric.min_eig_over_nodes();
    if (!(e > 0.0)) throw SingularMetric(node);
  }
  return GeodesicEstimator(metric, opts).diameter();
}

inline double ball_volume_ratio(const HermitianField& metric, const std::vector<double>& center,
                                double r, const GeodesicOptions& opts = {}) {
  GeodesicEstimator est(metric, opts);
  return est.ball_volume_ratio(est.node_at(center), r);
}

}  // namespace mage
