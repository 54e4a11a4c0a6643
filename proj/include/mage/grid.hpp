// Periodic grids on flat complex tori.
//
// Full mode represents all 2n real axes of the torus, interleaved as
// (x_1, y_1, ..., x_n, y_n) with x_j = Re z_j, y_j = Im z_j.  Reduced mode
// keeps only the real parts (x_1, ..., x_n); fields are understood to be
// invariant in every imaginary coordinate.  Every real axis has period 1 and
// cell-centered nodes: coordinate (i + 1/2) * spacing along each axis.
#pragma once

#include <array>
#include <numeric>

#include "mage/common.hpp"

namespace mage {

enum class GridMode : std::uint8_t { Full = 0, Reduced = 1 };

inline constexpr index_t kDefaultNodeCap = index_t(1) << 26;

class PeriodicGrid {
 public:
  PeriodicGrid() = default;

  PeriodicGrid(int n_complex, GridMode mode, std::vector<int> resolution,
               index_t node_cap = kDefaultNodeCap)
      : n_complex_(n_complex), mode_(mode), res_(std::move(resolution)) {
    if (n_complex < 1 || n_complex > 2)
      throw ConfigError("n_complex must be 1 or 2");
    const int want_axes = axis_count();
    if (static_cast<int>(res_.size()) == 1)
      res_.assign(want_axes, res_[0]);
    if (static_cast<int>(res_.size()) != want_axes)
      throw ConfigError("resolution list does not match axis count");
    node_count_ = 1;
    for (int r : res_) {
      if (r < 8) throw ConfigError("resolution must be >= 8 on every axis");
      node_count_ *= r;
    }
    if (node_count_ > node_cap)
      throw ConfigError("grid exceeds node cap (" +
                        std::to_string(node_count_) + " > " +
                        std::to_string(node_cap) + ")");
    spacing_.resize(res_.size());
    for (std::size_t a = 0; a < res_.size(); ++a) spacing_[a] = 1.0 / res_[a];
    strides_.assign(res_.size(), 1);
    for (int a = static_cast<int>(res_.size()) - 2; a >= 0; --a)
      strides_[a] = strides_[a + 1] * res_[a + 1];
  }

  int n_complex() const { return n_complex_; }
  GridMode mode() const { return mode_; }
  int axis_count() const {
    return mode_ == GridMode::Full ? 2 * n_complex_ : n_complex_;
  }
  const std::vector<int>& resolution() const { return res_; }
  const std::vector<double>& spacing() const { return spacing_; }
  index_t node_count() const { return node_count_; }

  // Volume of one cell over the represented axes.  Reduced mode implicitly
  // carries unit fiber volume in each suppressed imaginary axis, so totals
  // match the full torus.
  double cell_volume() const {
    double v = 1.0;
    for (double h : spacing_) v *= h;
    return v;
  }

  // Axis index of Re z_j / Im z_j.  Im is only meaningful in Full mode.
  int x_axis(int j) const { return mode_ == GridMode::Full ? 2 * j : j; }
  int y_axis(int j) const { return 2 * j + 1; }

  index_t stride(int axis) const { return strides_[axis]; }

  void decompose(index_t node, int* idx) const {
    for (std::size_t a = 0; a < res_.size(); ++a) {
      idx[a] = static_cast<int>(node / strides_[a]);
      node %= strides_[a];
    }
  }

  index_t compose(const int* idx) const {
    index_t node = 0;
    for (std::size_t a = 0; a < res_.size(); ++a)
      node += index_t(idx[a]) * strides_[a];
    return node;
  }

  double coordinate(int idx, int axis) const {
    return (idx + 0.5) * spacing_[axis];
  }

  void coordinates(index_t node, double* x) const {
    int idx[4];
    decompose(node, idx);
    for (int a = 0; a < axis_count(); ++a) x[a] = coordinate(idx[a], a);
  }

  // Periodic neighbor: node shifted by `offset` cells along `axis`.
  index_t shift(index_t node, int axis, int offset) const {
    const index_t s = strides_[axis];
    const int r = res_[axis];
    const index_t block = node / (s * r) * (s * r);
    const index_t rem = node - block;
    const int i = static_cast<int>(rem / s);
    const index_t sub = rem - index_t(i) * s;
    int j = (i + offset) % r;
    if (j < 0) j += r;
    return block + index_t(j) * s + sub;
  }

  // Shift along an integer offset vector over all represented axes.
  index_t shift(index_t node, const int* offset) const {
    for (int a = 0; a < axis_count(); ++a)
      if (offset[a] != 0) node = shift(node, a, offset[a]);
    return node;
  }

  bool same_layout(const PeriodicGrid& o) const {
    return n_complex_ == o.n_complex_ && mode_ == o.mode_ && res_ == o.res_;
  }

 private:
  int n_complex_ = 1;
  GridMode mode_ = GridMode::Reduced;
  std::vector<int> res_;
  std::vector<double> spacing_;
  std::vector<index_t> strides_;
  index_t node_count_ = 0;
};

inline PeriodicGrid build_grid(int n_complex, GridMode mode, int resolution,
                               index_t node_cap = kDefaultNodeCap) {
  return PeriodicGrid(n_complex, mode, {resolution}, node_cap);
}

}  // namespace mage
