// Scalar and Hermitian matrix fields over a PeriodicGrid, plus the
// constant-plus-potential background forms (theta, chi) of the flat model.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>

#include "mage/grid.hpp"
#include "mage/linalg.hpp"

namespace mage {

class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(const PeriodicGrid& grid, double fill = 0.0)
      : grid_(&grid), values_(static_cast<std::size_t>(grid.node_count()), fill) {}

  const PeriodicGrid& grid() const { return *grid_; }
  index_t size() const { return static_cast<index_t>(values_.size()); }
  double operator[](index_t i) const { return values_[static_cast<std::size_t>(i)]; }
  double& operator[](index_t i) { return values_[static_cast<std::size_t>(i)]; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  double sup() const { return *std::max_element(values_.begin(), values_.end()); }
  double inf() const { return *std::min_element(values_.begin(), values_.end()); }
  double sup_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

  bool all_finite() const {
    for (double v : values_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  ScalarField& operator+=(double c) {
    for (double& v : values_) v += c;
    return *this;
  }
  ScalarField& operator*=(double c) {
    for (double& v : values_) v *= c;
    return *this;
  }

 private:
  const PeriodicGrid* grid_ = nullptr;
  std::vector<double> values_;
};

inline void require_same_grid(const ScalarField& a, const ScalarField& b) {
  if (!a.grid().same_layout(b.grid()))
    throw GridMismatch("scalar fields live on different grids");
}

// Hermitian matrix per node, stored as real diagonal plus the packed (1,0)
// entry, so Hermitian symmetry holds bit-exactly by construction.
class HermitianField {
 public:
  HermitianField() = default;
  explicit HermitianField(const PeriodicGrid& grid)
      : grid_(&grid),
        n_(grid.n_complex()),
        data_(static_cast<std::size_t>(grid.node_count()) * entry_count(grid.n_complex()), 0.0) {}

  static int entry_count(int n) { return n == 1 ? 1 : 4; }

  const PeriodicGrid& grid() const { return *grid_; }
  int n() const { return n_; }
  index_t node_count() const { return grid_->node_count(); }
  bool positivity_checked() const { return positivity_checked_; }
  void set_positivity_checked(bool v) { positivity_checked_ = v; }

  Herm at(index_t i) const {
    const std::size_t base = static_cast<std::size_t>(i) * entry_count(n_);
    if (n_ == 1) return Herm{1, data_[base], 0.0, {0.0, 0.0}};
    return Herm{2, data_[base], data_[base + 1], {data_[base + 2], data_[base + 3]}};
  }

  void set(index_t i, const Herm& h) {
    const std::size_t base = static_cast<std::size_t>(i) * entry_count(n_);
    data_[base] = h.d0;
    if (n_ == 2) {
      data_[base + 1] = h.d1;
      data_[base + 2] = h.off.real();
      data_[base + 3] = h.off.imag();
    }
  }

  void fill(const Herm& h) {
    for (index_t i = 0; i < node_count(); ++i) set(i, h);
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  // Smallest eigenvalue over all nodes together with its node.
  std::pair<double, index_t> min_eig_over_nodes() const {
    double best = std::numeric_limits<double>::infinity();
    index_t where = 0;
    for (index_t i = 0; i < node_count(); ++i) {
      const double e = min_eig(at(i));
      if (e < best) {
        best = e;
        where = i;
      }
    }
    return {best, where};
  }

 private:
  const PeriodicGrid* grid_ = nullptr;
  int n_ = 1;
  std::vector<double> data_;
  bool positivity_checked_ = false;
};

inline void require_same_grid(const HermitianField& a, const HermitianField& b) {
  if (!a.grid().same_layout(b.grid()))
    throw GridMismatch("hermitian fields live on different grids");
}

// Background (1,1)-form: constant Hermitian part plus an optional potential
// whose complex Hessian is added when the form is materialized on a grid.
// rank counts the strictly positive eigenvalues of the constant part and
// equals the numerical dimension kappa in the flat model.
struct BackgroundForm {
  Herm constant_part;
  std::optional<ScalarField> potential_part;

  BackgroundForm() = default;
  explicit BackgroundForm(const Herm& c) : constant_part(c) {}
  BackgroundForm(const Herm& c, ScalarField h)
      : constant_part(c), potential_part(std::move(h)) {}

  int n() const { return constant_part.n; }

  int rank(double tol = 1e-12) const {
    int r = 0;
    if (constant_part.n == 1) return constant_part.d0 > tol ? 1 : 0;
    const double lo = min_eig(constant_part);
    const double hi = max_eig(constant_part);
    if (lo > tol) ++r;
    if (hi > tol) ++r;
    return r;
  }

  bool constant_semipositive(double tol = 1e-12) const {
    return min_eig(constant_part) >= -tol;
  }
};

}  // namespace mage
