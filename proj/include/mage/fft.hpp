// FFTW-backed constant-coefficient solves on the periodic grid.
//
// Used only as a preconditioner: (sum_a c_a D_aa - lambda)^{-1} with per-axis
// coefficients c_a >= 0 and shift lambda >= 0.  For lambda = 0 the zero mode
// is annihilated, matching the mean-zero gauge of the lambda = 0 Newton step.
// FFTW plan creation is serialized behind a global mutex (plan execution on
// distinct buffers is thread safe).
#pragma once

#include <fftw3.h>

#include <mutex>

#include "mage/field.hpp"

namespace mage {

inline std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

class FlatLaplacianSolver {
 public:
  explicit FlatLaplacianSolver(const PeriodicGrid& grid) : grid_(&grid) {
    const std::size_t n = static_cast<std::size_t>(grid.node_count());
    buf_ = fftw_alloc_complex(n);
    std::vector<int> dims(grid.resolution().begin(), grid.resolution().end());
    std::lock_guard<std::mutex> lock(fftw_plan_mutex());
    fwd_ = fftw_plan_dft(static_cast<int>(dims.size()), dims.data(), buf_, buf_,
                         FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft(static_cast<int>(dims.size()), dims.data(), buf_, buf_,
                         FFTW_BACKWARD, FFTW_ESTIMATE);
  }

  FlatLaplacianSolver(const FlatLaplacianSolver&) = delete;
  FlatLaplacianSolver& operator=(const FlatLaplacianSolver&) = delete;

  ~FlatLaplacianSolver() {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(buf_);
  }

  // z = (sum_a coeff[a] * D_aa - lambda)^{-1} r.
  void solve(const std::vector<double>& coeff, double lambda,
             const std::vector<double>& r, std::vector<double>& z) const {
    const PeriodicGrid& g = *grid_;
    const index_t n = g.node_count();
    for (index_t i = 0; i < n; ++i) {
      buf_[i][0] = r[static_cast<std::size_t>(i)];
      buf_[i][1] = 0.0;
    }
    fftw_execute(fwd_);
    const int axes = g.axis_count();
    int idx[4];
    for (index_t i = 0; i < n; ++i) {
      g.decompose(i, idx);
      double sym = -lambda;
      for (int a = 0; a < axes; ++a) {
        const double h = g.spacing()[a];
        const double s = std::sin(M_PI * idx[a] / double(g.resolution()[a]));
        sym -= coeff[a] * 4.0 * s * s / (h * h);
      }
      if (sym == 0.0) {
        buf_[i][0] = 0.0;
        buf_[i][1] = 0.0;
      } else {
        buf_[i][0] /= sym;
        buf_[i][1] /= sym;
      }
    }
    fftw_execute(bwd_);
    z.resize(static_cast<std::size_t>(n));
    const double scale = 1.0 / double(n);
    for (index_t i = 0; i < n; ++i) z[static_cast<std::size_t>(i)] = buf_[i][0] * scale;
  }

 private:
  const PeriodicGrid* grid_;
  fftw_complex* buf_;
  fftw_plan fwd_;
  fftw_plan bwd_;
};

}  // namespace mage
