#pragma once

#include <vector>

#include "bsdelab/array2d.hpp"
#include "bsdelab/specs.hpp"
#include "bsdelab/time_grid.hpp"

namespace bsdelab {

/// Trinomial (per dimension) Markov chain matching the Euler step's first
/// and second conditional moments. 1D or tensor-product 2D with diagonal a.
/// Rows are stochastic; every weight is nonnegative, which makes the
/// backward operator monotone. Boundary nodes keep the outgoing mass in
/// place.
class MarkovLattice {
 public:
  int dim() const { return dim_; }
  const TimeGrid& grid() const { return grid_; }
  int n_nodes() const { return static_cast<int>(nodes_.size()); }
  const Vec& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  double spacing(int c) const { return dx_[static_cast<std::size_t>(c)]; }
  int stencil() const { return stencil_; }
  bool time_homogeneous() const { return homogeneous_; }

  int nearest_node(const Vec& x) const;

  /// Transition row of node i at step k: `idx`/`prob` hold `stencil()`
  /// entries; `db` holds stencil*dim Brownian-increment surrogates
  /// sigma^{-1} (x_j - x_i - drift dt).
  void row(int k, int i, const int*& idx, const double*& prob, const double*& db) const;

  /// cont[i] = E[y_next | node i], z[c][i] = E[y_next dB_c | node i]/dt.
  void condition(int k, const std::vector<double>& y_next, std::vector<double>& cont,
                 std::vector<std::vector<double>>& z) const;

  /// Marginal distribution at every time node, starting from a unit mass at
  /// `start_index`.
  Array2D marginals(int start_index) const;

  /// Dense one-step transition matrix (for composition checks and small
  /// diagnostics only).
  Array2D dense_transition(int k) const;

  friend MarkovLattice build_lattice(const DiffusionSpec& spec, const TimeGrid& grid, const Vec& space_lo,
                                     const Vec& space_hi, int n_space);

 private:
  struct StepData {
    std::vector<int> idx;
    std::vector<double> prob;
    std::vector<double> db;
  };
  const StepData& step(int k) const { return homogeneous_ ? steps_[0] : steps_[static_cast<std::size_t>(k)]; }

  TimeGrid grid_;
  int dim_ = 1;
  int stencil_ = 3;
  std::vector<int> shape_;  // nodes per dimension
  Vec lo_, hi_, dx_;
  std::vector<Vec> nodes_;
  bool homogeneous_ = true;
  std::vector<StepData> steps_;
};

/// Builds the chain on a uniform box grid. Requires the CFL-type condition
/// (a dt + (drift dt)^2) / dx^2 <= 1 at every probed node; on violation the
/// error names the number of time steps that would satisfy it.
MarkovLattice build_lattice(const DiffusionSpec& spec, const TimeGrid& grid, const Vec& space_lo,
                            const Vec& space_hi, int n_space);

/// Default spatial box [x - 6 sqrt(Lambda T'), x + 6 sqrt(Lambda T')]
/// (Gaussian tail mass below 1e-8), with T' the grid span.
void default_box(const DiffusionSpec& spec, const TimeGrid& grid, const Vec& center, Vec& lo, Vec& hi);

}  // namespace bsdelab
