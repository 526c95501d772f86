#pragma once

#include <functional>
#include <memory>
#include <optional>

#include "bsdelab/lattice.hpp"
#include "bsdelab/paths.hpp"

namespace bsdelab {

/// Scalar field sampled on the backward engine's states: value at
/// (time step k, state i). States are lattice nodes or Monte Carlo paths.
using NodeField = std::function<double(int, int)>;

/// Conditional-expectation backend shared by all backward solvers, so the
/// penalization and homographic schemes differ only in their per-node step.
class BackwardEngine {
 public:
  virtual ~BackwardEngine() = default;

  virtual const TimeGrid& grid() const = 0;
  virtual int dim() const = 0;
  virtual int n_states() const = 0;
  virtual Vec state(int k, int i) const = 0;

  /// cont[i] = E[y_next | state i at step k],
  /// z[c][i] = E[y_next dB_c | state i]/dt.
  virtual void condition(int k, const std::vector<double>& y_next, std::vector<double>& cont,
                         std::vector<std::vector<double>>& z) const = 0;

  /// Increment dR over step k at state i for the driving measure, optionally
  /// truncated at level `cap` (R wedge cap).
  virtual NodeField measure_increments(const MeasureData& mu, std::optional<double> cap) const = 0;

  /// Lifts a (t,x) function to a NodeField.
  NodeField lift(const ScalarField& f) const {
    return [this, f](int k, int i) { return f(grid().node(k), state(k, i)); };
  }
};

class LatticeEngine : public BackwardEngine {
 public:
  explicit LatticeEngine(const MarkovLattice& lat) : lat_(&lat) {}

  const TimeGrid& grid() const override { return lat_->grid(); }
  int dim() const override { return lat_->dim(); }
  int n_states() const override { return lat_->n_nodes(); }
  Vec state(int, int i) const override { return lat_->node(i); }
  void condition(int k, const std::vector<double>& y_next, std::vector<double>& cont,
                 std::vector<std::vector<double>>& z) const override {
    lat_->condition(k, y_next, cont, z);
  }

  /// dR(k,i) = q(tau_k, x_i) dt. Truncation R wedge cap uses the
  /// deterministic clock sum_j max_x q(tau_j, x) dt, exact whenever q does
  /// not depend on x; cumulative R along chain paths is not representable
  /// node-wise.
  NodeField measure_increments(const MeasureData& mu, std::optional<double> cap) const override;

  const MarkovLattice& lattice() const { return *lat_; }

 private:
  const MarkovLattice* lat_;
};

class PathEngine : public BackwardEngine {
 public:
  /// `extra_basis` columns (t,x) -> value are appended to the polynomial
  /// design; a payoff column sharpens regressions around kinks.
  PathEngine(const PathBundle& paths, int basis_order, std::vector<ScalarField> extra_basis = {});

  const TimeGrid& grid() const override { return paths_->grid; }
  int dim() const override { return paths_->dim; }
  int n_states() const override { return paths_->n_paths; }
  Vec state(int k, int i) const override { return paths_->state(i, k); }

  /// Least-squares projection onto the polynomial basis of X_k; at step 0
  /// all paths share one state and the projection collapses to the mean.
  /// Rank-deficient regressions throw naming the time step.
  void condition(int k, const std::vector<double>& y_next, std::vector<double>& cont,
                 std::vector<std::vector<double>>& z) const override;

  /// Per-path increments of the accumulated functional, truncated per path
  /// when `cap` is set.
  NodeField measure_increments(const MeasureData& mu, std::optional<double> cap) const override;

  const PathBundle& paths() const { return *paths_; }
  int basis_order() const { return basis_order_; }

 private:
  std::vector<Vec> basis_columns(int k) const;

  const PathBundle* paths_;
  int basis_order_;
  std::vector<ScalarField> extra_basis_;
};

}  // namespace bsdelab
