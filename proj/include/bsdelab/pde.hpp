#pragma once

#include "bsdelab/array2d.hpp"
#include "bsdelab/specs.hpp"
#include "bsdelab/time_grid.hpp"
#include "bsdelab/weights.hpp"

namespace bsdelab {

/// Uniform space-time box grid, 1D or tensor 2D.
struct SpaceTimeGrid {
  TimeGrid time;
  int dim = 1;
  Vec lo, hi;
  int nx = 0, ny = 1;
  double dx = 0.0, dy = 0.0;

  static SpaceTimeGrid make_1d(const TimeGrid& time, double lo, double hi, int n_nodes);
  static SpaceTimeGrid make_2d(const TimeGrid& time, const Vec& lo, const Vec& hi, int nx, int ny);

  int n_nodes() const { return nx * ny; }
  Vec node(int i) const;
  bool boundary(int i) const;
  double min_spacing() const { return dim == 1 ? dx : std::min(dx, dy); }
};

/// Backward-parabolic solution on the grid. Terminal layer equals phi on
/// the nodes. In obstacle mode `reaction` holds the nonnegative discrete
/// reaction density (one row per time step), `h_grid` the sampled barrier
/// and `phi_minus` the negative part of the barrier's discrete residual
/// (same stencils as the operator).
struct PDESolution {
  SpaceTimeGrid grid;
  Array2D u;                   // (N+1) x nodes
  std::vector<Array2D> grad;   // central differences, per dimension
  Array2D reaction;            // (N) x nodes; empty when unconstrained
  Array2D h_grid;              // (N+1) x nodes; obstacle mode only
  Array2D phi_minus;           // (N) x nodes; obstacle mode only

  struct HomographicMember {
    int n = 0;
    Array2D u;   // (N+1) x nodes
    Array2D mu;  // (N) x nodes
  };
  std::vector<HomographicMember> mu_n_sequence;

  /// Piecewise-linear in space, previous-node in time.
  double value_at(double t, const Vec& x) const;
  Vec grad_at(double t, const Vec& x) const;
};

/// Implicit Euler for du/dt + L u + f(t,x,u,sigma grad u) + g(t,x,u) q = 0
/// backward from u(T) = phi, divergence-form flux discretization, one
/// damped-Newton solve per step (Thomas in 1D, SOR-backed Newton in 2D).
/// Boundary nodes follow the spatially-frozen far-field equation. Newton
/// divergence throws naming the time layer.
PDESolution solve_parabolic_measure(const SpaceTimeGrid& grid, const DiffusionSpec& spec,
                                    const DriverSpec& driver, const MeasureData& mu);

/// Projected scheme for the obstacle problem: each implicit step is
/// followed by u := max(u, h); the reaction is the projection residual
/// divided by dt, which makes the discrete complementarity exact.
/// Requires phi >= h(T,.) on the nodes.
PDESolution solve_obstacle_projected(const SpaceTimeGrid& grid, const DiffusionSpec& spec,
                                     const DriverSpec& driver,
                                     const std::function<double(double, const Vec&)>& h);

/// Homographic family: for each n solves the semilinear problem with the
/// damped measure term phi_minus / (1 + n|u_n - h|), Newton started from
/// the unconstrained step plus phi_minus dt (an upper bound, so damping
/// approaches the maximal root from above). Members are recorded in
/// mu_n_sequence; u_n must decrease in n within 1e-6.
PDESolution solve_obstacle_homographic(const SpaceTimeGrid& grid, const DiffusionSpec& spec,
                                       const DriverSpec& driver,
                                       const std::function<double(double, const Vec&)>& h,
                                       const std::vector<int>& n_list);

struct ReactionDensityReport {
  Array2D alpha_hat;  // (N) x nodes, NaN where phi_minus below tol
  int defined_nodes = 0;
  int range_violations = 0;      // outside [-1e-6, 1+1e-6]
  double max_off_contact = 0.0;  // defined alpha away from {|u-h| <= eps}
};

/// alpha_hat = reaction / phi_minus where the denominator is meaningful.
ReactionDensityReport recover_reaction_density(const PDESolution& sol, double eps_contact,
                                               double density_tol = 1e-10);

struct PdeLsReport {
  int violations = 0;
  double max_lower_excess = 0.0;
  double max_upper_excess = 0.0;
  int nodes_checked = 0;
};

/// Two-sided reaction bound 0 <= -(D_t u + L u + f_u) <= 1{|u-h|<=eps} phi_minus,
/// evaluated with the solver's own stencils on interior nodes. Requires a
/// symmetric operator (b = 0).
PdeLsReport check_pde_lewy_stampacchia(const PDESolution& sol, const DiffusionSpec& spec,
                                       const DriverSpec& driver, double eps_contact, double tol = 1e-8);

/// Space-time L2 norm against rho^2 weights, sqrt(sum field^2 rho^2 dx dt).
double l2_rho_norm(const SpaceTimeGrid& grid, const Array2D& field, const WeightSpec& w);

/// Spatial L2 rho norm of one time layer.
double l2_rho_norm_layer(const SpaceTimeGrid& grid, const Array2D& field, int layer, const WeightSpec& w);

}  // namespace bsdelab
