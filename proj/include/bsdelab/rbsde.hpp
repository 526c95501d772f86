#pragma once

#include "bsdelab/bsde.hpp"
#include "bsdelab/obstacle.hpp"

namespace bsdelab {

/// Reflected solution triple (Y, Z, K). K is cumulative with K(0,.) = 0 and
/// nondecreasing rows; in lattice mode K(k,i) accumulates the increment
/// field at fixed state i (exact for space-independent data), in Monte
/// Carlo mode it is the per-path control.
struct RBSDESolution {
  TimeGrid grid;
  SolveMode mode = SolveMode::lattice;
  Array2D y;
  std::vector<Array2D> z;
  Array2D k;
  int start_index = 0;
  std::vector<double> y0_samples;

  double y0() const;
  double y0_stderr() const;
};

/// One member of the homographic family: the damped-reflection GBSDE with
/// K^n increments alpha^n dR, alpha^n = 1/(1 + n |Y^n - S|).
struct HomographicIterate {
  int n = 0;
  RBSDESolution sol;
  Array2D alpha;                      // per step (N rows)
  double domination_violation = 0.0;  // max (S - Y^n)^+
};

struct PenalizationReport {
  std::vector<int> schedule;
  std::vector<double> successive_gap;
  double max_monotonicity_violation = 0.0;
  double domination_violation = 0.0;
};

/// Penalized reflection: solves the plain BSDE with the extra driver term
/// n (y - S)^-, whose accumulated contributions form K^n. Iterates must
/// increase with n; the returned solution extrapolates the last two
/// schedule members in 1/n (tiny negative K increments from extrapolation
/// are clamped). Requires phi >= h(T,.) on the engine states.
RBSDESolution solve_rbsde_penalization(const BackwardEngine& engine, const DriverSpec& driver,
                                       const ObstacleSpec& obstacle, const std::vector<int>& n_schedule,
                                       PenalizationReport* report = nullptr, bool extrapolate = true);

/// One homographic iterate: per node the scalar equation
///   y = cont + dt f(t,x,y,z) + dR / (1 + n |y - S|)
/// is solved for its LARGEST root (the discrete counterpart of picking the
/// maximal solution, which is what keeps Y^n above the barrier). Bisection
/// is bracketed above by the unconstrained step plus dR.
HomographicIterate solve_rbsde_homographic(const BackwardEngine& engine, const DriverSpec& driver,
                                           const ObstacleSpec& obstacle, int n);

/// Largest root of y = cont + fdt(y) + dr/(1 + n|y - s|). F is strictly
/// increasing above the barrier, so when F(s) <= 0 the bracket starts AT s
/// and the result never falls below it; otherwise the root is tracked
/// downward at the 1/n well resolution. Shared by the lattice and pde
/// homographic schemes. lip_dt bounds dt * Lipschitz(f).
double homographic_scalar_root(const std::function<double(double)>& fdt, double cont, double dr, double n,
                               double s, double lip_dt, int k, int i, double t,
                               const BackwardOptions& opts = {});

struct HomographicGapRow {
  int n = 0;
  double sup_gap_y = 0.0;
  double int_gap_z = 0.0;
  double sup_gap_k = 0.0;
  double skorokhod = 0.0;
  int ls_violations = 0;
};

struct HomographicSequenceReport {
  std::vector<HomographicGapRow> rows;
  double max_monotonicity_violation = 0.0;  // of Y^n >= Y^{n+1}
  double domination_violation = 0.0;        // of Y^n >= S
};

/// Runs the homographic family over n_list against a reference solution
/// (penalization limit or a projected-PDE oracle mapped onto the engine).
/// Throws when the decrease certificate Y^n >= Y^{n+1} fails beyond 1e-6.
/// eps_contact feeds the per-row Lewy-Stampacchia census.
HomographicSequenceReport homographic_sequence(const BackwardEngine& engine, const DriverSpec& driver,
                                               const ObstacleSpec& obstacle, const std::vector<int>& n_list,
                                               const RBSDESolution& reference, double eps_contact = 1e-9);

/// E sum_k (Y_k - S_k) dK_k; zero in the limit by the Skorokhod condition.
double check_skorokhod(const BackwardEngine& engine, const RBSDESolution& sol, const ObstacleSpec& obstacle);

struct LewyStampacchiaReport {
  int violations = 0;
  double max_lower_excess = 0.0;  // of dK >= 0
  double max_upper_excess = 0.0;  // of dK <= 1{contact} dR
  int nodes_checked = 0;
};

/// Node-wise bound 0 <= dK <= 1{|Y-S| <= eps_contact} dR + tol. Meaningful
/// for converged solutions (the bound concerns the limit control); the
/// finite-n homographic iterates satisfy dK = alpha dR instead.
LewyStampacchiaReport check_lewy_stampacchia(const BackwardEngine& engine, const RBSDESolution& sol,
                                             const ObstacleSpec& obstacle, double eps_contact,
                                             double tol = 1e-8);

struct ControlDensityReport {
  Array2D alpha_hat;          // (N) x m; NaN where the density is below tol
  int defined_nodes = 0;
  int range_violations = 0;   // alpha outside [-tol, 1+tol]
  double max_off_contact = 0.0;  // largest defined alpha off the contact set
};

/// Recovers the density alpha from dK against (f + U)^- dt, where U is the
/// Ito drift of the barrier, so (f + U) equals the decomposition residual.
/// Nodes with denominator below `density_tol` are flagged undefined, never
/// inferred.
ControlDensityReport control_density(const BackwardEngine& engine, const RBSDESolution& sol,
                                     const ObstacleSpec& obstacle, double eps_contact,
                                     double density_tol = 1e-10);

}  // namespace bsdelab
