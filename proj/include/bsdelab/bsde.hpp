#pragma once

#include <optional>
#include <vector>

#include "bsdelab/engine.hpp"

namespace bsdelab {

enum class SolveMode { lattice, monte_carlo };

/// Backward solution pair (Y, Z) on the engine's states. y(k,i) is the value
/// at time node k, lattice node / path i; z holds one plane per space
/// dimension (the terminal layer repeats the last computed one).
struct BSDESolution {
  TimeGrid grid;
  SolveMode mode = SolveMode::lattice;
  Array2D y;
  std::vector<Array2D> z;
  int start_index = 0;             // lattice: node carrying the initial state
  std::vector<double> y0_samples;  // MC: per-path rolled estimator terms

  double y0() const;
  double y0_stderr() const;  // 0 in lattice mode
};

struct SolveReport {
  int iterations = 0;      // worst per-node iteration count
  double residual = 0.0;   // worst per-node fixed-point residual
  double apriori_lhs = 0.0;
  double apriori_rhs = 0.0;
};

struct BackwardOptions {
  int max_iterations = 200;
  double tolerance = 1e-13;
};

/// Solves the scalar equation y = rhs(y) by damped fixed point with a
/// bisection fallback; the per-node implicit step everywhere. Throws naming
/// (k, i, t) when no root can be bracketed.
double implicit_node_value(const std::function<double(double)>& rhs, double cont, int k, int i, double t,
                           const BackwardOptions& opts = {}, int* iters_out = nullptr,
                           double* resid_out = nullptr);

/// Backward induction skeleton: terminal layer, then one engine
/// conditioning plus one `node_solve(k, i, t, x, dt, cont, z)` call per
/// state per step. The schemes differ only in node_solve.
BSDESolution backward_sweep(const BackwardEngine& engine, const std::function<double(const Vec&)>& terminal,
                            const std::function<double(int, int, double, const Vec&, double, double, const Vec&)>& node_solve,
                            SolveMode mode);

/// Backward induction for Y_k = E[Y_{k+1}|.] + f dt + g dR, implicit in Y
/// (damped fixed point with a bisection fallback), explicit in Z. dR comes
/// from the supplied field. Throws SolveError naming the node when the
/// per-node solve fails to converge.
BSDESolution solve_gbsde(const BackwardEngine& engine, const DriverSpec& driver, const NodeField& dr,
                         SolveReport* report = nullptr, const BackwardOptions& opts = {});

/// Lattice front end: dR(k,i) = q(tau_k, x_i) dt.
BSDESolution solve_gbsde_lattice(const MarkovLattice& lat, const DriverSpec& driver, const MeasureData& mu,
                                 const Vec& start, SolveReport* report = nullptr);

/// Least-squares Monte Carlo front end with the accumulated functional R.
BSDESolution solve_gbsde_lsmc(const PathBundle& paths, const FunctionalPath& r, const DriverSpec& driver,
                              int basis_order, SolveReport* report = nullptr);

/// Per-n record of the monotone approximation run.
struct ApproximationCertificate {
  std::vector<int> schedule;
  std::vector<double> successive_gap;     // sup|Y^{n_j} - Y^{n_{j-1}}|
  double max_monotonicity_violation = 0.0;
};

/// Minimal solution for continuous (possibly non-Lipschitz in y) drivers:
/// solves with the n-Lipschitz lower approximants f_n, g_n (grid
/// inf-convolution in y) and R truncated at level n, stopping when the
/// successive sup gap drops below `stop_gap`. The iterates must increase;
/// a violation beyond 1e-8 throws. g is approximated only when nonnegative
/// (probed); R is left untruncated for sign-changing g to keep the
/// comparison hypotheses intact.
BSDESolution minimal_solution(const BackwardEngine& engine, const DriverSpec& driver, const MeasureData& mu,
                              const std::vector<int>& n_schedule, ApproximationCertificate* cert = nullptr,
                              double stop_gap = 1e-4);

/// Maximal solution by sign flipping: -(minimal solution of the system with
/// terminal -phi, f(t,x,y,z) -> -f(t,x,-y,-z), g(t,x,y) -> -g(t,x,-y)).
BSDESolution maximal_solution(const BackwardEngine& engine, const DriverSpec& driver, const MeasureData& mu,
                              const std::vector<int>& n_schedule, ApproximationCertificate* cert = nullptr,
                              double stop_gap = 1e-4);

struct ComparisonReport {
  double max_violation = 0.0;  // max over nodes of (Y1 - Y2)^+
  int at_step = -1;
  int at_state = -1;
  bool pass(double tol = 1e-8) const { return max_violation <= tol; }
};

/// Reports how far sol1 exceeds sol2. With data ordered as in the
/// comparison theorem the violation stays at solver tolerance because every
/// lattice weight is nonnegative.
ComparisonReport check_comparison(const BSDESolution& sol1, const BSDESolution& sol2);

struct AprioriReport {
  double lhs = 0.0;  // E sup|Y|^2 + E int |Z|^2 dt
  double rhs = 0.0;  // E|xi|^2 + E|R_T|^2 + E int |gamma|^2 dt
  double ratio = 0.0;
};

/// Energy-estimate check. Lattice mode takes expectations under the chain
/// marginals from the solution's start node (E|R_T|^2 via a two-moment
/// backward recursion); Monte Carlo mode uses empirical path averages.
AprioriReport check_apriori(const BackwardEngine& engine, const BSDESolution& sol, const DriverSpec& driver,
                            const MeasureData& mu);

}  // namespace bsdelab
