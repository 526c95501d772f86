#pragma once

#include "bsdelab/specs.hpp"
#include "bsdelab/time_grid.hpp"

namespace bsdelab {

/// Barrier S_t = h(t, X_t) together with the pieces of its semimartingale
/// decomposition: the residual Phi = dh/dt + L h + f_h split into the
/// increasing parts C (from Phi^+) and R (from Phi^-), and the martingale
/// coefficient Ztilde = sigma^T grad h. The split of the f term into C and R
/// is a convention; this one keeps R = Phi^-.
struct ObstacleSpec {
  std::function<double(double, const Vec&)> h;
  ScalarField c_density;  // Phi^+
  ScalarField r_density;  // Phi^-
  VectorField ztilde;
  std::optional<ScalarField> phi_residual;  // Phi itself

  double barrier(double t, const Vec& x) const { return h(t, x); }
};

/// Finite-difference decomposition of the barrier. `space_step` controls the
/// stencil width (kinks smear over that scale, matching the caller's grid);
/// 0 picks a small smooth-case default. Throws when derivatives are not
/// evaluable (non-finite samples).
ObstacleSpec decompose_obstacle(const std::function<double(double, const Vec&)>& h, const DriverSpec& driver,
                                const DiffusionSpec& spec, const TimeGrid& grid, double space_step = 0.0);

}  // namespace bsdelab
