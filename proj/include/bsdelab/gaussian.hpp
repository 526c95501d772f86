#pragma once

#include "bsdelab/specs.hpp"

namespace bsdelab {

/// Transition density of the constant-coefficient diffusion: multivariate
/// normal with mean x + b (t-s) and covariance a (t-s). Validation oracle
/// for the lattice and the measure-correspondence checks. Throws for t <= s.
double gaussian_density(double s, const Vec& x, double t, const Vec& y, const SquareMat& a, const Vec& b);

/// Convenience overload pulling constant coefficients out of a spec at (s,x).
double gaussian_density(double s, const Vec& x, double t, const Vec& y, const DiffusionSpec& spec);

}  // namespace bsdelab
