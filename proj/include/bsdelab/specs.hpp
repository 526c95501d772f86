#pragma once

#include <functional>
#include <optional>
#include <string>

#include "bsdelab/linalg.hpp"

namespace bsdelab {

using ScalarField = std::function<double(double, const Vec&)>;     // (t,x)
using VectorField = std::function<Vec(double, const Vec&)>;        // (t,x) -> d-vector
using MatrixField = std::function<SquareMat(double, const Vec&)>;  // (t,x) -> d x d

/// Coefficients of the divergence-form operator
///   L = 1/2 sum_ij d_i(a_ij d_j .) + sum_i b_i d_i
/// with uniform ellipticity bounds lambda_lo, lambda_hi. The associated
/// diffusion has Ito drift b + 1/2 div(a); div(a) is supplied analytically
/// or approximated by central differences.
struct DiffusionSpec {
  int dim = 1;
  MatrixField a;
  VectorField b;
  double lambda_lo = 1.0;
  double lambda_hi = 1.0;
  std::optional<VectorField> div_a;

  Vec div_a_at(double t, const Vec& x) const;
  Vec ito_drift(double t, const Vec& x) const;
  /// Lower-triangular sigma with sigma sigma^T = a(t,x). Throws naming
  /// (t,x) when a is not positive definite there.
  SquareMat sigma(double t, const Vec& x) const;

  /// Samples ellipticity and symmetry at the given points; throws on a
  /// violation. Coefficients are opaque callables, so this is the only
  /// check available.
  void validate(const std::vector<Vec>& probe_points, double t_lo, double t_hi) const;
};

/// Same as sigma() but free-standing, for callers holding only a matrix.
SquareMat sigma_from_a(const SquareMat& a, const std::string& context);

/// Driver data (f, g, terminal phi) with the growth/Lipschitz constants the
/// estimates depend on: |f| <= K(|gamma| + |y| + |z|), |g| <= M.
struct DriverSpec {
  std::function<double(double, const Vec&, double, const Vec&)> f;  // (t,x,y,z)
  std::function<double(double, const Vec&, double)> g;              // (t,x,y)
  std::function<double(const Vec&)> phi;                            // terminal
  ScalarField gamma_bound;                                          // gamma(t,x)
  double const_K = 0.0;
  double const_M = 0.0;
  std::optional<double> const_L;  // Lipschitz constant in (y,z) when known

  double f_at(double t, const Vec& x, double y, const Vec& z) const { return f ? f(t, x, y, z) : 0.0; }
  double g_at(double t, const Vec& x, double y) const { return g ? g(t, x, y) : 0.0; }
  double gamma_at(double t, const Vec& x) const { return gamma_bound ? gamma_bound(t, x) : 0.0; }

  /// Spot-checks the growth bounds on given sample tuples; throws on a
  /// violation beyond slack.
  void validate(const std::vector<std::tuple<double, Vec, double, Vec>>& samples) const;
};

/// Positive measure on [0,T] x R^d represented by a space-time density
/// q(t,x), optionally carrying the pair (f, fbar) of an H^-1 functional
/// f - div(fbar) that induces it.
struct MeasureData {
  ScalarField density;
  struct HMinusOnePair {
    ScalarField f;
    VectorField fbar;
  };
  std::optional<HMinusOnePair> h_minus_one_pair;

  double q(double t, const Vec& x) const { return density ? density(t, x) : 0.0; }

  static MeasureData zero();
};

/// Checks int q*eta dt dx = <f,eta> + <fbar, grad eta> by midpoint quadrature
/// on [t_lo,t_hi] x [x_lo,x_hi] (1D) for a smooth test function; returns the
/// absolute gap. Only meaningful when the pair is present.
double pairing_gap(const MeasureData& mu, const std::function<double(double, double)>& eta,
                   const std::function<double(double, double)>& eta_dx, double t_lo, double t_hi,
                   double x_lo, double x_hi, int n_t, int n_x);

}  // namespace bsdelab
