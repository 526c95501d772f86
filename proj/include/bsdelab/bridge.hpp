#pragma once

#include <cstdint>

#include "bsdelab/pde.hpp"
#include "bsdelab/rbsde.hpp"

namespace bsdelab {

/// One experiment shared by both sides of the representation identity.
/// When `obstacle_h` is set the comparison runs reflected solvers against
/// the projected PDE solution.
struct BridgeCase {
  DiffusionSpec spec;
  DriverSpec driver;
  MeasureData mu = MeasureData::zero();
  std::function<double(double, const Vec&)> obstacle_h;  // null -> unconstrained
  std::vector<int> penalization_schedule{4, 8, 16, 32};
  int n_steps = 100;
  int n_paths = 20000;
  int basis_order = 3;
  std::uint64_t seed = 1;
  int jobs = 1;
};

struct BridgePoint {
  double s = 0.0;
  Vec x;
  double pde_value = 0.0;
  double mc_value = 0.0;
  double mc_stderr = 0.0;
  double gap = 0.0;
  bool pass = false;
};

struct BridgeReport {
  std::vector<BridgePoint> points;
  double z_gap = 0.0;  // relative Z vs sigma grad u gap (lattice-weighted L2)
  bool all_pass() const {
    for (const auto& p : points)
      if (!p.pass) return false;
    return true;
  }
};

/// Per point: Monte Carlo Y_s^{s,x} (LSMC, or penalized LSMC with an
/// obstacle) against the interpolated PDE value; pass iff
/// |pde - mc| <= 3 stderr + allowance. Throws before any solve when the
/// two sides disagree on dimensions.
BridgeReport compare_representation(const PDESolution& pde, const BridgeCase& c,
                                    const std::vector<std::pair<double, Vec>>& points, double allowance);

/// Weighted L2 gap between the lattice Z and sigma^T grad u along the
/// chain, relative to the size of Z. Appended to a report by the caller.
double gradient_identity_gap(const MarkovLattice& lat, const BSDESolution& sol, const PDESolution& pde,
                             const DiffusionSpec& spec);

struct CorrespondenceReport {
  double lhs = 0.0;  // Monte Carlo pairing E int xi dR
  double rhs = 0.0;  // quadrature of xi p q
  double stderr_lhs = 0.0;
  double gap = 0.0;
};

/// Measure <-> additive-functional identity for constant coefficients
/// (closed-form transition density), 1D. lhs is a Monte Carlo mean, rhs a
/// space-time quadrature.
CorrespondenceReport verify_measure_correspondence(const DiffusionSpec& spec, const MeasureData& mu,
                                                   const ScalarField& xi, double s, const Vec& x, double T,
                                                   int n_steps, int n_paths, std::uint64_t seed);

struct ControlPairing {
  double lhs = 0.0;  // E int xi dK along the reflected solution
  double rhs = 0.0;  // quadrature of xi r p against the PDE reaction
  double stderr_lhs = 0.0;
  double gap = 0.0;
};

/// Pairing of test functions against the reflected control dK versus the
/// PDE reaction density r (constant coefficients for the closed-form p).
std::vector<ControlPairing> verify_control_measure(const BackwardEngine& engine, const RBSDESolution& rb,
                                                   const PDESolution& pde, const DiffusionSpec& spec,
                                                   const std::vector<ScalarField>& tests, double s,
                                                   const Vec& x);

}  // namespace bsdelab
