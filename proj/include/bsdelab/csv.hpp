#pragma once

#include <string>
#include <vector>

#include "bsdelab/bridge.hpp"
#include "bsdelab/bsde.hpp"
#include "bsdelab/pde.hpp"
#include "bsdelab/rbsde.hpp"

namespace bsdelab {

/// All writers format doubles with %.17g, so identical inputs produce
/// byte-identical files.
std::string format_double(double v);

void write_bsde_csv(const std::string& filename, const BackwardEngine& engine, const BSDESolution& sol,
                    int max_states = 0);
void write_rbsde_csv(const std::string& filename, const BackwardEngine& engine, const RBSDESolution& sol,
                     int max_states = 0);
void write_pde_csv(const std::string& filename, const PDESolution& sol);

struct PdeConvergenceRow {
  int n = 0;
  double sup_gap = 0.0;
  double l2_rho_gap = 0.0;
  double mu_mass = 0.0;
};
void write_pde_convergence_csv(const std::string& filename, const std::vector<PdeConvergenceRow>& rows);

void write_homographic_csv(const std::string& filename, const HomographicSequenceReport& rep);
void write_bridge_csv(const std::string& filename, const BridgeReport& rep);

/// Flat binary layout shared with the path bundles: fixed header, then
/// row-major float64 blocks (Y, then the Z planes).
void write_solution_binary(const std::string& filename, const BSDESolution& sol);
BSDESolution read_solution_binary(const std::string& filename);

}  // namespace bsdelab
