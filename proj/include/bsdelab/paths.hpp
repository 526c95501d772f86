#pragma once

#include <cstdint>
#include <string>

#include "bsdelab/array2d.hpp"
#include "bsdelab/specs.hpp"
#include "bsdelab/time_grid.hpp"

namespace bsdelab {

/// Euler-Maruyama sample of the diffusion together with the Brownian
/// increments that generated it. Storage is per coordinate: x[c](p, k) is
/// coordinate c of path p at time node k; db[c](p, k) the increment over
/// step k. Identical (seed, grid, spec, start, n_paths) reproduce the
/// bundle bit for bit.
struct PathBundle {
  TimeGrid grid;
  double start_time = 0.0;
  Vec start_x;
  int n_paths = 0;
  int dim = 1;
  std::uint64_t seed = 0;
  std::vector<Array2D> x;   // dim entries, (n_paths) x (N+1)
  std::vector<Array2D> db;  // dim entries, (n_paths) x N

  Vec state(int p, int k) const {
    Vec v(static_cast<std::size_t>(dim));
    for (int c = 0; c < dim; ++c) v[static_cast<std::size_t>(c)] = x[static_cast<std::size_t>(c)](p, k);
    return v;
  }
  Vec increment(int p, int k) const {
    Vec v(static_cast<std::size_t>(dim));
    for (int c = 0; c < dim; ++c) v[static_cast<std::size_t>(c)] = db[static_cast<std::size_t>(c)](p, k);
    return v;
  }
};

/// Simulates X_{k+1} = X_k + (b + 1/2 div a) dt + sigma dB on the grid.
/// `jobs` only partitions the work; per-path RNG streams make the result
/// independent of the partitioning.
PathBundle simulate_paths(const DiffusionSpec& spec, const TimeGrid& grid, double s, const Vec& x0,
                          int n_paths, std::uint64_t seed, int jobs = 1);

/// Additive functional R accumulated along paths: R(p, k) is nondecreasing
/// in k with R(p, 0) = 0.
struct FunctionalPath {
  Array2D r;  // (n_paths) x (N+1)
};

/// Left-point quadrature of the measure density along each path:
/// R_k = sum_{j<k} q(tau_j, X_j) dt. Throws on a negative density sample.
FunctionalPath accumulate_functional(const PathBundle& paths, const MeasureData& mu);

/// Flat binary export: fixed header (version, dim, counts, seed, horizon)
/// followed by row-major float64 blocks for X and dB.
void write_paths_binary(const PathBundle& paths, const std::string& filename);
PathBundle read_paths_binary(const std::string& filename);

/// CSV export for small runs: one row per (path, node).
void write_paths_csv(const PathBundle& paths, const std::string& filename);

}  // namespace bsdelab
