#include "bsdelab/time_grid.hpp"

#include <stdexcept>

namespace bsdelab {

TimeGrid TimeGrid::uniform(double t0, double T, int n_steps) {
  if (!(T > t0)) throw std::invalid_argument("time grid: horizon must exceed start");
  if (n_steps < 1) throw std::invalid_argument("time grid: need at least one step");
  TimeGrid g;
  g.nodes_.resize(static_cast<std::size_t>(n_steps) + 1);
  const double dt = (T - t0) / n_steps;
  for (int k = 0; k <= n_steps; ++k) g.nodes_[static_cast<std::size_t>(k)] = t0 + k * dt;
  g.nodes_.back() = T;
  return g;
}

TimeGrid TimeGrid::from_nodes(std::vector<double> nodes) {
  if (nodes.size() < 2) throw std::invalid_argument("time grid: need at least two nodes");
  for (std::size_t i = 1; i < nodes.size(); ++i)
    if (!(nodes[i] > nodes[i - 1])) throw std::invalid_argument("time grid: nodes must be strictly increasing");
  TimeGrid g;
  g.nodes_ = std::move(nodes);
  return g;
}

}  // namespace bsdelab
