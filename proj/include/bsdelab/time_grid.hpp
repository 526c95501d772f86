#pragma once

#include <vector>

namespace bsdelab {

/// Partition t0 = tau_0 < ... < tau_N = T of the backward horizon.
/// Uniform unless built from explicit nodes.
class TimeGrid {
 public:
  TimeGrid() = default;

  static TimeGrid uniform(double t0, double T, int n_steps);
  static TimeGrid from_nodes(std::vector<double> nodes);

  double t0() const { return nodes_.front(); }
  double horizon() const { return nodes_.back(); }
  int n_steps() const { return static_cast<int>(nodes_.size()) - 1; }
  double node(int k) const { return nodes_[static_cast<std::size_t>(k)]; }
  double dt(int k) const { return nodes_[static_cast<std::size_t>(k) + 1] - nodes_[static_cast<std::size_t>(k)]; }
  const std::vector<double>& nodes() const { return nodes_; }

 private:
  std::vector<double> nodes_;
};

}  // namespace bsdelab
