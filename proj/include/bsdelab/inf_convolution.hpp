#pragma once

#include <functional>
#include <vector>

#include "bsdelab/linalg.hpp"

namespace bsdelab {

/// min over grid points y of f(y) + n|query - y|. The countable infimum of
/// the Lipschitz-regularization is replaced by a finite grid; spacing
/// <= 1/n^2 keeps the extra error below the scheme's own 1/n scale.
/// Throws std::invalid_argument on an empty grid.
double inf_convolution(const std::function<double(const Vec&)>& f, int n, const std::vector<Vec>& grid,
                       const Vec& query);

/// 1D fast evaluator: precomputes the two directional sweeps on a uniform
/// grid so that queries cost O(1) and agree exactly with the brute-force
/// minimum over the same grid points.
class InfConvolution1D {
 public:
  InfConvolution1D(const std::function<double(double)>& f, int n, double lo, double hi, int n_points);

  double operator()(double query) const;

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  double spacing() const { return dx_; }

 private:
  int n_;
  double lo_, hi_, dx_;
  std::vector<double> from_left_;   // min_{j<=i} f(y_j) + n (y_i - y_j)
  std::vector<double> from_right_;  // min_{j>=i} f(y_j) + n (y_j - y_i)
};

/// Grid sized for the approximation parameter n: uniform spacing
/// min(1/(4 n^2), (hi-lo)/min_points) over [lo, hi].
InfConvolution1D make_lipschitz_approximant(const std::function<double(double)>& f, int n, double lo, double hi);

}  // namespace bsdelab
