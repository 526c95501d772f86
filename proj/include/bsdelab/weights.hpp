#pragma once

#include <cmath>
#include <stdexcept>

#include "bsdelab/linalg.hpp"

namespace bsdelab {

/// Radial weight rho(x) = (1 + |x|^2)^(-alpha) used for whole-space L2
/// norms. alpha = 0 gives the unweighted norm.
struct WeightSpec {
  double alpha = 0.0;

  explicit WeightSpec(double a = 0.0) : alpha(a) {
    if (a < 0.0) throw std::invalid_argument("weight exponent must be nonnegative");
  }
};

inline double weight_eval(const WeightSpec& w, const Vec& x) {
  double r2 = 0.0;
  for (double v : x) r2 += v * v;
  return std::pow(1.0 + r2, -w.alpha);
}

inline double weight_eval(const WeightSpec& w, double x) {
  return std::pow(1.0 + x * x, -w.alpha);
}

}  // namespace bsdelab
