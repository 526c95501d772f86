#include "bsdelab/gaussian.hpp"

#include <cmath>
#include <stdexcept>

namespace bsdelab {

double gaussian_density(double s, const Vec& x, double t, const Vec& y, const SquareMat& a, const Vec& b) {
  if (!(t > s)) throw std::invalid_argument("gaussian_density: requires t > s");
  const int d = a.dim();
  const double tau = t - s;
  SquareMat cov(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) cov(i, j) = a(i, j) * tau;
  const SquareMat l = cholesky_lower(cov, "gaussian covariance");
  Vec r(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i)
    r[static_cast<std::size_t>(i)] =
        y[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(i)] * tau;
  // solve L w = r; |w|^2 = r^T cov^{-1} r
  Vec w(static_cast<std::size_t>(d));
  double logdet = 0.0;
  for (int i = 0; i < d; ++i) {
    double sum = r[static_cast<std::size_t>(i)];
    for (int k = 0; k < i; ++k) sum -= l(i, k) * w[static_cast<std::size_t>(k)];
    w[static_cast<std::size_t>(i)] = sum / l(i, i);
    logdet += 2.0 * std::log(l(i, i));
  }
  const double q = dot(w, w);
  const double log2pi = 1.8378770664093454835606594728112;
  return std::exp(-0.5 * (q + logdet + d * log2pi));
}

double gaussian_density(double s, const Vec& x, double t, const Vec& y, const DiffusionSpec& spec) {
  const SquareMat a = spec.a(s, x);
  const Vec b = spec.b ? spec.b(s, x) : Vec(static_cast<std::size_t>(spec.dim), 0.0);
  return gaussian_density(s, x, t, y, a, b);
}

}  // namespace bsdelab
