#include "bsdelab/inf_convolution.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bsdelab {

double inf_convolution(const std::function<double(const Vec&)>& f, int n, const std::vector<Vec>& grid,
                       const Vec& query) {
  if (grid.empty()) throw std::invalid_argument("inf_convolution: empty grid");
  double best = std::numeric_limits<double>::infinity();
  for (const Vec& y : grid) {
    double dist = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double d = query[i] - y[i];
      dist += d * d;
    }
    best = std::min(best, f(y) + n * std::sqrt(dist));
  }
  return best;
}

InfConvolution1D::InfConvolution1D(const std::function<double(double)>& f, int n, double lo, double hi,
                                   int n_points)
    : n_(n), lo_(lo), hi_(hi) {
  if (n_points < 2) throw std::invalid_argument("inf_convolution: need at least two grid points");
  if (!(hi > lo)) throw std::invalid_argument("inf_convolution: empty interval");
  dx_ = (hi - lo) / (n_points - 1);
  std::vector<double> fv(static_cast<std::size_t>(n_points));
  for (int i = 0; i < n_points; ++i) fv[static_cast<std::size_t>(i)] = f(lo + i * dx_);

  from_left_.resize(fv.size());
  from_right_.resize(fv.size());
  const double step = n_ * dx_;
  double run = fv[0];
  from_left_[0] = run;
  for (std::size_t i = 1; i < fv.size(); ++i) {
    run = std::min(run + step, fv[i]);
    from_left_[i] = run;
  }
  run = fv.back();
  from_right_.back() = run;
  for (std::size_t i = fv.size() - 1; i-- > 0;) {
    run = std::min(run + step, fv[i]);
    from_right_[i] = run;
  }
}

double InfConvolution1D::operator()(double query) const {
  // exact minimum over grid points: split candidates at the bracketing node
  const double pos = (query - lo_) / dx_;
  const auto last = static_cast<long>(from_left_.size()) - 1;
  long i = static_cast<long>(std::floor(pos));
  i = std::max(-1L, std::min(i, last));
  double best = std::numeric_limits<double>::infinity();
  if (i >= 0) {
    const double yi = lo_ + static_cast<double>(i) * dx_;
    best = std::min(best, from_left_[static_cast<std::size_t>(i)] + n_ * std::abs(query - yi));
  }
  if (i + 1 <= last) {
    const double yj = lo_ + static_cast<double>(i + 1) * dx_;
    best = std::min(best, from_right_[static_cast<std::size_t>(i + 1)] + n_ * std::abs(yj - query));
  }
  return best;
}

InfConvolution1D make_lipschitz_approximant(const std::function<double(double)>& f, int n, double lo, double hi) {
  const double target = 1.0 / (4.0 * static_cast<double>(n) * n);
  const int min_points = 257;
  int n_points = static_cast<int>(std::ceil((hi - lo) / target)) + 1;
  n_points = std::max(n_points, min_points);
  // cap the table so very large n stays affordable; still far below 1/n^2
  // spacing for every n used by the schedules
  n_points = std::min(n_points, 4'000'001);
  return InfConvolution1D(f, n, lo, hi, n_points);
}

}  // namespace bsdelab
