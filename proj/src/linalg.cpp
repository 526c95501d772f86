#include "bsdelab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bsdelab/errors.hpp"

namespace bsdelab {

Vec SquareMat::apply(const Vec& x) const {
  Vec y(dim_, 0.0);
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j < dim_; ++j) y[i] += (*this)(i, j) * x[j];
  return y;
}

Vec SquareMat::apply_transposed(const Vec& x) const {
  Vec y(dim_, 0.0);
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j < dim_; ++j) y[i] += (*this)(j, i) * x[j];
  return y;
}

SquareMat SquareMat::multiply_transposed() const {
  SquareMat r(dim_);
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j < dim_; ++j) {
      double s = 0.0;
      for (int k = 0; k < dim_; ++k) s += (*this)(i, k) * (*this)(j, k);
      r(i, j) = s;
    }
  return r;
}

double SquareMat::frobenius_norm() const {
  double s = 0.0;
  for (double v : a_) s += v * v;
  return std::sqrt(s);
}

SquareMat cholesky_lower(const SquareMat& a, const std::string& context) {
  const int n = a.dim();
  SquareMat l(n);
  for (int j = 0; j < n; ++j) {
    double d = a(j, j);
    for (int k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0)) {
      throw SolveError("cholesky: matrix not positive definite at pivot " + std::to_string(j) +
                       (context.empty() ? "" : " (" + context + ")"));
    }
    l(j, j) = std::sqrt(d);
    for (int i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return l;
}

Vec cholesky_solve(const SquareMat& lower, const Vec& b) {
  const int n = lower.dim();
  Vec y(n), x(n);
  for (int i = 0; i < n; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= lower(i, k) * y[k];
    y[i] = s / lower(i, i);
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = y[i];
    for (int k = i + 1; k < n; ++k) s -= lower(k, i) * x[k];
    x[i] = s / lower(i, i);
  }
  return x;
}

Vec solve_tridiagonal(const Vec& lower, const Vec& diag, const Vec& upper, const Vec& rhs) {
  const std::size_t n = diag.size();
  Vec c(n, 0.0), d(n, 0.0), x(n, 0.0);
  if (diag[0] == 0.0) throw SolveError("tridiagonal: zero pivot at row 0");
  c[0] = n > 1 ? upper[0] / diag[0] : 0.0;
  d[0] = rhs[0] / diag[0];
  for (std::size_t i = 1; i < n; ++i) {
    const double m = diag[i] - lower[i - 1] * c[i - 1];
    if (m == 0.0) throw SolveError("tridiagonal: zero pivot at row " + std::to_string(i));
    if (i + 1 < n) c[i] = upper[i] / m;
    d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / m;
  }
  x[n - 1] = d[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) x[i] = d[i] - c[i] * x[i + 1];
  return x;
}

LeastSquares::LeastSquares(std::vector<Vec> columns, const std::string& context) {
  if (columns.empty() || columns[0].empty()) throw SolveError("least squares: empty design (" + context + ")");
  const std::size_t m = columns[0].size();
  for (std::size_t ci = 0; ci < columns.size(); ++ci) {
    Vec& c = columns[ci];
    const double mean = std::accumulate(c.begin(), c.end(), 0.0) / static_cast<double>(m);
    double var = 0.0;
    for (double v : c) var += (v - mean) * (v - mean);
    var /= static_cast<double>(m);
    const double sd = std::sqrt(var);
    if (ci == 0) {
      active_.push_back(std::move(c));  // leading (constant) column kept as-is
    } else if (sd < 1e-13 * (1.0 + std::abs(mean))) {
      // degenerate column, spanned by the constant; drop it
    } else {
      for (std::size_t i = 0; i < m; ++i) c[i] = (c[i] - mean) / sd;
      active_.push_back(std::move(c));
    }
  }

  const std::size_t p = active_.size();
  SquareMat gram(static_cast<int>(p));
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i; j < p; ++j) {
      const double g = dot(active_[i], active_[j]);
      gram(static_cast<int>(i), static_cast<int>(j)) = g;
      gram(static_cast<int>(j), static_cast<int>(i)) = g;
    }
  // tiny ridge on the standardized system keeps well-posed problems stable;
  // collinearity is still detected through the pivot sizes below
  for (std::size_t i = 0; i < p; ++i) gram(static_cast<int>(i), static_cast<int>(i)) += 1e-10 * static_cast<double>(m);
  try {
    chol_ = cholesky_lower(gram, context);
  } catch (const SolveError&) {
    throw SolveError("rank-deficient regression: " + context);
  }
  // standardized columns have squared norm m, so a pivot far below sqrt(m)
  // signals a (near) linearly dependent design
  for (std::size_t i = 0; i < p; ++i) {
    const double pivot = chol_(static_cast<int>(i), static_cast<int>(i));
    if (pivot * pivot < 1e-8 * static_cast<double>(m))
      throw SolveError("rank-deficient regression: " + context);
  }
}

Vec LeastSquares::fit(const Vec& target) const {
  const std::size_t p = active_.size();
  const std::size_t m = target.size();
  Vec rhs(p, 0.0);
  for (std::size_t i = 0; i < p; ++i) rhs[i] = dot(active_[i], target);
  const Vec beta = cholesky_solve(chol_, rhs);
  Vec fitted(m, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    const double bj = beta[j];
    const Vec& col = active_[j];
    for (std::size_t i = 0; i < m; ++i) fitted[i] += bj * col[i];
  }
  return fitted;
}

Vec least_squares_fit(const std::vector<Vec>& columns, const Vec& target, const std::string& context) {
  return LeastSquares(columns, context).fit(target);
}

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

}  // namespace bsdelab
