#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace bsdelab {

using Vec = std::vector<double>;

/// Small dense square matrix (row-major). Spatial dimension here is 1 or 2,
/// so nothing fancy is needed.
class SquareMat {
 public:
  SquareMat() = default;
  explicit SquareMat(int dim, double fill = 0.0) : dim_(dim), a_(static_cast<std::size_t>(dim) * dim, fill) {}

  static SquareMat identity(int dim) {
    SquareMat m(dim);
    for (int i = 0; i < dim; ++i) m(i, i) = 1.0;
    return m;
  }
  static SquareMat diag(const Vec& d) {
    SquareMat m(static_cast<int>(d.size()));
    for (std::size_t i = 0; i < d.size(); ++i) m(static_cast<int>(i), static_cast<int>(i)) = d[i];
    return m;
  }

  double& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * dim_ + j]; }
  double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * dim_ + j]; }
  int dim() const { return dim_; }

  Vec apply(const Vec& x) const;            // A x
  Vec apply_transposed(const Vec& x) const; // A^T x
  SquareMat multiply_transposed() const;    // A A^T
  double frobenius_norm() const;

 private:
  int dim_ = 0;
  std::vector<double> a_;
};

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
/// Throws SolveError with `context` appended when a pivot is not positive.
SquareMat cholesky_lower(const SquareMat& a, const std::string& context);

/// Solves L y = b for lower-triangular L, then L^T x = y.  Used for small
/// SPD systems (Gaussian densities, regression normal equations).
Vec cholesky_solve(const SquareMat& lower, const Vec& b);

/// Thomas algorithm for a tridiagonal system. `lower`, `diag`, `upper` have
/// sizes n-1, n, n-1. Overwrites nothing; returns the solution.
Vec solve_tridiagonal(const Vec& lower, const Vec& diag, const Vec& upper, const Vec& rhs);

/// Least squares via normal equations with column standardization, reusable
/// across several targets. Columns with (near) zero variance are dropped
/// (they are spanned by the leading constant column); a genuinely
/// rank-deficient design throws SolveError mentioning `context`.
class LeastSquares {
 public:
  LeastSquares(std::vector<Vec> columns, const std::string& context);

  /// L2 projection of `target` onto the column span, evaluated at the
  /// sample points.
  Vec fit(const Vec& target) const;

 private:
  std::vector<Vec> active_;
  SquareMat chol_;
};

/// One-shot convenience wrapper around LeastSquares.
Vec least_squares_fit(const std::vector<Vec>& columns, const Vec& target, const std::string& context);

double dot(const Vec& a, const Vec& b);
double norm2(const Vec& a);

}  // namespace bsdelab
