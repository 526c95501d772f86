#include "bsdelab/specs.hpp"

#include <cmath>
#include <cstdio>

#include "bsdelab/errors.hpp"

namespace bsdelab {

namespace {

std::string point_tag(double t, const Vec& x) {
  char buf[64];
  std::string s = "t=" + std::to_string(t) + ", x=(";
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.6g", x[i]);
    s += buf;
    if (i + 1 < x.size()) s += ",";
  }
  return s + ")";
}

}  // namespace

Vec DiffusionSpec::div_a_at(double t, const Vec& x) const {
  if (div_a) return (*div_a)(t, x);
  // central differences, step scaled by 1 + |x|
  Vec out(dim, 0.0);
  Vec xp = x, xm = x;
  for (int j = 0; j < dim; ++j) {
    const double h = 1e-5 * (1.0 + std::abs(x[static_cast<std::size_t>(j)]));
    xp[static_cast<std::size_t>(j)] += h;
    xm[static_cast<std::size_t>(j)] -= h;
    const SquareMat ap = a(t, xp);
    const SquareMat am = a(t, xm);
    for (int i = 0; i < dim; ++i) out[static_cast<std::size_t>(i)] += (ap(i, j) - am(i, j)) / (2.0 * h);
    xp[static_cast<std::size_t>(j)] = x[static_cast<std::size_t>(j)];
    xm[static_cast<std::size_t>(j)] = x[static_cast<std::size_t>(j)];
  }
  return out;
}

Vec DiffusionSpec::ito_drift(double t, const Vec& x) const {
  Vec drift = b ? b(t, x) : Vec(dim, 0.0);
  const Vec da = div_a_at(t, x);
  for (int i = 0; i < dim; ++i) drift[static_cast<std::size_t>(i)] += 0.5 * da[static_cast<std::size_t>(i)];
  return drift;
}

SquareMat DiffusionSpec::sigma(double t, const Vec& x) const {
  try {
    return cholesky_lower(a(t, x), {});
  } catch (const SolveError& e) {
    throw SolveError("sigma decomposition failed at " + point_tag(t, x) + ": " + e.what());
  }
}

SquareMat sigma_from_a(const SquareMat& a, const std::string& context) {
  try {
    return cholesky_lower(a, {});
  } catch (const SolveError& e) {
    throw SolveError("sigma decomposition failed (" + context + "): " + e.what());
  }
}

void DiffusionSpec::validate(const std::vector<Vec>& probe_points, double t_lo, double t_hi) const {
  const double times[3] = {t_lo, 0.5 * (t_lo + t_hi), t_hi};
  for (double t : times) {
    for (const Vec& x : probe_points) {
      const SquareMat m = a(t, x);
      for (int i = 0; i < dim; ++i)
        for (int j = i + 1; j < dim; ++j)
          if (std::abs(m(i, j) - m(j, i)) > 1e-10 * (1.0 + std::abs(m(i, j))))
            throw SolveError("diffusion: a not symmetric at " + point_tag(t, x));
      // probe the quadratic form along axes and diagonals
      std::vector<Vec> dirs;
      for (int i = 0; i < dim; ++i) {
        Vec e(dim, 0.0);
        e[static_cast<std::size_t>(i)] = 1.0;
        dirs.push_back(e);
      }
      if (dim == 2) dirs.push_back({std::sqrt(0.5), std::sqrt(0.5)});
      for (const Vec& xi : dirs) {
        const Vec mx = m.apply(xi);
        const double q = dot(xi, mx);
        if (q < lambda_lo - 1e-9 || q > lambda_hi + 1e-9)
          throw SolveError("diffusion: ellipticity bounds violated at " + point_tag(t, x));
      }
      if (b) {
        const Vec bv = b(t, x);
        for (double c : bv)
          if (std::abs(c) > lambda_hi + 1e-9)
            throw SolveError("diffusion: drift bound |b| <= Lambda violated at " + point_tag(t, x));
      }
    }
  }
}

void DriverSpec::validate(const std::vector<std::tuple<double, Vec, double, Vec>>& samples) const {
  for (const auto& [t, x, y, z] : samples) {
    const double fv = f_at(t, x, y, z);
    const double bound = const_K * (std::abs(gamma_at(t, x)) + std::abs(y) + norm2(z));
    if (std::abs(fv) > bound + 1e-9 * (1.0 + bound))
      throw SolveError("driver: growth bound |f| <= K(|gamma|+|y|+|z|) violated");
    const double gv = g_at(t, x, y);
    if (std::abs(gv) > const_M + 1e-9 * (1.0 + const_M))
      throw SolveError("driver: bound |g| <= M violated");
  }
}

MeasureData MeasureData::zero() {
  MeasureData m;
  m.density = [](double, const Vec&) { return 0.0; };
  return m;
}

double pairing_gap(const MeasureData& mu, const std::function<double(double, double)>& eta,
                   const std::function<double(double, double)>& eta_dx, double t_lo, double t_hi,
                   double x_lo, double x_hi, int n_t, int n_x) {
  if (!mu.h_minus_one_pair) throw std::invalid_argument("pairing_gap: no H^-1 pair present");
  const double dt = (t_hi - t_lo) / n_t;
  const double dx = (x_hi - x_lo) / n_x;
  double lhs = 0.0, rhs = 0.0;
  for (int it = 0; it < n_t; ++it) {
    const double t = t_lo + (it + 0.5) * dt;
    for (int ix = 0; ix < n_x; ++ix) {
      const double x = x_lo + (ix + 0.5) * dx;
      const Vec xv{x};
      lhs += mu.q(t, xv) * eta(t, x) * dt * dx;
      rhs += (mu.h_minus_one_pair->f(t, xv) * eta(t, x) +
              mu.h_minus_one_pair->fbar(t, xv)[0] * eta_dx(t, x)) *
             dt * dx;
    }
  }
  return std::abs(lhs - rhs);
}

}  // namespace bsdelab
