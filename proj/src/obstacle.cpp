#include "bsdelab/obstacle.hpp"

#include <cmath>

#include "bsdelab/errors.hpp"

namespace bsdelab {

namespace {

struct BarrierDerivatives {
  double dt;
  Vec grad;
  SquareMat hess;
};

BarrierDerivatives differentiate(const std::function<double(double, const Vec&)>& h, double t, const Vec& x,
                                 double space_step) {
  const int d = static_cast<int>(x.size());
  BarrierDerivatives out;
  out.grad.assign(static_cast<std::size_t>(d), 0.0);
  out.hess = SquareMat(d);

  const double ht = 1e-6 * (1.0 + std::abs(t));
  out.dt = (h(t + ht, x) - h(t - ht, x)) / (2.0 * ht);

  Vec xp = x, xm = x;
  const double h0 = h(t, x);
  for (int c = 0; c < d; ++c) {
    const double hx = space_step > 0.0 ? space_step : 1e-5 * (1.0 + std::abs(x[static_cast<std::size_t>(c)]));
    xp[static_cast<std::size_t>(c)] += hx;
    xm[static_cast<std::size_t>(c)] -= hx;
    const double vp = h(t, xp), vm = h(t, xm);
    out.grad[static_cast<std::size_t>(c)] = (vp - vm) / (2.0 * hx);
    out.hess(c, c) = (vp - 2.0 * h0 + vm) / (hx * hx);
    xp[static_cast<std::size_t>(c)] = x[static_cast<std::size_t>(c)];
    xm[static_cast<std::size_t>(c)] = x[static_cast<std::size_t>(c)];
  }
  if (d == 2) {
    const double hx0 = space_step > 0.0 ? space_step : 1e-5 * (1.0 + std::abs(x[0]));
    const double hx1 = space_step > 0.0 ? space_step : 1e-5 * (1.0 + std::abs(x[1]));
    Vec q = x;
    q[0] = x[0] + hx0; q[1] = x[1] + hx1; const double pp = h(t, q);
    q[1] = x[1] - hx1; const double pm = h(t, q);
    q[0] = x[0] - hx0; const double mm = h(t, q);
    q[1] = x[1] + hx1; const double mp = h(t, q);
    const double cross = (pp - pm - mp + mm) / (4.0 * hx0 * hx1);
    out.hess(0, 1) = cross;
    out.hess(1, 0) = cross;
  }
  if (!std::isfinite(out.dt)) throw SolveError("decompose_obstacle: time derivative not evaluable");
  for (double v : out.grad)
    if (!std::isfinite(v)) throw SolveError("decompose_obstacle: gradient not evaluable");
  return out;
}

}  // namespace

ObstacleSpec decompose_obstacle(const std::function<double(double, const Vec&)>& h, const DriverSpec& driver,
                                const DiffusionSpec& spec, const TimeGrid& grid, double space_step) {
  (void)grid;
  ObstacleSpec out;
  out.h = h;

  // Phi(t,x) = dh/dt + 1/2 sum a_ij d2_ij h + 1/2 (div a) . grad h
  //          + b . grad h + f(t, x, h, sigma^T grad h)
  auto residual = [h, driver, spec, space_step](double t, const Vec& x) {
    const BarrierDerivatives der = differentiate(h, t, x, space_step);
    const SquareMat a = spec.a(t, x);
    const Vec diva = spec.div_a_at(t, x);
    const Vec bv = spec.b ? spec.b(t, x) : Vec(static_cast<std::size_t>(spec.dim), 0.0);
    double lh = 0.0;
    for (int i = 0; i < spec.dim; ++i) {
      for (int j = 0; j < spec.dim; ++j) lh += 0.5 * a(i, j) * der.hess(i, j);
      lh += (0.5 * diva[static_cast<std::size_t>(i)] + bv[static_cast<std::size_t>(i)]) * der.grad[static_cast<std::size_t>(i)];
    }
    const SquareMat sig = spec.sigma(t, x);
    const Vec zt = sig.apply_transposed(der.grad);
    return der.dt + lh + driver.f_at(t, x, h(t, x), zt);
  };

  out.phi_residual = residual;
  out.c_density = [residual](double t, const Vec& x) { return std::max(residual(t, x), 0.0); };
  out.r_density = [residual](double t, const Vec& x) { return std::max(-residual(t, x), 0.0); };
  out.ztilde = [h, spec, space_step](double t, const Vec& x) {
    const BarrierDerivatives der = differentiate(h, t, x, space_step);
    return spec.sigma(t, x).apply_transposed(der.grad);
  };
  return out;
}

}  // namespace bsdelab
