#include "bsdelab/pde.hpp"

#include <algorithm>
#include <cmath>

#include "bsdelab/bsde.hpp"
#include "bsdelab/errors.hpp"
#include "bsdelab/rbsde.hpp"

namespace bsdelab {

SpaceTimeGrid SpaceTimeGrid::make_1d(const TimeGrid& time, double lo, double hi, int n_nodes) {
  if (n_nodes < 3) throw std::invalid_argument("space grid: need at least three nodes");
  if (!(hi > lo)) throw std::invalid_argument("space grid: empty box");
  SpaceTimeGrid g;
  g.time = time;
  g.dim = 1;
  g.lo = {lo};
  g.hi = {hi};
  g.nx = n_nodes;
  g.ny = 1;
  g.dx = (hi - lo) / (n_nodes - 1);
  g.dy = 0.0;
  return g;
}

SpaceTimeGrid SpaceTimeGrid::make_2d(const TimeGrid& time, const Vec& lo, const Vec& hi, int nx, int ny) {
  if (nx < 3 || ny < 3) throw std::invalid_argument("space grid: need at least three nodes per dimension");
  SpaceTimeGrid g;
  g.time = time;
  g.dim = 2;
  g.lo = lo;
  g.hi = hi;
  g.nx = nx;
  g.ny = ny;
  g.dx = (hi[0] - lo[0]) / (nx - 1);
  g.dy = (hi[1] - lo[1]) / (ny - 1);
  return g;
}

Vec SpaceTimeGrid::node(int i) const {
  if (dim == 1) return {lo[0] + i * dx};
  return {lo[0] + (i % nx) * dx, lo[1] + (i / nx) * dy};
}

bool SpaceTimeGrid::boundary(int i) const {
  if (dim == 1) return i == 0 || i == nx - 1;
  const int ix = i % nx, iy = i / nx;
  return ix == 0 || ix == nx - 1 || iy == 0 || iy == ny - 1;
}

namespace {

// linear stencil of the divergence-form operator at time t:
// (L u)_i = sum over neighbors of coeff * u_neighbor + diag * u_i
struct Stencil1D {
  std::vector<double> lo, di, up;  // interior rows only carry meaning
};

Stencil1D operator_stencil_1d(const SpaceTimeGrid& g, const DiffusionSpec& spec, double t) {
  Stencil1D s;
  const int n = g.nx;
  s.lo.assign(static_cast<std::size_t>(n), 0.0);
  s.di.assign(static_cast<std::size_t>(n), 0.0);
  s.up.assign(static_cast<std::size_t>(n), 0.0);
  const double inv2 = 1.0 / (2.0 * g.dx * g.dx);
  for (int i = 1; i + 1 < n; ++i) {
    const Vec xm{g.lo[0] + (i - 0.5) * g.dx};
    const Vec xp{g.lo[0] + (i + 0.5) * g.dx};
    const Vec xi{g.lo[0] + i * g.dx};
    const double am = spec.a(t, xm)(0, 0);
    const double ap = spec.a(t, xp)(0, 0);
    const double bi = spec.b ? spec.b(t, xi)[0] : 0.0;
    s.lo[static_cast<std::size_t>(i)] = am * inv2 - bi / (2.0 * g.dx);
    s.up[static_cast<std::size_t>(i)] = ap * inv2 + bi / (2.0 * g.dx);
    s.di[static_cast<std::size_t>(i)] = -(am + ap) * inv2;
  }
  return s;
}

struct Stencil2D {
  std::vector<double> xl, xu, yl, yu, di;
};

Stencil2D operator_stencil_2d(const SpaceTimeGrid& g, const DiffusionSpec& spec, double t) {
  Stencil2D s;
  const int n = g.n_nodes();
  s.xl.assign(static_cast<std::size_t>(n), 0.0);
  s.xu.assign(static_cast<std::size_t>(n), 0.0);
  s.yl.assign(static_cast<std::size_t>(n), 0.0);
  s.yu.assign(static_cast<std::size_t>(n), 0.0);
  s.di.assign(static_cast<std::size_t>(n), 0.0);
  const double ivx = 1.0 / (2.0 * g.dx * g.dx);
  const double ivy = 1.0 / (2.0 * g.dy * g.dy);
  for (int i = 0; i < n; ++i) {
    if (g.boundary(i)) continue;
    const Vec xi = g.node(i);
    const SquareMat a0 = spec.a(t, xi);
    if (std::abs(a0(0, 1)) > 1e-12)
      throw std::invalid_argument("pde: 2D solver requires diagonal a");
    Vec xq = xi;
    xq[0] = xi[0] - 0.5 * g.dx;
    const double axm = spec.a(t, xq)(0, 0);
    xq[0] = xi[0] + 0.5 * g.dx;
    const double axp = spec.a(t, xq)(0, 0);
    xq[0] = xi[0];
    xq[1] = xi[1] - 0.5 * g.dy;
    const double aym = spec.a(t, xq)(1, 1);
    xq[1] = xi[1] + 0.5 * g.dy;
    const double ayp = spec.a(t, xq)(1, 1);
    const Vec bv = spec.b ? spec.b(t, xi) : Vec(2, 0.0);
    s.xl[static_cast<std::size_t>(i)] = axm * ivx - bv[0] / (2.0 * g.dx);
    s.xu[static_cast<std::size_t>(i)] = axp * ivx + bv[0] / (2.0 * g.dx);
    s.yl[static_cast<std::size_t>(i)] = aym * ivy - bv[1] / (2.0 * g.dy);
    s.yu[static_cast<std::size_t>(i)] = ayp * ivy + bv[1] / (2.0 * g.dy);
    s.di[static_cast<std::size_t>(i)] = -(axm + axp) * ivx - (aym + ayp) * ivy;
  }
  return s;
}

// sigma^T grad u by central differences at interior node i
void fill_z(const SpaceTimeGrid& g, const DiffusionSpec& spec, double t, const std::vector<double>& u,
            std::vector<Vec>& z) {
  const int n = g.n_nodes();
  z.assign(static_cast<std::size_t>(n), Vec(static_cast<std::size_t>(g.dim), 0.0));
  for (int i = 0; i < n; ++i) {
    if (g.boundary(i)) continue;
    Vec grad(static_cast<std::size_t>(g.dim));
    if (g.dim == 1) {
      grad[0] = (u[static_cast<std::size_t>(i + 1)] - u[static_cast<std::size_t>(i - 1)]) / (2.0 * g.dx);
    } else {
      grad[0] = (u[static_cast<std::size_t>(i + 1)] - u[static_cast<std::size_t>(i - 1)]) / (2.0 * g.dx);
      grad[1] = (u[static_cast<std::size_t>(i + g.nx)] - u[static_cast<std::size_t>(i - g.nx)]) / (2.0 * g.dy);
    }
    z[static_cast<std::size_t>(i)] = spec.sigma(t, g.node(i)).apply_transposed(grad);
  }
}

using GridField = std::function<double(int, int)>;  // (step k, node i)
using GFun = std::function<double(double, const Vec&, double)>;

struct StepProblem {
  const SpaceTimeGrid* grid;
  const DiffusionSpec* spec;
  const DriverSpec* driver;
  GFun g;       // measure coefficient g(t,x,u); null -> no measure term
  GridField q;  // measure density per (k,i); null -> zero
};

// residual of the implicit step at layer k:
//   Res_i = u_i - u_next_i - dt [ (L u)_i + f(t,x,u_i,z_i) + g(t,x,u_i) q_i ]
// (interior nodes; boundary values are held fixed by the caller)
void step_residual(const StepProblem& P, int k, const std::vector<double>& u,
                   const std::vector<double>& u_next, const void* stencil, std::vector<double>& res) {
  const SpaceTimeGrid& g = *P.grid;
  const double t = g.time.node(k);
  const double dt = g.time.dt(k);
  const int n = g.n_nodes();
  std::vector<Vec> z;
  fill_z(g, *P.spec, t, u, z);
  res.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    if (g.boundary(i)) continue;
    double lu;
    if (g.dim == 1) {
      const auto* s = static_cast<const Stencil1D*>(stencil);
      lu = s->lo[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(i - 1)] +
           s->di[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(i)] +
           s->up[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(i + 1)];
    } else {
      const auto* s = static_cast<const Stencil2D*>(stencil);
      lu = s->xl[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(i - 1)] +
           s->xu[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(i + 1)] +
           s->yl[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(i - g.nx)] +
           s->yu[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(i + g.nx)] +
           s->di[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(i)];
    }
    const Vec xi = g.node(i);
    double rhs = lu + P.driver->f_at(t, xi, u[static_cast<std::size_t>(i)], z[static_cast<std::size_t>(i)]);
    if (P.g && P.q) rhs += P.g(t, xi, u[static_cast<std::size_t>(i)]) * P.q(k, i);
    res[static_cast<std::size_t>(i)] = u[static_cast<std::size_t>(i)] - u_next[static_cast<std::size_t>(i)] - dt * rhs;
  }
}

double inf_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// one damped-Newton solve of the implicit step. `init` seeds the iteration
// (maximal-root selection feeds an upper bound here); boundary entries of
// `u` are treated as fixed data.
void newton_step(const StepProblem& P, int k, const std::vector<double>& u_next, std::vector<double>& u) {
  const SpaceTimeGrid& g = *P.grid;
  const double t = g.time.node(k);
  const double dt = g.time.dt(k);
  const int n = g.n_nodes();

  Stencil1D s1;
  Stencil2D s2;
  const void* stencil;
  if (g.dim == 1) {
    s1 = operator_stencil_1d(g, *P.spec, t);
    stencil = &s1;
  } else {
    s2 = operator_stencil_2d(g, *P.spec, t);
    stencil = &s2;
  }

  std::vector<double> res, du;
  step_residual(P, k, u, u_next, stencil, res);
  double rnorm = inf_norm(res);
  const double scale = 1.0 + inf_norm(u);

  for (int newton = 0; newton < 60; ++newton) {
    if (rnorm <= 1e-12 * scale) return;

    // nodewise derivatives of the reaction terms by finite differences
    std::vector<Vec> z;
    fill_z(g, *P.spec, t, u, z);
    std::vector<double> fu(static_cast<std::size_t>(n), 0.0);
    std::vector<Vec> fz(static_cast<std::size_t>(n), Vec(static_cast<std::size_t>(g.dim), 0.0));
    for (int i = 0; i < n; ++i) {
      if (g.boundary(i)) continue;
      const Vec xi = g.node(i);
      const double ui = u[static_cast<std::size_t>(i)];
      const double eps = 1e-7 * (1.0 + std::abs(ui));
      double d = (P.driver->f_at(t, xi, ui + eps, z[static_cast<std::size_t>(i)]) -
                  P.driver->f_at(t, xi, ui - eps, z[static_cast<std::size_t>(i)])) /
                 (2.0 * eps);
      if (P.g && P.q) {
        d += (P.g(t, xi, ui + eps) - P.g(t, xi, ui - eps)) / (2.0 * eps) * P.q(k, i);
      }
      fu[static_cast<std::size_t>(i)] = d;
      for (int c = 0; c < g.dim; ++c) {
        Vec zp = z[static_cast<std::size_t>(i)], zm = z[static_cast<std::size_t>(i)];
        const double ez = 1e-7 * (1.0 + std::abs(zp[static_cast<std::size_t>(c)]));
        zp[static_cast<std::size_t>(c)] += ez;
        zm[static_cast<std::size_t>(c)] -= ez;
        fz[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] =
            (P.driver->f_at(t, xi, ui, zp) - P.driver->f_at(t, xi, ui, zm)) / (2.0 * ez);
      }
    }

    du.assign(static_cast<std::size_t>(n), 0.0);
    if (g.dim == 1) {
      // tridiagonal Jacobian over interior nodes
      const int m = g.nx - 2;
      Vec lo(static_cast<std::size_t>(m - 1), 0.0), di(static_cast<std::size_t>(m), 0.0),
          up(static_cast<std::size_t>(m - 1), 0.0), rhs(static_cast<std::size_t>(m), 0.0);
      for (int r = 0; r < m; ++r) {
        const int i = r + 1;
        const Vec sig = P.spec->sigma(t, g.node(i)).apply_transposed(Vec{1.0});
        const double zcoef = fz[static_cast<std::size_t>(i)][0] * sig[0] / (2.0 * g.dx);
        di[static_cast<std::size_t>(r)] = 1.0 - dt * (s1.di[static_cast<std::size_t>(i)] + fu[static_cast<std::size_t>(i)]);
        if (r > 0) lo[static_cast<std::size_t>(r - 1)] = -dt * (s1.lo[static_cast<std::size_t>(i)] - zcoef);
        if (r + 1 < m) up[static_cast<std::size_t>(r)] = -dt * (s1.up[static_cast<std::size_t>(i)] + zcoef);
        rhs[static_cast<std::size_t>(r)] = res[static_cast<std::size_t>(i)];
      }
      const Vec sol = solve_tridiagonal(lo, di, up, rhs);
      for (int r = 0; r < m; ++r) du[static_cast<std::size_t>(r + 1)] = sol[static_cast<std::size_t>(r)];
    } else {
      // five-band Jacobian solved by SOR
      std::vector<double> diag(static_cast<std::size_t>(n), 1.0);
      for (int i = 0; i < n; ++i)
        if (!g.boundary(i))
          diag[static_cast<std::size_t>(i)] = 1.0 - dt * (s2.di[static_cast<std::size_t>(i)] + fu[static_cast<std::size_t>(i)]);
      const double omega = 1.4;
      for (int sweep = 0; sweep < 4000; ++sweep) {
        double change = 0.0;
        for (int i = 0; i < n; ++i) {
          if (g.boundary(i)) continue;
          double off = -dt * (s2.xl[static_cast<std::size_t>(i)] * du[static_cast<std::size_t>(i - 1)] +
                              s2.xu[static_cast<std::size_t>(i)] * du[static_cast<std::size_t>(i + 1)] +
                              s2.yl[static_cast<std::size_t>(i)] * du[static_cast<std::size_t>(i - g.nx)] +
                              s2.yu[static_cast<std::size_t>(i)] * du[static_cast<std::size_t>(i + g.nx)]);
          const double target = (res[static_cast<std::size_t>(i)] - off) / diag[static_cast<std::size_t>(i)];
          const double upd = du[static_cast<std::size_t>(i)] + omega * (target - du[static_cast<std::size_t>(i)]);
          change = std::max(change, std::abs(upd - du[static_cast<std::size_t>(i)]));
          du[static_cast<std::size_t>(i)] = upd;
        }
        if (change <= 1e-14 * scale) break;
      }
    }

    // damped update
    double step = 1.0;
    std::vector<double> trial(u);
    for (int halve = 0; halve < 30; ++halve) {
      for (int i = 0; i < n; ++i)
        trial[static_cast<std::size_t>(i)] = u[static_cast<std::size_t>(i)] - step * du[static_cast<std::size_t>(i)];
      std::vector<double> rtrial;
      step_residual(P, k, trial, u_next, stencil, rtrial);
      const double rn = inf_norm(rtrial);
      if (rn < rnorm || rn <= 1e-12 * scale) {
        u = trial;
        res = std::move(rtrial);
        rnorm = rn;
        break;
      }
      step *= 0.5;
      if (halve == 29)
        throw SolveError("pde: Newton diverged at time layer " + std::to_string(k) + " (t=" + std::to_string(t) + ")");
    }
  }
  if (rnorm > 1e-10 * scale)
    throw SolveError("pde: Newton stalled at time layer " + std::to_string(k) + " (residual " +
                     std::to_string(rnorm) + ")");
}

// far-field boundary value: the spatially frozen equation
// u = u_next + dt f(t,x,u,0) + dt g(t,x,u) q
double boundary_value(const StepProblem& P, int k, int i, double u_next_i) {
  const SpaceTimeGrid& g = *P.grid;
  const double t = g.time.node(k);
  const double dt = g.time.dt(k);
  const Vec xi = g.node(i);
  const Vec z0(static_cast<std::size_t>(g.dim), 0.0);
  auto rhs = [&](double y) {
    double v = u_next_i + dt * P.driver->f_at(t, xi, y, z0);
    if (P.g && P.q) v += dt * P.g(t, xi, y) * P.q(k, i);
    return v;
  };
  return implicit_node_value(rhs, u_next_i, k, i, t, BackwardOptions{}, nullptr, nullptr);
}

void fill_gradients(PDESolution& sol, const SpaceTimeGrid& g) {
  const int N = g.time.n_steps();
  const int n = g.n_nodes();
  sol.grad.assign(static_cast<std::size_t>(g.dim),
                  Array2D(static_cast<std::size_t>(N) + 1, static_cast<std::size_t>(n), 0.0));
  for (int k = 0; k <= N; ++k) {
    for (int i = 0; i < n; ++i) {
      const int ix = g.dim == 1 ? i : i % g.nx;
      const int iy = g.dim == 1 ? 0 : i / g.nx;
      // x-direction
      if (ix > 0 && ix < g.nx - 1)
        sol.grad[0](k, i) = (sol.u(k, i + 1) - sol.u(k, i - 1)) / (2.0 * g.dx);
      else if (ix == 0)
        sol.grad[0](k, i) = (sol.u(k, i + 1) - sol.u(k, i)) / g.dx;
      else
        sol.grad[0](k, i) = (sol.u(k, i) - sol.u(k, i - 1)) / g.dx;
      if (g.dim == 2) {
        if (iy > 0 && iy < g.ny - 1)
          sol.grad[1](k, i) = (sol.u(k, i + g.nx) - sol.u(k, i - g.nx)) / (2.0 * g.dy);
        else if (iy == 0)
          sol.grad[1](k, i) = (sol.u(k, i + g.nx) - sol.u(k, i)) / g.dy;
        else
          sol.grad[1](k, i) = (sol.u(k, i) - sol.u(k, i - g.nx)) / g.dy;
      }
    }
  }
}

PDESolution run_parabolic(const StepProblem& P) {
  const SpaceTimeGrid& g = *P.grid;
  const int N = g.time.n_steps();
  const int n = g.n_nodes();
  PDESolution sol;
  sol.grid = g;
  sol.u = Array2D(static_cast<std::size_t>(N) + 1, static_cast<std::size_t>(n), 0.0);
  std::vector<double> u(static_cast<std::size_t>(n)), u_next(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    u_next[static_cast<std::size_t>(i)] = P.driver->phi ? P.driver->phi(g.node(i)) : 0.0;
    sol.u(N, i) = u_next[static_cast<std::size_t>(i)];
  }
  for (int k = N - 1; k >= 0; --k) {
    u = u_next;  // warm start
    for (int i = 0; i < n; ++i)
      if (g.boundary(i)) u[static_cast<std::size_t>(i)] = boundary_value(P, k, i, u_next[static_cast<std::size_t>(i)]);
    newton_step(P, k, u_next, u);
    for (int i = 0; i < n; ++i) sol.u(k, i) = u[static_cast<std::size_t>(i)];
    u_next = u;
  }
  fill_gradients(sol, g);
  return sol;
}

// discrete residual of the barrier with the solver's stencils:
// Phi(k,i) = (h_{k+1} - h_k)/dt + (L h_k)_i + f(t, x, h_k, sigma grad h_k)
Array2D barrier_phi_minus(const SpaceTimeGrid& g, const DiffusionSpec& spec, const DriverSpec& driver,
                          const Array2D& h_grid) {
  const int N = g.time.n_steps();
  const int n = g.n_nodes();
  Array2D out(static_cast<std::size_t>(N), static_cast<std::size_t>(n), 0.0);
  std::vector<double> hk(static_cast<std::size_t>(n));
  for (int k = 0; k < N; ++k) {
    const double t = g.time.node(k);
    const double dt = g.time.dt(k);
    for (int i = 0; i < n; ++i) hk[static_cast<std::size_t>(i)] = h_grid(k, i);
    std::vector<Vec> z;
    fill_z(g, spec, t, hk, z);
    Stencil1D s1;
    Stencil2D s2;
    if (g.dim == 1)
      s1 = operator_stencil_1d(g, spec, t);
    else
      s2 = operator_stencil_2d(g, spec, t);
    for (int i = 0; i < n; ++i) {
      if (g.boundary(i)) {
        // far field: spatially frozen residual, matching the boundary ODE
        const double phi = (h_grid(k + 1, i) - h_grid(k, i)) / dt +
                           driver.f_at(t, g.node(i), hk[static_cast<std::size_t>(i)],
                                       Vec(static_cast<std::size_t>(g.dim), 0.0));
        out(k, i) = std::max(-phi, 0.0);
        continue;
      }
      double lh;
      if (g.dim == 1)
        lh = s1.lo[static_cast<std::size_t>(i)] * hk[static_cast<std::size_t>(i - 1)] +
             s1.di[static_cast<std::size_t>(i)] * hk[static_cast<std::size_t>(i)] +
             s1.up[static_cast<std::size_t>(i)] * hk[static_cast<std::size_t>(i + 1)];
      else
        lh = s2.xl[static_cast<std::size_t>(i)] * hk[static_cast<std::size_t>(i - 1)] +
             s2.xu[static_cast<std::size_t>(i)] * hk[static_cast<std::size_t>(i + 1)] +
             s2.yl[static_cast<std::size_t>(i)] * hk[static_cast<std::size_t>(i - g.nx)] +
             s2.yu[static_cast<std::size_t>(i)] * hk[static_cast<std::size_t>(i + g.nx)] +
             s2.di[static_cast<std::size_t>(i)] * hk[static_cast<std::size_t>(i)];
      const double phi = (h_grid(k + 1, i) - h_grid(k, i)) / dt + lh +
                         driver.f_at(t, g.node(i), hk[static_cast<std::size_t>(i)], z[static_cast<std::size_t>(i)]);
      out(k, i) = std::max(-phi, 0.0);
    }
  }
  return out;
}

}  // namespace

PDESolution solve_parabolic_measure(const SpaceTimeGrid& grid, const DiffusionSpec& spec,
                                    const DriverSpec& driver, const MeasureData& mu) {
  StepProblem P{&grid, &spec, &driver, nullptr, nullptr};
  GFun gf;
  GridField qf;
  if (driver.g && mu.density) {
    gf = driver.g;
    qf = [&grid, &mu](int k, int i) { return mu.q(grid.time.node(k), grid.node(i)); };
    P.g = gf;
    P.q = qf;
  }
  return run_parabolic(P);
}

PDESolution solve_obstacle_projected(const SpaceTimeGrid& grid, const DiffusionSpec& spec,
                                     const DriverSpec& driver,
                                     const std::function<double(double, const Vec&)>& h) {
  const int N = grid.time.n_steps();
  const int n = grid.n_nodes();

  PDESolution sol;
  sol.grid = grid;
  sol.u = Array2D(static_cast<std::size_t>(N) + 1, static_cast<std::size_t>(n), 0.0);
  sol.reaction = Array2D(static_cast<std::size_t>(N), static_cast<std::size_t>(n), 0.0);
  sol.h_grid = Array2D(static_cast<std::size_t>(N) + 1, static_cast<std::size_t>(n), 0.0);

  for (int k = 0; k <= N; ++k)
    for (int i = 0; i < n; ++i) sol.h_grid(k, i) = h(grid.time.node(k), grid.node(i));

  std::vector<double> u(static_cast<std::size_t>(n)), u_next(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double phi = driver.phi ? driver.phi(grid.node(i)) : 0.0;
    if (phi < sol.h_grid(N, i) - 1e-9 * (1.0 + std::abs(phi)))
      throw std::invalid_argument("obstacle: terminal condition below the barrier (phi < h(T,.))");
    u_next[static_cast<std::size_t>(i)] = phi;
    sol.u(N, i) = phi;
  }

  StepProblem P{&grid, &spec, &driver, nullptr, nullptr};
  for (int k = N - 1; k >= 0; --k) {
    const double t = grid.time.node(k);
    const double dt = grid.time.dt(k);

    // per-step linear complementarity via projected nonlinear Gauss-Seidel:
    // nodewise max(h, implicit update), swept to convergence, so u = h holds
    // exactly on the contact set and the multiplier is the step residual
    Stencil1D s1;
    Stencil2D s2;
    const void* stencil;
    if (grid.dim == 1) {
      s1 = operator_stencil_1d(grid, spec, t);
      stencil = &s1;
    } else {
      s2 = operator_stencil_2d(grid, spec, t);
      stencil = &s2;
    }
    u = u_next;
    for (int i = 0; i < n; ++i)
      if (grid.boundary(i)) {
        const double free_value = boundary_value(P, k, i, u_next[static_cast<std::size_t>(i)]);
        const double clamped = std::max(free_value, sol.h_grid(k, i));
        u[static_cast<std::size_t>(i)] = clamped;
        sol.reaction(k, i) = (clamped - free_value) / dt;
      }

    std::vector<Vec> z;
    const double omega = 1.3;
    double scale = 1.0 + inf_norm(u_next);
    for (int sweep = 0; sweep < 20000; ++sweep) {
      fill_z(grid, spec, t, u, z);
      double change = 0.0;
      for (int i = 0; i < n; ++i) {
        if (grid.boundary(i)) continue;
        double off, di;
        if (grid.dim == 1) {
          off = s1.lo[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(i - 1)] +
                s1.up[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(i + 1)];
          di = s1.di[static_cast<std::size_t>(i)];
        } else {
          off = s2.xl[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(i - 1)] +
                s2.xu[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(i + 1)] +
                s2.yl[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(i - grid.nx)] +
                s2.yu[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(i + grid.nx)];
          di = s2.di[static_cast<std::size_t>(i)];
        }
        const Vec xi = grid.node(i);
        const double ui = u[static_cast<std::size_t>(i)];
        // f implicit in u_i: linearize around the current iterate
        const double eps = 1e-7 * (1.0 + std::abs(ui));
        const double f0 = driver.f_at(t, xi, ui, z[static_cast<std::size_t>(i)]);
        const double fu = (driver.f_at(t, xi, ui + eps, z[static_cast<std::size_t>(i)]) -
                           driver.f_at(t, xi, ui - eps, z[static_cast<std::size_t>(i)])) /
                          (2.0 * eps);
        const double denom = 1.0 - dt * (di + fu);
        const double target =
            (u_next[static_cast<std::size_t>(i)] + dt * (off + f0 - fu * ui)) / denom;
        double upd = ui + omega * (target - ui);
        upd = std::max(upd, sol.h_grid(k, i));
        change = std::max(change, std::abs(upd - ui));
        u[static_cast<std::size_t>(i)] = upd;
      }
      if (change <= 1e-14 * scale) break;
      if (sweep == 19999)
        throw SolveError("obstacle: projected sweep stalled at time layer " + std::to_string(k));
    }

    // reaction = step residual / dt (nonnegative, zero off contact)
    std::vector<double> res;
    step_residual(P, k, u, u_next, stencil, res);
    for (int i = 0; i < n; ++i) {
      sol.u(k, i) = u[static_cast<std::size_t>(i)];
      if (!grid.boundary(i)) sol.reaction(k, i) = std::max(res[static_cast<std::size_t>(i)] / dt, 0.0);
    }
    u_next = u;
  }

  sol.phi_minus = barrier_phi_minus(grid, spec, driver, sol.h_grid);
  fill_gradients(sol, grid);
  return sol;
}

PDESolution solve_obstacle_homographic(const SpaceTimeGrid& grid, const DiffusionSpec& spec,
                                       const DriverSpec& driver,
                                       const std::function<double(double, const Vec&)>& h,
                                       const std::vector<int>& n_list) {
  if (n_list.empty()) throw std::invalid_argument("homographic pde: empty n list");
  const int N = grid.time.n_steps();
  const int n = grid.n_nodes();

  Array2D h_grid(static_cast<std::size_t>(N) + 1, static_cast<std::size_t>(n), 0.0);
  for (int k = 0; k <= N; ++k)
    for (int i = 0; i < n; ++i) h_grid(k, i) = h(grid.time.node(k), grid.node(i));
  const Array2D phim = barrier_phi_minus(grid, spec, driver, h_grid);

  PDESolution sol;
  sol.grid = grid;
  sol.h_grid = h_grid;
  sol.phi_minus = phim;

  for (std::size_t li = 0; li < n_list.size(); ++li) {
    const int nn = n_list[li];
    const double dn = static_cast<double>(nn);

    // Maximal-root selection per node: the scalar largest-root solver with
    // its bracket starting at the barrier, embedded in Gauss-Seidel sweeps.
    // (Newton seeded from above finds the same root but cannot hold the
    // exact-contact branch over long horizons: a one-ulp undershoot of the
    // barrier grows like exp(c n T).)
    const double lip = driver.const_L.value_or(driver.const_K);
    Array2D un(static_cast<std::size_t>(N) + 1, static_cast<std::size_t>(n), 0.0);
    std::vector<double> u(static_cast<std::size_t>(n)), u_next(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      u_next[static_cast<std::size_t>(i)] = driver.phi ? driver.phi(grid.node(i)) : 0.0;
      un(N, i) = u_next[static_cast<std::size_t>(i)];
    }
    std::vector<Vec> z;
    for (int k = N - 1; k >= 0; --k) {
      const double t = grid.time.node(k);
      const double dt = grid.time.dt(k);
      Stencil1D s1;
      Stencil2D s2;
      if (grid.dim == 1)
        s1 = operator_stencil_1d(grid, spec, t);
      else
        s2 = operator_stencil_2d(grid, spec, t);

      u = u_next;
      for (int i = 0; i < n; ++i) {
        if (!grid.boundary(i)) continue;
        const Vec xb = grid.node(i);
        const Vec z0(static_cast<std::size_t>(grid.dim), 0.0);
        auto fdt = [&](double y) { return dt * driver.f_at(t, xb, y, z0); };
        u[static_cast<std::size_t>(i)] =
            homographic_scalar_root(fdt, u_next[static_cast<std::size_t>(i)], dt * phim(k, i), dn,
                                    h_grid(k, i), lip * dt, k, i, t);
      }

      const double scale = 1.0 + inf_norm(u_next);
      for (int sweep = 0; sweep < 8000; ++sweep) {
        fill_z(grid, spec, t, u, z);
        double change = 0.0;
        for (int i = 0; i < n; ++i) {
          if (grid.boundary(i)) continue;
          double off, di;
          if (grid.dim == 1) {
            off = s1.lo[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(i - 1)] +
                  s1.up[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(i + 1)];
            di = s1.di[static_cast<std::size_t>(i)];
          } else {
            off = s2.xl[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(i - 1)] +
                  s2.xu[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(i + 1)] +
                  s2.yl[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(i - grid.nx)] +
                  s2.yu[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(i + grid.nx)];
            di = s2.di[static_cast<std::size_t>(i)];
          }
          const double denom = 1.0 - dt * di;
          const double cont = (u_next[static_cast<std::size_t>(i)] + dt * off) / denom;
          const Vec xi = grid.node(i);
          const Vec zi = z[static_cast<std::size_t>(i)];
          auto fdt = [&](double y) { return dt * driver.f_at(t, xi, y, zi) / denom; };
          const double upd = homographic_scalar_root(fdt, cont, dt * phim(k, i) / denom, dn, h_grid(k, i),
                                                     lip * dt / denom, k, i, t);
          change = std::max(change, std::abs(upd - u[static_cast<std::size_t>(i)]));
          u[static_cast<std::size_t>(i)] = upd;
        }
        if (change <= 1e-13 * scale) break;
        if (sweep == 7999)
          throw SolveError("homographic pde: sweep stalled at time layer " + std::to_string(k));
      }
      for (int i = 0; i < n; ++i) un(k, i) = u[static_cast<std::size_t>(i)];
      u_next = u;
    }

    PDESolution::HomographicMember member;
    member.n = nn;
    member.mu = Array2D(static_cast<std::size_t>(N), static_cast<std::size_t>(n), 0.0);
    for (int k = 0; k < N; ++k)
      for (int i = 0; i < n; ++i)
        member.mu(k, i) = phim(k, i) / (1.0 + dn * std::abs(un(k, i) - h_grid(k, i)));
    member.u = un;

    if (!sol.mu_n_sequence.empty()) {
      const Array2D& prev = sol.mu_n_sequence.back().u;
      double viol = 0.0;
      for (std::size_t idx = 0; idx < prev.data().size(); ++idx)
        viol = std::max(viol, member.u.data()[idx] - prev.data()[idx]);
      if (viol > 1e-6)
        throw SolveError("homographic pde: iterates not decreasing (violation " + std::to_string(viol) + ")");
    }
    sol.mu_n_sequence.push_back(std::move(member));
  }

  sol.u = sol.mu_n_sequence.back().u;
  sol.reaction = sol.mu_n_sequence.back().mu;
  fill_gradients(sol, grid);
  return sol;
}

double PDESolution::value_at(double t, const Vec& x) const {
  const TimeGrid& tg = grid.time;
  int k = 0;
  while (k + 1 <= tg.n_steps() && tg.node(k + 1) <= t + 1e-14) ++k;
  k = std::min(k, tg.n_steps());

  if (grid.dim == 1) {
    const double pos = (x[0] - grid.lo[0]) / grid.dx;
    const int i = std::clamp(static_cast<int>(std::floor(pos)), 0, grid.nx - 2);
    const double w = std::clamp(pos - i, 0.0, 1.0);
    return (1.0 - w) * u(k, i) + w * u(k, i + 1);
  }
  const double px = std::clamp((x[0] - grid.lo[0]) / grid.dx, 0.0, static_cast<double>(grid.nx - 1));
  const double py = std::clamp((x[1] - grid.lo[1]) / grid.dy, 0.0, static_cast<double>(grid.ny - 1));
  const int ix = std::min(static_cast<int>(px), grid.nx - 2);
  const int iy = std::min(static_cast<int>(py), grid.ny - 2);
  const double wx = px - ix, wy = py - iy;
  const int i00 = iy * grid.nx + ix;
  return (1 - wx) * (1 - wy) * u(k, i00) + wx * (1 - wy) * u(k, i00 + 1) + (1 - wx) * wy * u(k, i00 + grid.nx) +
         wx * wy * u(k, i00 + grid.nx + 1);
}

Vec PDESolution::grad_at(double t, const Vec& x) const {
  const TimeGrid& tg = grid.time;
  int k = 0;
  while (k + 1 <= tg.n_steps() && tg.node(k + 1) <= t + 1e-14) ++k;
  k = std::min(k, tg.n_steps());
  Vec out(static_cast<std::size_t>(grid.dim), 0.0);
  if (grid.dim == 1) {
    const double pos = (x[0] - grid.lo[0]) / grid.dx;
    const int i = std::clamp(static_cast<int>(std::floor(pos)), 0, grid.nx - 2);
    const double w = std::clamp(pos - i, 0.0, 1.0);
    out[0] = (1.0 - w) * grad[0](k, i) + w * grad[0](k, i + 1);
    return out;
  }
  const double px = std::clamp((x[0] - grid.lo[0]) / grid.dx, 0.0, static_cast<double>(grid.nx - 1));
  const double py = std::clamp((x[1] - grid.lo[1]) / grid.dy, 0.0, static_cast<double>(grid.ny - 1));
  const int ix = std::min(static_cast<int>(px), grid.nx - 2);
  const int iy = std::min(static_cast<int>(py), grid.ny - 2);
  const double wx = px - ix, wy = py - iy;
  const int i00 = iy * grid.nx + ix;
  for (int c = 0; c < 2; ++c)
    out[static_cast<std::size_t>(c)] = (1 - wx) * (1 - wy) * grad[static_cast<std::size_t>(c)](k, i00) +
                                       wx * (1 - wy) * grad[static_cast<std::size_t>(c)](k, i00 + 1) +
                                       (1 - wx) * wy * grad[static_cast<std::size_t>(c)](k, i00 + grid.nx) +
                                       wx * wy * grad[static_cast<std::size_t>(c)](k, i00 + grid.nx + 1);
  return out;
}

ReactionDensityReport recover_reaction_density(const PDESolution& sol, double eps_contact, double density_tol) {
  if (sol.reaction.empty() || sol.phi_minus.empty())
    throw std::invalid_argument("recover_reaction_density: obstacle-mode solution required");
  ReactionDensityReport rep;
  const std::size_t N = sol.reaction.rows();
  const std::size_t n = sol.reaction.cols();
  rep.alpha_hat = Array2D(N, n, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t k = 0; k < N; ++k)
    for (std::size_t i = 0; i < n; ++i) {
      const double denom = sol.phi_minus(k, i);
      if (denom <= density_tol) continue;
      const double a = sol.reaction(k, i) / denom;
      rep.alpha_hat(k, i) = a;
      ++rep.defined_nodes;
      if (a < -1e-6 || a > 1.0 + 1e-6) ++rep.range_violations;
      if (std::abs(sol.u(k, i) - sol.h_grid(k, i)) > eps_contact)
        rep.max_off_contact = std::max(rep.max_off_contact, std::abs(a));
    }
  return rep;
}

PdeLsReport check_pde_lewy_stampacchia(const PDESolution& sol, const DiffusionSpec& spec,
                                       const DriverSpec& driver, double eps_contact, double tol) {
  if (sol.h_grid.empty()) throw std::invalid_argument("pde lewy-stampacchia: obstacle-mode solution required");
  // the bound needs a symmetric operator
  const SpaceTimeGrid& g = sol.grid;
  if (spec.b) {
    for (int i = 0; i < g.n_nodes(); i += std::max(1, g.n_nodes() / 16)) {
      const Vec bv = spec.b(g.time.t0(), g.node(i));
      for (double c : bv)
        if (std::abs(c) > 1e-14) throw std::invalid_argument("pde lewy-stampacchia: requires b = 0");
    }
  }

  PdeLsReport rep;
  const int N = g.time.n_steps();
  const int n = g.n_nodes();
  std::vector<double> uk(static_cast<std::size_t>(n)), un(static_cast<std::size_t>(n)), res;
  StepProblem P{&g, &spec, &driver, nullptr, nullptr};
  for (int k = 0; k < N; ++k) {
    const double t = g.time.node(k);
    const double dt = g.time.dt(k);
    for (int i = 0; i < n; ++i) {
      uk[static_cast<std::size_t>(i)] = sol.u(k, i);
      un[static_cast<std::size_t>(i)] = sol.u(k + 1, i);
    }
    Stencil1D s1;
    Stencil2D s2;
    const void* st;
    if (g.dim == 1) {
      s1 = operator_stencil_1d(g, spec, t);
      st = &s1;
    } else {
      s2 = operator_stencil_2d(g, spec, t);
      st = &s2;
    }
    step_residual(P, k, uk, un, st, res);
    for (int i = 0; i < n; ++i) {
      if (g.boundary(i)) continue;
      const double reaction = res[static_cast<std::size_t>(i)] / dt;  // -(D_t u + L u + f_u)
      const bool contact = std::abs(sol.u(k, i) - sol.h_grid(k, i)) <= eps_contact;
      const double upper = (contact ? sol.phi_minus(k, i) : 0.0) + tol;
      ++rep.nodes_checked;
      if (reaction < -tol) {
        ++rep.violations;
        rep.max_lower_excess = std::max(rep.max_lower_excess, -reaction - tol);
      } else if (reaction > upper) {
        ++rep.violations;
        rep.max_upper_excess = std::max(rep.max_upper_excess, reaction - upper);
      }
    }
  }
  return rep;
}

double l2_rho_norm(const SpaceTimeGrid& grid, const Array2D& field, const WeightSpec& w) {
  double acc = 0.0;
  const double cell = (grid.dim == 1 ? grid.dx : grid.dx * grid.dy);
  for (std::size_t k = 0; k < field.rows(); ++k) {
    const double dt = k < static_cast<std::size_t>(grid.time.n_steps())
                          ? grid.time.dt(static_cast<int>(k))
                          : grid.time.dt(grid.time.n_steps() - 1);
    for (std::size_t i = 0; i < field.cols(); ++i) {
      const double r = weight_eval(w, grid.node(static_cast<int>(i)));
      acc += field(k, i) * field(k, i) * r * r * cell * dt;
    }
  }
  return std::sqrt(acc);
}

double l2_rho_norm_layer(const SpaceTimeGrid& grid, const Array2D& field, int layer, const WeightSpec& w) {
  double acc = 0.0;
  const double cell = (grid.dim == 1 ? grid.dx : grid.dx * grid.dy);
  for (std::size_t i = 0; i < field.cols(); ++i) {
    const double r = weight_eval(w, grid.node(static_cast<int>(i)));
    acc += field(layer, i) * field(layer, i) * r * r * cell;
  }
  return std::sqrt(acc);
}

}  // namespace bsdelab
