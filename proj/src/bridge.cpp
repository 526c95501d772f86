#include "bsdelab/bridge.hpp"

#include <cmath>

#include "bsdelab/errors.hpp"
#include "bsdelab/gaussian.hpp"
#include "bsdelab/obstacle.hpp"

namespace bsdelab {

namespace {

void require_constant_coefficients(const DiffusionSpec& spec, double t0, double T, const Vec& x0) {
  const SquareMat a0 = spec.a(t0, x0);
  const Vec b0 = spec.b ? spec.b(t0, x0) : Vec(static_cast<std::size_t>(spec.dim), 0.0);
  Vec probe = x0;
  for (double t : {t0, 0.5 * (t0 + T), T})
    for (double shift : {-1.7, 0.0, 2.3}) {
      for (double& c : probe) c += shift;
      const SquareMat a1 = spec.a(t, probe);
      const Vec b1 = spec.b ? spec.b(t, probe) : Vec(static_cast<std::size_t>(spec.dim), 0.0);
      for (int i = 0; i < spec.dim; ++i) {
        for (int j = 0; j < spec.dim; ++j)
          if (std::abs(a1(i, j) - a0(i, j)) > 1e-12)
            throw std::invalid_argument("bridge: constant coefficients required (closed-form density)");
        if (std::abs(b1[static_cast<std::size_t>(i)] - b0[static_cast<std::size_t>(i)]) > 1e-12)
          throw std::invalid_argument("bridge: constant coefficients required (closed-form density)");
      }
      for (double& c : probe) c -= shift;
    }
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double stderr_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / (static_cast<double>(v.size() - 1) * static_cast<double>(v.size())));
}

}  // namespace

BridgeReport compare_representation(const PDESolution& pde, const BridgeCase& c,
                                    const std::vector<std::pair<double, Vec>>& points, double allowance) {
  if (pde.grid.dim != c.spec.dim)
    throw std::invalid_argument("bridge: PDE grid dimension does not match the diffusion");
  const double T = pde.grid.time.horizon();

  BridgeReport rep;
  for (const auto& [s, x] : points) {
    if (static_cast<int>(x.size()) != c.spec.dim)
      throw std::invalid_argument("bridge: probe point dimension mismatch");
    const int steps = std::max(4, static_cast<int>(std::lround(c.n_steps * (T - s) / (T - pde.grid.time.t0()))));
    const TimeGrid grid = TimeGrid::uniform(s, T, steps);
    const PathBundle paths = simulate_paths(c.spec, grid, s, x, c.n_paths, c.seed, c.jobs);

    BridgePoint bp;
    bp.s = s;
    bp.x = x;
    bp.pde_value = pde.value_at(s, x);
    if (!c.obstacle_h) {
      const FunctionalPath r = accumulate_functional(paths, c.mu);
      const BSDESolution sol = solve_gbsde_lsmc(paths, r, c.driver, c.basis_order);
      bp.mc_value = sol.y0();
      bp.mc_stderr = sol.y0_stderr();
    } else {
      // the barrier itself joins the regression basis; global polynomials
      // alone fit its kink poorly
      PathEngine engine(paths, c.basis_order, {c.obstacle_h});
      ObstacleSpec obs = decompose_obstacle(c.obstacle_h, c.driver, c.spec, grid, pde.grid.dx);
      const RBSDESolution sol = solve_rbsde_penalization(engine, c.driver, obs, c.penalization_schedule);
      bp.mc_value = sol.y0();
      bp.mc_stderr = sol.y0_stderr();
    }
    bp.gap = std::abs(bp.pde_value - bp.mc_value);
    bp.pass = bp.gap <= 3.0 * bp.mc_stderr + allowance;
    rep.points.push_back(std::move(bp));
  }
  return rep;
}

double gradient_identity_gap(const MarkovLattice& lat, const BSDESolution& sol, const PDESolution& pde,
                             const DiffusionSpec& spec) {
  const TimeGrid& grid = lat.grid();
  const int N = grid.n_steps();
  const int m = lat.n_nodes();
  const Array2D w = lat.marginals(sol.start_index);
  double num = 0.0, den = 0.0;
  for (int k = 0; k < N; ++k) {
    const double t = grid.node(k);
    const double dt = grid.dt(k);
    for (int i = 0; i < m; ++i) {
      const double wi = w(k, i);
      if (wi == 0.0) continue;
      const Vec x = lat.node(i);
      const Vec gu = pde.grad_at(t, x);
      const Vec sg = spec.sigma(t, x).apply_transposed(gu);
      double d2 = 0.0, z2 = 0.0;
      for (int cdim = 0; cdim < lat.dim(); ++cdim) {
        const double zv = sol.z[static_cast<std::size_t>(cdim)](k, i);
        const double dv = zv - sg[static_cast<std::size_t>(cdim)];
        d2 += dv * dv;
        z2 += zv * zv;
      }
      num += wi * d2 * dt;
      den += wi * z2 * dt;
    }
  }
  return den > 0.0 ? std::sqrt(num / den) : 0.0;
}

namespace {

// int xi(t,y) p(s,x,t,y) q(t,y) dy by trapezoid on x +- 8 sigma(t)
double spatial_pairing(const DiffusionSpec& spec, const ScalarField& xi, const ScalarField& q, double s,
                       const Vec& x, double t) {
  if (t - s < 1e-12) return xi(s, x) * q(s, x);
  const double sd = std::sqrt(spec.lambda_hi * (t - s));
  const double drift = spec.b ? spec.b(s, x)[0] : 0.0;
  const double center = x[0] + drift * (t - s);
  const double lo = center - 8.0 * sd, hi = center + 8.0 * sd;
  const int n = 1600;
  const double dy = (hi - lo) / n;
  double acc = 0.0;
  const SquareMat a = spec.a(s, x);
  const Vec b = spec.b ? spec.b(s, x) : Vec(1, 0.0);
  for (int j = 0; j <= n; ++j) {
    const double y = lo + j * dy;
    const Vec yv{y};
    const double v = xi(t, yv) * gaussian_density(s, x, t, yv, a, b) * q(t, yv);
    acc += (j == 0 || j == n) ? 0.5 * v : v;
  }
  return acc * dy;
}

}  // namespace

CorrespondenceReport verify_measure_correspondence(const DiffusionSpec& spec, const MeasureData& mu,
                                                   const ScalarField& xi, double s, const Vec& x, double T,
                                                   int n_steps, int n_paths, std::uint64_t seed) {
  if (spec.dim != 1) throw std::invalid_argument("measure correspondence: quadrature side implemented for 1D");
  require_constant_coefficients(spec, s, T, x);

  const TimeGrid grid = TimeGrid::uniform(s, T, n_steps);
  const PathBundle paths = simulate_paths(spec, grid, s, x, n_paths, seed);
  std::vector<double> samples(static_cast<std::size_t>(n_paths), 0.0);
  for (int p = 0; p < n_paths; ++p) {
    double acc = 0.0;
    for (int k = 0; k < n_steps; ++k) {
      const Vec xv = paths.state(p, k);
      const double t = grid.node(k);
      acc += xi(t, xv) * mu.q(t, xv) * grid.dt(k);
    }
    samples[static_cast<std::size_t>(p)] = acc;
  }

  CorrespondenceReport rep;
  rep.lhs = mean_of(samples);
  rep.stderr_lhs = stderr_of(samples);

  // composite Simpson in t; the integrand extends continuously to t = s
  const int nt = 200;  // even
  const double dt = (T - s) / nt;
  auto f = [&](double t) {
    return spatial_pairing(spec, xi, mu.density ? mu.density : ScalarField([](double, const Vec&) { return 0.0; }),
                           s, x, t);
  };
  double acc = f(s) + f(T);
  for (int j = 1; j < nt; ++j) acc += (j % 2 == 1 ? 4.0 : 2.0) * f(s + j * dt);
  rep.rhs = acc * dt / 3.0;
  rep.gap = std::abs(rep.lhs - rep.rhs);
  return rep;
}

std::vector<ControlPairing> verify_control_measure(const BackwardEngine& engine, const RBSDESolution& rb,
                                                   const PDESolution& pde, const DiffusionSpec& spec,
                                                   const std::vector<ScalarField>& tests, double s,
                                                   const Vec& x) {
  if (spec.dim != 1) throw std::invalid_argument("control measure: quadrature side implemented for 1D");
  require_constant_coefficients(spec, s, pde.grid.time.horizon(), x);
  if (pde.reaction.empty()) throw std::invalid_argument("control measure: obstacle-mode PDE solution required");

  const TimeGrid& grid = rb.grid;
  const int N = grid.n_steps();
  const int m = engine.n_states();
  const bool mc = rb.mode == SolveMode::monte_carlo;

  std::vector<ControlPairing> out;
  const SquareMat a0 = spec.a(s, x);
  const Vec b0 = spec.b ? spec.b(s, x) : Vec(1, 0.0);

  for (const ScalarField& xi : tests) {
    ControlPairing cp;
    if (mc) {
      std::vector<double> samples(static_cast<std::size_t>(m), 0.0);
      for (int p = 0; p < m; ++p) {
        double acc = 0.0;
        for (int k = 0; k < N; ++k)
          acc += xi(grid.node(k), engine.state(k, p)) * (rb.k(k + 1, p) - rb.k(k, p));
        samples[static_cast<std::size_t>(p)] = acc;
      }
      cp.lhs = mean_of(samples);
      cp.stderr_lhs = stderr_of(samples);
    } else {
      const auto* le = dynamic_cast<const LatticeEngine*>(&engine);
      if (!le) throw std::invalid_argument("control measure: lattice solution requires a lattice engine");
      const Array2D w = le->lattice().marginals(rb.start_index);
      double acc = 0.0;
      for (int k = 0; k < N; ++k)
        for (int i = 0; i < m; ++i)
          acc += w(k, i) * xi(grid.node(k), le->lattice().node(i)) * (rb.k(k + 1, i) - rb.k(k, i));
      cp.lhs = acc;
    }

    // quadrature of xi r p over the PDE grid
    const SpaceTimeGrid& pg = pde.grid;
    double acc = 0.0;
    for (int k = 0; k < pg.time.n_steps(); ++k) {
      const double t = pg.time.node(k);
      if (t < s - 1e-14) continue;
      const double dt = pg.time.dt(k);
      for (int i = 0; i < pg.n_nodes(); ++i) {
        const double r = pde.reaction(k, i);
        if (r == 0.0) continue;
        const Vec y = pg.node(i);
        const double p = t > s + 1e-14 ? gaussian_density(s, x, t, y, a0, b0)
                                       : (std::abs(y[0] - x[0]) <= 0.5 * pg.dx ? 1.0 / pg.dx : 0.0);
        acc += xi(t, y) * r * p * pg.dx * dt;
      }
    }
    cp.rhs = acc;
    cp.gap = std::abs(cp.lhs - cp.rhs);
    out.push_back(cp);
  }
  return out;
}

}  // namespace bsdelab
