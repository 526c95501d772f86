#include "bsdelab/bsde.hpp"

#include <algorithm>
#include <cmath>

#include "bsdelab/errors.hpp"
#include "bsdelab/inf_convolution.hpp"

namespace bsdelab {

double BSDESolution::y0() const {
  if (mode == SolveMode::lattice || y0_samples.empty()) return y(0, start_index);
  double s = 0.0;
  for (double v : y0_samples) s += v;
  return s / static_cast<double>(y0_samples.size());
}

double BSDESolution::y0_stderr() const {
  if (mode == SolveMode::lattice || y0_samples.size() < 2) return 0.0;
  const double m = y0();
  double v = 0.0;
  for (double x : y0_samples) v += (x - m) * (x - m);
  v /= static_cast<double>(y0_samples.size() - 1);
  return std::sqrt(v / static_cast<double>(y0_samples.size()));
}

namespace {

std::string node_tag(int k, int i, double t) {
  return "time step " + std::to_string(k) + " (t=" + std::to_string(t) + "), state " + std::to_string(i);
}

}  // namespace

double implicit_node_value(const std::function<double(double)>& rhs, double cont, int k, int i, double t,
                           const BackwardOptions& opts, int* iters_out, double* resid_out) {
  // fixed point y = rhs(y), seeded at the continuation value
  double y = cont;
  double prev_gap = std::numeric_limits<double>::infinity();
  for (int it = 0; it < opts.max_iterations; ++it) {
    const double y_new = rhs(y);
    const double gap = std::abs(y_new - y);
    const double scale = 1.0 + std::abs(y_new);
    if (gap <= opts.tolerance * scale) {
      if (iters_out) *iters_out = std::max(*iters_out, it + 1);
      if (resid_out) *resid_out = std::max(*resid_out, gap / scale);
      return y_new;
    }
    if (it > 4 && gap > 0.9 * prev_gap) break;  // not contracting, switch to bisection
    prev_gap = gap;
    y = y_new;
  }

  // bisection on F(y) = y - rhs(y); expand a bracket around the continuation
  auto F = [&rhs](double v) { return v - rhs(v); };
  double width = 1.0 + std::abs(cont);
  double lo = cont - width, hi = cont + width;
  int expansions = 0;
  while (F(lo) > 0.0 && expansions < 60) {
    lo -= width;
    width *= 2.0;
    ++expansions;
  }
  width = 1.0 + std::abs(cont);
  while (F(hi) < 0.0 && expansions < 120) {
    hi += width;
    width *= 2.0;
    ++expansions;
  }
  if (F(lo) > 0.0 || F(hi) < 0.0)
    throw SolveError("backward step: fixed point not contracting and no bracket at " + node_tag(k, i, t));
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (hi - lo <= opts.tolerance * (1.0 + std::abs(mid))) {
      if (iters_out) *iters_out = std::max(*iters_out, it + 1);
      if (resid_out) *resid_out = std::max(*resid_out, std::abs(F(mid)));
      return mid;
    }
    (F(mid) <= 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

BSDESolution backward_sweep(const BackwardEngine& engine,
                            const std::function<double(const Vec&)>& terminal,
                            const std::function<double(int, int, double, const Vec&, double, double, const Vec&)>& node_solve,
                            SolveMode mode) {
  const TimeGrid& grid = engine.grid();
  const int N = grid.n_steps();
  const int m = engine.n_states();
  const int d = engine.dim();

  BSDESolution sol;
  sol.grid = grid;
  sol.mode = mode;
  sol.y = Array2D(static_cast<std::size_t>(N) + 1, static_cast<std::size_t>(m));
  sol.z.assign(static_cast<std::size_t>(d), Array2D(static_cast<std::size_t>(N) + 1, static_cast<std::size_t>(m)));

  std::vector<double> y_next(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    y_next[static_cast<std::size_t>(i)] = terminal(engine.state(N, i));
    sol.y(N, i) = y_next[static_cast<std::size_t>(i)];
  }

  std::vector<double> cont;
  std::vector<std::vector<double>> z;
  Vec zi(static_cast<std::size_t>(d));
  for (int k = N - 1; k >= 0; --k) {
    engine.condition(k, y_next, cont, z);
    const double t = grid.node(k);
    const double dt = grid.dt(k);
    for (int i = 0; i < m; ++i) {
      for (int c = 0; c < d; ++c) zi[static_cast<std::size_t>(c)] = z[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)];
      const Vec x = engine.state(k, i);
      const double yv = node_solve(k, i, t, x, dt, cont[static_cast<std::size_t>(i)], zi);
      sol.y(k, i) = yv;
      y_next[static_cast<std::size_t>(i)] = yv;
      for (int c = 0; c < d; ++c) sol.z[static_cast<std::size_t>(c)](k, i) = zi[static_cast<std::size_t>(c)];
    }
  }
  // terminal layer of Z repeats the last computed one (shape convenience)
  for (int c = 0; c < d; ++c)
    for (int i = 0; i < m; ++i) sol.z[static_cast<std::size_t>(c)](N, i) = sol.z[static_cast<std::size_t>(c)](N - 1, i);
  return sol;
}

namespace {

// rolled per-path estimator of Y_0: phi(X_T) plus the accumulated driver
// terms along each path, evaluated at the regressed (Y, Z)
void fill_y0_samples(const BackwardEngine& engine, BSDESolution& sol,
                     const std::function<double(int, int, double, const Vec&)>& increment) {
  const int N = sol.grid.n_steps();
  const int m = engine.n_states();
  const int d = engine.dim();
  sol.y0_samples.assign(static_cast<std::size_t>(m), 0.0);
  for (int p = 0; p < m; ++p) sol.y0_samples[static_cast<std::size_t>(p)] = sol.y(N, p);
  Vec zi(static_cast<std::size_t>(d));
  for (int k = 0; k < N; ++k) {
    for (int p = 0; p < m; ++p) {
      for (int c = 0; c < d; ++c) zi[static_cast<std::size_t>(c)] = sol.z[static_cast<std::size_t>(c)](k, p);
      sol.y0_samples[static_cast<std::size_t>(p)] += increment(k, p, sol.y(k, p), zi);
    }
  }
}

}  // namespace

BSDESolution solve_gbsde(const BackwardEngine& engine, const DriverSpec& driver, const NodeField& dr,
                         SolveReport* report, const BackwardOptions& opts) {
  int iters = 0;
  double resid = 0.0;
  auto node_solve = [&](int k, int i, double t, const Vec& x, double dt, double cont, const Vec& z) {
    const double dri = dr ? dr(k, i) : 0.0;
    auto rhs = [&](double y) { return cont + dt * driver.f_at(t, x, y, z) + dri * driver.g_at(t, x, y); };
    return implicit_node_value(rhs, cont, k, i, t, opts, &iters, &resid);
  };
  const bool mc = dynamic_cast<const PathEngine*>(&engine) != nullptr;
  BSDESolution sol = backward_sweep(engine, driver.phi, node_solve, mc ? SolveMode::monte_carlo : SolveMode::lattice);
  if (mc) {
    fill_y0_samples(engine, sol, [&](int k, int p, double y, const Vec& z) {
      const double t = sol.grid.node(k);
      const Vec x = engine.state(k, p);
      return sol.grid.dt(k) * driver.f_at(t, x, y, z) + (dr ? dr(k, p) : 0.0) * driver.g_at(t, x, y);
    });
  }
  if (report) {
    report->iterations = iters;
    report->residual = resid;
  }
  return sol;
}

BSDESolution solve_gbsde_lattice(const MarkovLattice& lat, const DriverSpec& driver, const MeasureData& mu,
                                 const Vec& start, SolveReport* report) {
  LatticeEngine engine(lat);
  BSDESolution sol = solve_gbsde(engine, driver, engine.measure_increments(mu, std::nullopt), report);
  sol.start_index = lat.nearest_node(start);
  return sol;
}

BSDESolution solve_gbsde_lsmc(const PathBundle& paths, const FunctionalPath& r, const DriverSpec& driver,
                              int basis_order, SolveReport* report) {
  PathEngine engine(paths, basis_order);
  const FunctionalPath* rp = &r;
  NodeField dr = [rp](int k, int p) { return rp->r(p, k + 1) - rp->r(p, k); };
  return solve_gbsde(engine, driver, dr, report);
}

namespace {

using DriverF = std::function<double(double, const Vec&, double, const Vec&)>;
using DriverG = std::function<double(double, const Vec&, double)>;

// probes whether the driver only depends on y (the common case, which
// admits a precomputed regularization table)
bool f_depends_only_on_y(const BackwardEngine& engine, const DriverF& f) {
  const TimeGrid& g = engine.grid();
  const double ts[3] = {g.t0(), 0.5 * (g.t0() + g.horizon()), g.horizon()};
  const int m = engine.n_states();
  const int d = engine.dim();
  const Vec zs[3] = {Vec(static_cast<std::size_t>(d), 0.0), Vec(static_cast<std::size_t>(d), 0.7),
                     Vec(static_cast<std::size_t>(d), -1.3)};
  const int states[3] = {0, m / 2, m - 1};
  for (double y : {-2.0, -0.3, 0.0, 0.5, 1.7}) {
    const double ref = f(ts[0], engine.state(0, states[0]), y, zs[0]);
    for (double t : ts)
      for (int si : states)
        for (const Vec& z : zs) {
          const double v = f(t, engine.state(0, si), y, z);
          if (std::abs(v - ref) > 1e-13 * (1.0 + std::abs(ref))) return false;
        }
  }
  return true;
}

bool g_depends_only_on_y(const BackwardEngine& engine, const DriverG& g) {
  const TimeGrid& gr = engine.grid();
  const double ts[2] = {gr.t0(), gr.horizon()};
  const int m = engine.n_states();
  for (double y : {-1.5, 0.0, 0.8}) {
    const double ref = g(ts[0], engine.state(0, 0), y);
    for (double t : ts)
      for (int si : {0, m - 1}) {
        if (std::abs(g(t, engine.state(0, si), y) - ref) > 1e-13 * (1.0 + std::abs(ref))) return false;
      }
  }
  return true;
}

// crude a-priori box for the Y values visited by the schedule
double y_range_bound(const BackwardEngine& engine, const DriverSpec& driver, const MeasureData& mu) {
  const TimeGrid& g = engine.grid();
  const int m = engine.n_states();
  double phi_max = 0.0, gamma_max = 0.0, q_max = 0.0;
  for (int i = 0; i < m; i += std::max(1, m / 64)) {
    const Vec x = engine.state(g.n_steps(), i);
    phi_max = std::max(phi_max, std::abs(driver.phi ? driver.phi(x) : 0.0));
    for (double t : {g.t0(), g.horizon()}) {
      gamma_max = std::max(gamma_max, std::abs(driver.gamma_at(t, x)));
      q_max = std::max(q_max, mu.q(t, x));
    }
  }
  const double span = g.horizon() - g.t0();
  const double K = std::max(driver.const_K, 1.0);
  double b = (phi_max + K * gamma_max * span + driver.const_M * q_max * span + 1.0) * std::exp(K * span) + 1.0;
  return std::min(b, 1e6);
}

// all schedule members share one candidate grid (sized for the largest n):
// refining the grid between members would break the monotone increase
int shared_grid_points(int n_max, double box) {
  const double target = 1.0 / (4.0 * static_cast<double>(n_max) * n_max);
  int pts = static_cast<int>(std::ceil(2.0 * box / target)) + 1;
  pts = std::max(pts, 257);
  return std::min(pts, 4'000'001);
}

DriverF lipschitz_f_approximant(const BackwardEngine& engine, const DriverF& f, int n, double box, int grid_points) {
  if (f_depends_only_on_y(engine, f)) {
    const double t0 = engine.grid().t0();
    const Vec x0 = engine.state(0, 0);
    const Vec z0(static_cast<std::size_t>(engine.dim()), 0.0);
    auto table = std::make_shared<InfConvolution1D>([&](double y) { return f(t0, x0, y, z0); }, n, -box, box,
                                                    grid_points);
    return [table](double, const Vec&, double y, const Vec&) { return (*table)(y); };
  }
  // general case: brute-force grid minimum per call (slow, kept correct)
  const int pts = std::min(grid_points, 20001);
  auto ys = std::make_shared<std::vector<double>>();
  ys->reserve(static_cast<std::size_t>(pts));
  for (int i = 0; i < pts; ++i) ys->push_back(-box + 2.0 * box * i / (pts - 1));
  return [f, n, ys](double t, const Vec& x, double y, const Vec& z) {
    double best = std::numeric_limits<double>::infinity();
    for (double yp : *ys) best = std::min(best, f(t, x, yp, z) + n * std::abs(y - yp));
    return best;
  };
}

DriverG lipschitz_g_approximant(const BackwardEngine& engine, const DriverG& g, int n, double box, int grid_points) {
  if (g_depends_only_on_y(engine, g)) {
    const double t0 = engine.grid().t0();
    const Vec x0 = engine.state(0, 0);
    auto table =
        std::make_shared<InfConvolution1D>([&](double y) { return g(t0, x0, y); }, n, -box, box, grid_points);
    return [table](double, const Vec&, double y) { return (*table)(y); };
  }
  const int pts = std::min(grid_points, 20001);
  auto ys = std::make_shared<std::vector<double>>();
  for (int i = 0; i < pts; ++i) ys->push_back(-box + 2.0 * box * i / (pts - 1));
  return [g, n, ys](double t, const Vec& x, double y) {
    double best = std::numeric_limits<double>::infinity();
    for (double yp : *ys) best = std::min(best, g(t, x, yp) + n * std::abs(y - yp));
    return best;
  };
}

}  // namespace

BSDESolution minimal_solution(const BackwardEngine& engine, const DriverSpec& driver, const MeasureData& mu,
                              const std::vector<int>& n_schedule, ApproximationCertificate* cert,
                              double stop_gap) {
  if (n_schedule.empty()) throw std::invalid_argument("minimal_solution: empty schedule");
  const double box = y_range_bound(engine, driver, mu);

  const bool has_g = static_cast<bool>(driver.g);
  bool g_nonneg = true;
  if (has_g) {
    const int m = engine.n_states();
    for (int i = 0; i < m; i += std::max(1, m / 32))
      for (double y : {-box, 0.0, box})
        for (double t : {engine.grid().t0(), engine.grid().horizon()})
          if (driver.g(t, engine.state(0, i), y) < -1e-12) g_nonneg = false;
  }

  BSDESolution current;
  bool have_prev = false;
  double worst_monotonicity = 0.0;
  if (cert) {
    cert->schedule.clear();
    cert->successive_gap.clear();
  }

  const int n_max = *std::max_element(n_schedule.begin(), n_schedule.end());
  const int grid_points = shared_grid_points(n_max, box);
  for (int n : n_schedule) {
    DriverSpec approx = driver;
    approx.f = driver.f ? lipschitz_f_approximant(engine, driver.f, n, box, grid_points) : driver.f;
    if (has_g && g_nonneg) approx.g = lipschitz_g_approximant(engine, driver.g, n, box, grid_points);
    approx.const_L = static_cast<double>(n);
    // R wedge n only when g >= 0; otherwise the untruncated (bounded)
    // functional keeps the iterates ordered
    std::optional<double> cap;
    if (has_g && g_nonneg) cap = static_cast<double>(n);
    NodeField dr = engine.measure_increments(mu, cap);

    BSDESolution next = solve_gbsde(engine, approx, dr);
    double gap = 0.0;
    if (have_prev) {
      for (std::size_t idx = 0; idx < next.y.data().size(); ++idx) {
        const double diff = current.y.data()[idx] - next.y.data()[idx];  // must be <= 0
        worst_monotonicity = std::max(worst_monotonicity, diff);
        gap = std::max(gap, std::abs(diff));
      }
      const double mono_tol = dynamic_cast<const PathEngine*>(&engine) ? 1e-3 : 1e-8;
      if (worst_monotonicity > mono_tol)
        throw SolveError("minimal_solution: iterates not increasing (violation " +
                         std::to_string(worst_monotonicity) + "); scheme inconsistency");
    }
    current = std::move(next);
    if (cert) {
      cert->schedule.push_back(n);
      cert->successive_gap.push_back(have_prev ? gap : std::numeric_limits<double>::quiet_NaN());
      cert->max_monotonicity_violation = worst_monotonicity;
    }
    if (have_prev && gap < stop_gap) break;
    have_prev = true;
  }
  return current;
}

BSDESolution maximal_solution(const BackwardEngine& engine, const DriverSpec& driver, const MeasureData& mu,
                              const std::vector<int>& n_schedule, ApproximationCertificate* cert,
                              double stop_gap) {
  DriverSpec flipped = driver;
  if (driver.f)
    flipped.f = [f = driver.f](double t, const Vec& x, double y, const Vec& z) {
      Vec nz(z.size());
      for (std::size_t c = 0; c < z.size(); ++c) nz[c] = -z[c];
      return -f(t, x, -y, nz);
    };
  if (driver.g) flipped.g = [g = driver.g](double t, const Vec& x, double y) { return -g(t, x, -y); };
  if (driver.phi) flipped.phi = [phi = driver.phi](const Vec& x) { return -phi(x); };

  BSDESolution sol = minimal_solution(engine, flipped, mu, n_schedule, cert, stop_gap);
  for (double& v : sol.y.data()) v = -v;
  for (auto& plane : sol.z)
    for (double& v : plane.data()) v = -v;
  for (double& v : sol.y0_samples) v = -v;
  return sol;
}

ComparisonReport check_comparison(const BSDESolution& sol1, const BSDESolution& sol2) {
  ComparisonReport rep;
  const std::size_t rows = sol1.y.rows(), cols = sol1.y.cols();
  for (std::size_t k = 0; k < rows; ++k)
    for (std::size_t i = 0; i < cols; ++i) {
      const double v = sol1.y(k, i) - sol2.y(k, i);
      if (v > rep.max_violation) {
        rep.max_violation = v;
        rep.at_step = static_cast<int>(k);
        rep.at_state = static_cast<int>(i);
      }
    }
  return rep;
}

AprioriReport check_apriori(const BackwardEngine& engine, const BSDESolution& sol, const DriverSpec& driver,
                            const MeasureData& mu) {
  AprioriReport rep;
  const TimeGrid& grid = sol.grid;
  const int N = grid.n_steps();
  const int m = engine.n_states();
  const int d = engine.dim();

  if (sol.mode == SolveMode::monte_carlo) {
    double sup_acc = 0.0, z_acc = 0.0, xi_acc = 0.0, rt_acc = 0.0, gamma_acc = 0.0;
    for (int p = 0; p < m; ++p) {
      double sup = 0.0, zint = 0.0, gint = 0.0, rt = 0.0;
      for (int k = 0; k <= N; ++k) sup = std::max(sup, sol.y(k, p) * sol.y(k, p));
      for (int k = 0; k < N; ++k) {
        double z2 = 0.0;
        for (int c = 0; c < d; ++c) z2 += sol.z[static_cast<std::size_t>(c)](k, p) * sol.z[static_cast<std::size_t>(c)](k, p);
        const Vec x = engine.state(k, p);
        const double gv = driver.gamma_at(grid.node(k), x);
        zint += z2 * grid.dt(k);
        gint += gv * gv * grid.dt(k);
        rt += mu.q(grid.node(k), x) * grid.dt(k);
      }
      sup_acc += sup;
      z_acc += zint;
      gamma_acc += gint;
      rt_acc += rt * rt;
      const double xi = sol.y(N, p);
      xi_acc += xi * xi;
    }
    const double inv = 1.0 / static_cast<double>(m);
    rep.lhs = (sup_acc + z_acc) * inv;
    rep.rhs = (xi_acc + rt_acc + gamma_acc) * inv;
  } else {
    const auto* le = dynamic_cast<const LatticeEngine*>(&engine);
    if (!le) throw std::invalid_argument("check_apriori: lattice solution requires a lattice engine");
    const MarkovLattice& lat = le->lattice();
    const Array2D w = lat.marginals(sol.start_index);
    double sup = 0.0, zint = 0.0, gint = 0.0, xi = 0.0;
    for (int k = 0; k <= N; ++k) {
      double ey2 = 0.0;
      for (int i = 0; i < m; ++i) ey2 += w(k, i) * sol.y(k, i) * sol.y(k, i);
      sup = std::max(sup, ey2);
    }
    for (int k = 0; k < N; ++k)
      for (int i = 0; i < m; ++i) {
        double z2 = 0.0;
        for (int c = 0; c < d; ++c) z2 += sol.z[static_cast<std::size_t>(c)](k, i) * sol.z[static_cast<std::size_t>(c)](k, i);
        const double gv = driver.gamma_at(grid.node(k), lat.node(i));
        zint += w(k, i) * z2 * grid.dt(k);
        gint += w(k, i) * gv * gv * grid.dt(k);
      }
    for (int i = 0; i < m; ++i) xi += w(N, i) * sol.y(N, i) * sol.y(N, i);

    // E R_T^2 by the two-moment backward recursion on the chain
    std::vector<double> m1(static_cast<std::size_t>(m), 0.0), m2(static_cast<std::size_t>(m), 0.0);
    std::vector<double> em1, em2;
    std::vector<std::vector<double>> scratch;
    for (int k = N - 1; k >= 0; --k) {
      lat.condition(k, m1, em1, scratch);
      lat.condition(k, m2, em2, scratch);
      for (int i = 0; i < m; ++i) {
        const double dri = mu.q(grid.node(k), lat.node(i)) * grid.dt(k);
        m2[static_cast<std::size_t>(i)] = dri * dri + 2.0 * dri * em1[static_cast<std::size_t>(i)] + em2[static_cast<std::size_t>(i)];
        m1[static_cast<std::size_t>(i)] = dri + em1[static_cast<std::size_t>(i)];
      }
    }
    rep.lhs = sup + zint;
    rep.rhs = xi + m2[static_cast<std::size_t>(sol.start_index)] + gint;
  }
  rep.ratio = rep.rhs > 0.0 ? rep.lhs / rep.rhs : (rep.lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  return rep;
}

}  // namespace bsdelab
