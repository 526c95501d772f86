#include "bsdelab/rbsde.hpp"

#include <algorithm>
#include <cmath>

#include "bsdelab/errors.hpp"

namespace bsdelab {

double RBSDESolution::y0() const {
  if (mode == SolveMode::lattice || y0_samples.empty()) return y(0, start_index);
  double s = 0.0;
  for (double v : y0_samples) s += v;
  return s / static_cast<double>(y0_samples.size());
}

double RBSDESolution::y0_stderr() const {
  if (mode == SolveMode::lattice || y0_samples.size() < 2) return 0.0;
  const double m = y0();
  double v = 0.0;
  for (double x : y0_samples) v += (x - m) * (x - m);
  v /= static_cast<double>(y0_samples.size() - 1);
  return std::sqrt(v / static_cast<double>(y0_samples.size()));
}

namespace {

void require_terminal_dominates(const BackwardEngine& engine, const DriverSpec& driver,
                                const ObstacleSpec& obstacle) {
  const int N = engine.grid().n_steps();
  const double T = engine.grid().horizon();
  const int m = engine.n_states();
  for (int i = 0; i < m; i += std::max(1, m / 128)) {
    const Vec x = engine.state(N, i);
    const double phi = driver.phi ? driver.phi(x) : 0.0;
    const double s = obstacle.barrier(T, x);
    if (s > phi + 1e-9 * (1.0 + std::abs(phi)))
      throw std::invalid_argument("reflected solve: terminal condition below the barrier at T (phi < h)");
  }
}

std::vector<double> state_weights(const BackwardEngine& engine, int start_index, int k) {
  const int m = engine.n_states();
  if (const auto* le = dynamic_cast<const LatticeEngine*>(&engine)) {
    static thread_local const MarkovLattice* cached_lat = nullptr;
    static thread_local int cached_start = -1;
    static thread_local Array2D cached;
    if (cached_lat != &le->lattice() || cached_start != start_index) {
      cached = le->lattice().marginals(start_index);
      cached_lat = &le->lattice();
      cached_start = start_index;
    }
    std::vector<double> w(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) w[static_cast<std::size_t>(i)] = cached(k, i);
    return w;
  }
  return std::vector<double>(static_cast<std::size_t>(m), 1.0 / static_cast<double>(m));
}

RBSDESolution from_bsde(BSDESolution&& b) {
  RBSDESolution r;
  r.grid = b.grid;
  r.mode = b.mode;
  r.y = std::move(b.y);
  r.z = std::move(b.z);
  r.start_index = b.start_index;
  r.y0_samples = std::move(b.y0_samples);
  r.k = Array2D(r.y.rows(), r.y.cols(), 0.0);
  return r;
}

void roll_mc_samples(const BackwardEngine& engine, const DriverSpec& driver, RBSDESolution& sol) {
  if (sol.mode != SolveMode::monte_carlo) return;
  const int N = sol.grid.n_steps();
  const int m = engine.n_states();
  const int d = engine.dim();
  sol.y0_samples.assign(static_cast<std::size_t>(m), 0.0);
  Vec zi(static_cast<std::size_t>(d));
  for (int p = 0; p < m; ++p) {
    double v = sol.y(N, p);
    for (int k = 0; k < N; ++k) {
      for (int c = 0; c < d; ++c) zi[static_cast<std::size_t>(c)] = sol.z[static_cast<std::size_t>(c)](k, p);
      const Vec x = engine.state(k, p);
      v += sol.grid.dt(k) * driver.f_at(sol.grid.node(k), x, sol.y(k, p), zi);
      v += sol.k(k + 1, p) - sol.k(k, p);
    }
    sol.y0_samples[static_cast<std::size_t>(p)] = v;
  }
}

}  // namespace

RBSDESolution solve_rbsde_penalization(const BackwardEngine& engine, const DriverSpec& driver,
                                       const ObstacleSpec& obstacle, const std::vector<int>& n_schedule,
                                       PenalizationReport* report, bool extrapolate) {
  if (n_schedule.empty()) throw std::invalid_argument("penalization: empty schedule");
  require_terminal_dominates(engine, driver, obstacle);

  const int N = engine.grid().n_steps();
  const int m = engine.n_states();
  auto barrier = [&](int k, int i) { return obstacle.barrier(engine.grid().node(k), engine.state(k, i)); };

  RBSDESolution prev, cur;
  bool have_prev = false;
  double worst_mono = 0.0;
  if (report) {
    report->schedule.clear();
    report->successive_gap.clear();
  }

  for (int n : n_schedule) {
    DriverSpec pen = driver;
    const auto h = obstacle.h;
    const double dn = static_cast<double>(n);
    pen.f = [f = driver.f, h, dn](double t, const Vec& x, double y, const Vec& z) {
      const double base = f ? f(t, x, y, z) : 0.0;
      return base + dn * std::max(h(t, x) - y, 0.0);
    };
    pen.g = nullptr;
    if (driver.const_L) pen.const_L = *driver.const_L + dn;
    else pen.const_L = dn + driver.const_K;

    BSDESolution b = solve_gbsde(engine, pen, NodeField{});
    RBSDESolution r = from_bsde(std::move(b));
    for (int k = 0; k < N; ++k) {
      const double dt = engine.grid().dt(k);
      for (int i = 0; i < m; ++i) {
        const double dk = dn * std::max(barrier(k, i) - r.y(k, i), 0.0) * dt;
        r.k(k + 1, i) = r.k(k, i) + dk;
      }
    }

    double gap = 0.0;
    if (have_prev) {
      // deterministic engines must be ordered to solver precision;
      // regression engines only up to projection noise
      const double mono_tol = dynamic_cast<const PathEngine*>(&engine) ? 1e-3 : 1e-6;
      for (std::size_t idx = 0; idx < r.y.data().size(); ++idx) {
        const double diff = cur.y.data()[idx] - r.y.data()[idx];
        worst_mono = std::max(worst_mono, diff);
        gap = std::max(gap, std::abs(diff));
      }
      if (worst_mono > mono_tol)
        throw SolveError("penalization: iterates not increasing (violation " + std::to_string(worst_mono) + ")");
    }
    prev = std::move(cur);
    cur = std::move(r);
    if (report) {
      report->schedule.push_back(n);
      report->successive_gap.push_back(have_prev ? gap : std::numeric_limits<double>::quiet_NaN());
      report->max_monotonicity_violation = worst_mono;
    }
    have_prev = true;
  }

  RBSDESolution out = cur;
  if (extrapolate && n_schedule.size() >= 2) {
    const double n1 = static_cast<double>(n_schedule[n_schedule.size() - 2]);
    const double n2 = static_cast<double>(n_schedule.back());
    const double w = n1 / (n2 - n1);  // error model c/n
    for (std::size_t idx = 0; idx < out.y.data().size(); ++idx)
      out.y.data()[idx] = cur.y.data()[idx] + w * (cur.y.data()[idx] - prev.y.data()[idx]);
    for (std::size_t c = 0; c < out.z.size(); ++c)
      for (std::size_t idx = 0; idx < out.z[c].data().size(); ++idx)
        out.z[c].data()[idx] = cur.z[c].data()[idx] + w * (cur.z[c].data()[idx] - prev.z[c].data()[idx]);
    // extrapolate K through its increments, clamping stray negatives
    for (int i = 0; i < m; ++i) {
      double acc = 0.0;
      for (int k = 0; k < N; ++k) {
        const double inc_cur = cur.k(k + 1, i) - cur.k(k, i);
        const double inc_prev = prev.k(k + 1, i) - prev.k(k, i);
        acc += std::max(inc_cur + w * (inc_cur - inc_prev), 0.0);
        out.k(k + 1, i) = acc;
      }
    }
  }

  double dom = 0.0;
  for (int k = 0; k <= N; ++k)
    for (int i = 0; i < m; ++i) dom = std::max(dom, barrier(k, i) - out.y(k, i));
  if (report) report->domination_violation = dom;

  roll_mc_samples(engine, driver, out);
  return out;
}

// largest root of F(y) = y - cont - dt f(y) - dR/(1 + n|y - S|).
// F is strictly increasing on [S, inf), so a sign check at S decides
// whether the root sits above the barrier.
double homographic_scalar_root(const std::function<double(double)>& fdt, double cont, double dr, double n,
                               double s, double lip_dt, int k, int i, double t, const BackwardOptions& opts) {
  auto G = [&](double y) { return dr / (1.0 + n * std::abs(y - s)); };
  auto F = [&](double y) { return y - cont - fdt(y) - G(y); };

  if (dr <= 0.0) {
    auto rhs = [&](double y) { return cont + fdt(y); };
    return implicit_node_value(rhs, cont, k, i, t, opts, nullptr, nullptr);
  }

  // unconstrained step, then the guaranteed upper bracket y_unc + dR/(1-L dt)
  auto rhs_unc = [&](double y) { return cont + fdt(y); };
  const double y_unc = implicit_node_value(rhs_unc, cont, k, i, t, opts, nullptr, nullptr);
  const double slack = std::max(1.0 - lip_dt, 0.5);
  double hi = y_unc + dr / slack + 1e-12 * (1.0 + std::abs(y_unc));
  int guard = 0;
  while (F(hi) < 0.0 && guard++ < 60) hi += std::max(dr, 1.0 + std::abs(hi));
  if (F(hi) < 0.0) throw SolveError("homographic step: no upper bracket at step " + std::to_string(k));

  double lo;
  if (F(s) <= opts.tolerance * (1.0 + std::abs(s))) {
    lo = s;  // unique root at or above the barrier
  } else {
    // largest root lies below S; march down until the sign flips. Step
    // resolution tracks the 1/n width of the homographic well.
    const double step = std::max(1.0 / (2.0 * n * (1.0 + std::sqrt(dr * n))), 1e-14 * (1.0 + std::abs(s)));
    double a = s, fa = F(s);
    double b = a;
    int it = 0;
    while (fa > 0.0 && it < 4000) {
      b = a;
      a -= step * (1.0 + 0.01 * it);  // mild growth keeps the march bounded
      fa = F(a);
      ++it;
    }
    if (fa > 0.0) throw SolveError("homographic step: root search failed at step " + std::to_string(k) +
                                   ", state " + std::to_string(i));
    lo = a;
    hi = b;
  }

  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (hi - lo <= opts.tolerance * (1.0 + std::abs(mid))) return std::max(mid, lo);
    (F(mid) <= 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

HomographicIterate solve_rbsde_homographic(const BackwardEngine& engine, const DriverSpec& driver,
                                           const ObstacleSpec& obstacle, int n) {
  if (n < 1) throw std::invalid_argument("homographic: n must be positive");
  if (!obstacle.r_density) throw std::invalid_argument("homographic: obstacle decomposition (r_density) required");
  require_terminal_dominates(engine, driver, obstacle);

  const bool mc = dynamic_cast<const PathEngine*>(&engine) != nullptr;
  const TimeGrid& grid = engine.grid();
  const int N = grid.n_steps();
  const int m = engine.n_states();
  MeasureData md;
  md.density = obstacle.r_density;
  NodeField dr = engine.measure_increments(md, std::nullopt);

  const double lip = driver.const_L.value_or(driver.const_K);
  BackwardOptions opts;
  HomographicIterate it;
  it.n = n;
  it.alpha = Array2D(static_cast<std::size_t>(N), static_cast<std::size_t>(m), 1.0);

  auto node_solve = [&](int k, int i, double t, const Vec& x, double dt, double cont, const Vec& z) {
    const double s = obstacle.barrier(t, x);
    auto fdt = [&](double y) { return dt * driver.f_at(t, x, y, z); };
    const double dri = dr(k, i);
    const double y = homographic_scalar_root(fdt, cont, dri, static_cast<double>(n), s, lip * dt, k, i, t, opts);
    it.alpha(k, i) = 1.0 / (1.0 + n * std::abs(y - s));
    return y;
  };

  BSDESolution b = backward_sweep(engine, driver.phi, node_solve,
                                  mc ? SolveMode::monte_carlo : SolveMode::lattice);
  it.sol = from_bsde(std::move(b));
  for (int k = 0; k < N; ++k)
    for (int i = 0; i < m; ++i)
      it.sol.k(k + 1, i) = it.sol.k(k, i) + it.alpha(k, i) * dr(k, i);

  double dom = 0.0;
  for (int k = 0; k <= N; ++k)
    for (int i = 0; i < m; ++i)
      dom = std::max(dom, obstacle.barrier(grid.node(k), engine.state(k, i)) - it.sol.y(k, i));
  it.domination_violation = dom;

  roll_mc_samples(engine, driver, it.sol);
  return it;
}

HomographicSequenceReport homographic_sequence(const BackwardEngine& engine, const DriverSpec& driver,
                                               const ObstacleSpec& obstacle, const std::vector<int>& n_list,
                                               const RBSDESolution& reference, double eps_contact) {
  HomographicSequenceReport rep;
  const TimeGrid& grid = engine.grid();
  const int N = grid.n_steps();
  const int m = engine.n_states();
  const int d = engine.dim();

  Array2D prev_y;
  bool have_prev = false;
  for (int n : n_list) {
    HomographicIterate it = solve_rbsde_homographic(engine, driver, obstacle, n);
    rep.domination_violation = std::max(rep.domination_violation, it.domination_violation);
    if (have_prev) {
      const double mono_tol = dynamic_cast<const PathEngine*>(&engine) ? 1e-3 : 1e-6;
      double viol = 0.0;
      for (std::size_t idx = 0; idx < prev_y.data().size(); ++idx)
        viol = std::max(viol, it.sol.y.data()[idx] - prev_y.data()[idx]);  // must decrease
      rep.max_monotonicity_violation = std::max(rep.max_monotonicity_violation, viol);
      if (viol > mono_tol)
        throw SolveError("homographic sequence: iterates not decreasing (violation " + std::to_string(viol) + ")");
    }
    prev_y = it.sol.y;
    have_prev = true;

    HomographicGapRow row;
    row.n = n;
    for (int k = 0; k <= N; ++k) {
      const std::vector<double> w = state_weights(engine, reference.start_index, k);
      for (int i = 0; i < m; ++i) {
        row.sup_gap_y = std::max(row.sup_gap_y, std::abs(it.sol.y(k, i) - reference.y(k, i)));
        row.sup_gap_k = std::max(row.sup_gap_k, std::abs(it.sol.k(k, i) - reference.k(k, i)));
        if (k < N) {
          double z2 = 0.0;
          for (int c = 0; c < d; ++c) {
            const double dz = it.sol.z[static_cast<std::size_t>(c)](k, i) - reference.z[static_cast<std::size_t>(c)](k, i);
            z2 += dz * dz;
          }
          row.int_gap_z += w[static_cast<std::size_t>(i)] * z2 * grid.dt(k);
        }
      }
    }
    row.skorokhod = check_skorokhod(engine, it.sol, obstacle);
    row.ls_violations = check_lewy_stampacchia(engine, it.sol, obstacle, eps_contact).violations;
    rep.rows.push_back(row);
  }
  return rep;
}

double check_skorokhod(const BackwardEngine& engine, const RBSDESolution& sol, const ObstacleSpec& obstacle) {
  const TimeGrid& grid = sol.grid;
  const int N = grid.n_steps();
  const int m = engine.n_states();
  double acc = 0.0;
  for (int k = 0; k < N; ++k) {
    const std::vector<double> w = state_weights(engine, sol.start_index, k);
    for (int i = 0; i < m; ++i) {
      const double dk = sol.k(k + 1, i) - sol.k(k, i);
      if (dk == 0.0) continue;
      const double gap = sol.y(k, i) - obstacle.barrier(grid.node(k), engine.state(k, i));
      acc += w[static_cast<std::size_t>(i)] * gap * dk;
    }
  }
  return acc;
}

LewyStampacchiaReport check_lewy_stampacchia(const BackwardEngine& engine, const RBSDESolution& sol,
                                             const ObstacleSpec& obstacle, double eps_contact, double tol) {
  LewyStampacchiaReport rep;
  const TimeGrid& grid = sol.grid;
  const int N = grid.n_steps();
  const int m = engine.n_states();
  MeasureData md;
  md.density = obstacle.r_density;
  NodeField dr = engine.measure_increments(md, std::nullopt);
  for (int k = 0; k < N; ++k) {
    const double t = grid.node(k);
    for (int i = 0; i < m; ++i) {
      const double dk = sol.k(k + 1, i) - sol.k(k, i);
      const double gap = std::abs(sol.y(k, i) - obstacle.barrier(t, engine.state(k, i)));
      const double bound = (gap <= eps_contact ? dr(k, i) : 0.0) + tol;
      ++rep.nodes_checked;
      if (dk < -1e-12) {
        ++rep.violations;
        rep.max_lower_excess = std::max(rep.max_lower_excess, -dk);
      } else if (dk > bound) {
        ++rep.violations;
        rep.max_upper_excess = std::max(rep.max_upper_excess, dk - bound);
      }
    }
  }
  return rep;
}

ControlDensityReport control_density(const BackwardEngine& engine, const RBSDESolution& sol,
                                     const ObstacleSpec& obstacle, double eps_contact, double density_tol) {
  if (!obstacle.r_density) throw std::invalid_argument("control_density: obstacle decomposition required");
  ControlDensityReport rep;
  const TimeGrid& grid = sol.grid;
  const int N = grid.n_steps();
  const int m = engine.n_states();
  rep.alpha_hat = Array2D(static_cast<std::size_t>(N), static_cast<std::size_t>(m),
                          std::numeric_limits<double>::quiet_NaN());
  for (int k = 0; k < N; ++k) {
    const double t = grid.node(k);
    const double dt = grid.dt(k);
    for (int i = 0; i < m; ++i) {
      const Vec x = engine.state(k, i);
      const double denom = obstacle.r_density(t, x) * dt;  // (f + U)^- dt
      if (denom <= density_tol) continue;
      const double a = (sol.k(k + 1, i) - sol.k(k, i)) / denom;
      rep.alpha_hat(k, i) = a;
      ++rep.defined_nodes;
      if (a < -1e-6 || a > 1.0 + 1e-6) ++rep.range_violations;
      const double gap = std::abs(sol.y(k, i) - obstacle.barrier(t, x));
      if (gap > eps_contact) rep.max_off_contact = std::max(rep.max_off_contact, std::abs(a));
    }
  }
  return rep;
}

}  // namespace bsdelab
