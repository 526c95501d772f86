#include "bsdelab/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "bsdelab/bridge.hpp"
#include "bsdelab/csv.hpp"
#include "bsdelab/errors.hpp"
#include "bsdelab/gaussian.hpp"
#include "bsdelab/rng.hpp"
#include "bsdelab/svg.hpp"

namespace bsdelab {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846); }

DiffusionSpec constant_diffusion(double a0, double b0) {
  DiffusionSpec spec;
  spec.dim = 1;
  spec.a = [a0](double, const Vec&) {
    SquareMat m(1);
    m(0, 0) = a0;
    return m;
  };
  spec.b = [b0](double, const Vec&) { return Vec{b0}; };
  spec.lambda_lo = a0;
  spec.lambda_hi = std::max(a0, std::abs(b0));
  spec.div_a = [](double, const Vec&) { return Vec{0.0}; };
  return spec;
}

struct CheckList {
  std::vector<CheckResult>* sink;
  void add(const std::string& name, double value, double threshold, bool pass, const std::string& detail = "") {
    sink->push_back({name, pass, value, threshold, detail});
  }
  void le(const std::string& name, double value, double threshold, const std::string& detail = "") {
    add(name, value, threshold, value <= threshold, detail);
  }
};

std::string art(ExperimentResult& res, const fs::path& dir, const std::string& file) {
  const std::string full = (dir / file).string();
  res.artifacts.push_back(full);
  return full;
}

// ---------------------------------------------------------------- cases --

ExperimentResult run_heat_baseline(const ExperimentConfig& cfg, const fs::path& out) {
  ExperimentResult res;
  res.case_name = "heat_baseline";
  CheckList ck{&res.checks};

  const double T = cfg.param("horizon", 0.5);
  const DiffusionSpec spec = constant_diffusion(1.0, 0.0);
  DriverSpec driver;
  driver.phi = [](const Vec& x) { return normal_pdf(x[0]); };
  driver.gamma_bound = [](double, const Vec&) { return 0.0; };
  driver.const_K = 1.0;

  auto closed = [T](double t, double x) {
    const double var = 1.0 + (T - t);
    return normal_pdf(x / std::sqrt(var)) / std::sqrt(var);
  };

  if (cfg.mode != RunMode::sweep) {
    const int n_steps = static_cast<int>(cfg.param("n_steps", 100));
    const int nx = static_cast<int>(cfg.param("n_space", 241));
    const SpaceTimeGrid grid = SpaceTimeGrid::make_1d(TimeGrid::uniform(0.0, T, n_steps), -6.0, 6.0, nx);
    const PDESolution pde = solve_parabolic_measure(grid, spec, driver, MeasureData::zero());

    double err = 0.0;
    for (int i = 0; i < grid.n_nodes(); ++i) err = std::max(err, std::abs(pde.u(0, i) - closed(0.0, grid.node(i)[0])));
    ck.le("pde_vs_heat_kernel_max_error", err, 1e-3);
    write_pde_csv(art(res, out, "heat_u_grid.csv"), pde);

    if (cfg.mode == RunMode::full || cfg.mode == RunMode::bridge) {
      BridgeCase bc;
      bc.spec = spec;
      bc.driver = driver;
      bc.n_steps = n_steps;
      bc.n_paths = static_cast<int>(cfg.param("n_paths", 20000));
      bc.basis_order = static_cast<int>(cfg.param("basis_order", 3));
      bc.seed = cfg.seed;
      bc.jobs = cfg.jobs;
      const std::vector<std::pair<double, Vec>> probes{
          {0.0, {0.0}}, {0.0, {-0.5}}, {0.0, {0.5}}, {0.25, {0.3}}, {0.25, {-0.4}}};
      const BridgeReport br = compare_representation(pde, bc, probes, 1e-3);
      for (const auto& p : br.points)
        ck.add("bridge_point_s" + format_double(p.s) + "_x" + format_double(p.x[0]), p.gap,
               3.0 * p.mc_stderr + 1e-3, p.pass);
      write_bridge_csv(art(res, out, "heat_bridge.csv"), br);

      // gradient identity on the deterministic engine
      const int lat_steps = static_cast<int>(cfg.param("lattice_steps", 100));
      const int lat_nodes = static_cast<int>(cfg.param("lattice_space", 161));
      Vec lo, hi;
      default_box(spec, grid.time, {0.0}, lo, hi);
      const MarkovLattice lat = build_lattice(spec, TimeGrid::uniform(0.0, T, lat_steps), {-6.0}, {6.0}, lat_nodes);
      BSDESolution lsol = solve_gbsde_lattice(lat, driver, MeasureData::zero(), {0.0});
      const double zgap = gradient_identity_gap(lat, lsol, pde, spec);
      ck.le("gradient_identity_relative_gap", zgap, 0.05);

      if (cfg.svg) {
        std::vector<std::vector<double>> field;
        for (int k = 0; k <= grid.time.n_steps(); k += std::max(1, grid.time.n_steps() / 64)) {
          std::vector<double> row;
          for (int i = 0; i < grid.n_nodes(); i += std::max(1, grid.n_nodes() / 128)) row.push_back(pde.u(k, i));
          field.push_back(std::move(row));
        }
        write_svg_heatmap(art(res, out, "heat_u.svg"), "heat baseline u(t,x)", field);
      }
    }
  }
  return res;
}

ExperimentResult run_ode_discount(const ExperimentConfig& cfg, const fs::path& out) {
  ExperimentResult res;
  res.case_name = "ode_discount";
  CheckList ck{&res.checks};
  const double T = 1.0;
  const double target = std::exp(-1.0);

  const DiffusionSpec spec = constant_diffusion(1.0, 0.0);
  DriverSpec driver;
  driver.f = [](double, const Vec&, double y, const Vec&) { return -y; };
  driver.phi = [](const Vec&) { return 1.0; };
  driver.gamma_bound = [](double, const Vec&) { return 0.0; };
  driver.const_K = 1.0;
  driver.const_M = 0.0;
  driver.const_L = 1.0;

  // lattice at dt = 1e-3
  {
    const auto tic = std::chrono::steady_clock::now();
    const int N = static_cast<int>(cfg.param("lattice_steps", 1000));
    const int nx = static_cast<int>(cfg.param("lattice_space", 376));
    const MarkovLattice lat = build_lattice(spec, TimeGrid::uniform(0.0, T, N), {-6.0}, {6.0}, nx);
    const BSDESolution sol = solve_gbsde_lattice(lat, driver, MeasureData::zero(), {0.0});
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - tic).count();
    ck.le("lattice_y0_error", std::abs(sol.y0() - target), 1e-3);
    ck.le("lattice_runtime_seconds", elapsed, 5.0);

    LatticeEngine eng(lat);
    const AprioriReport ap = check_apriori(eng, sol, driver, MeasureData::zero());
    ck.le("apriori_ratio", ap.ratio, 10.0, "lhs=" + format_double(ap.lhs) + " rhs=" + format_double(ap.rhs));
    write_bsde_csv(art(res, out, "discount_lattice.csv"), eng, sol, 32);
  }

  // LSMC at dt = 1e-2, 20k paths
  {
    const int N = static_cast<int>(cfg.param("n_steps", 100));
    const int n_paths = static_cast<int>(cfg.param("n_paths", 20000));
    const PathBundle paths = simulate_paths(spec, TimeGrid::uniform(0.0, T, N), 0.0, {0.0}, n_paths, cfg.seed, cfg.jobs);
    const FunctionalPath r = accumulate_functional(paths, MeasureData::zero());
    const BSDESolution sol = solve_gbsde_lsmc(paths, r, driver, static_cast<int>(cfg.param("basis_order", 3)));
    ck.le("lsmc_y0_error", std::abs(sol.y0() - target), 3.0 * sol.y0_stderr() + 0.01 * target);
  }

  // PDE: u(t, x) = e^{-(T-t)} uniformly in x
  const int pn = static_cast<int>(cfg.param("pde_steps", 400));
  const int pnx = static_cast<int>(cfg.param("pde_space", 161));
  const SpaceTimeGrid grid = SpaceTimeGrid::make_1d(TimeGrid::uniform(0.0, T, pn), -6.0, 6.0, pnx);
  const PDESolution pde = solve_parabolic_measure(grid, spec, driver, MeasureData::zero());
  double err = 0.0, spread = 0.0;
  for (int k = 0; k <= pn; ++k) {
    double lo = 1e300, hi = -1e300;
    const double ref = std::exp(-(T - grid.time.node(k)));
    for (int i = 0; i < grid.n_nodes(); ++i) {
      err = std::max(err, std::abs(pde.u(k, i) - ref));
      lo = std::min(lo, pde.u(k, i));
      hi = std::max(hi, pde.u(k, i));
    }
    spread = std::max(spread, hi - lo);
  }
  ck.le("pde_vs_exponential_max_error", err, 1e-3);
  ck.le("pde_spatial_spread", spread, 1e-10);
  write_pde_csv(art(res, out, "discount_u_grid.csv"), pde);

  if (cfg.mode == RunMode::full || cfg.mode == RunMode::bridge) {
    BridgeCase bc;
    bc.spec = spec;
    bc.driver = driver;
    bc.n_steps = static_cast<int>(cfg.param("bridge_steps", 200));
    bc.n_paths = static_cast<int>(cfg.param("n_paths", 20000));
    bc.seed = cfg.seed;
    bc.jobs = cfg.jobs;
    const std::vector<std::pair<double, Vec>> probes{
        {0.0, {0.0}}, {0.0, {1.0}}, {0.25, {-0.5}}, {0.5, {0.2}}, {0.75, {0.0}}};
    const BridgeReport br = compare_representation(pde, bc, probes, 1e-3);
    for (const auto& p : br.points)
      ck.add("bridge_point_s" + format_double(p.s) + "_x" + format_double(p.x[0]), p.gap,
             3.0 * p.mc_stderr + 1e-3, p.pass);
    write_bridge_csv(art(res, out, "discount_bridge.csv"), br);
  }
  return res;
}

ExperimentResult run_clock_measure(const ExperimentConfig& cfg, const fs::path& out) {
  ExperimentResult res;
  res.case_name = "clock_measure";
  CheckList ck{&res.checks};
  const double T = 1.0;

  const DiffusionSpec spec = constant_diffusion(1.0, 0.0);
  DriverSpec driver;
  driver.g = [](double, const Vec&, double) { return 1.0; };
  driver.phi = [](const Vec&) { return 0.0; };
  driver.gamma_bound = [](double, const Vec&) { return 0.0; };
  driver.const_K = 0.0;
  driver.const_M = 1.0;
  driver.const_L = 0.0;
  MeasureData mu;
  mu.density = [](double, const Vec&) { return 1.0; };

  const int N = static_cast<int>(cfg.param("lattice_steps", 200));
  const int nx = static_cast<int>(cfg.param("lattice_space", 161));
  const MarkovLattice lat = build_lattice(spec, TimeGrid::uniform(0.0, T, N), {-6.0}, {6.0}, nx);
  const BSDESolution sol = solve_gbsde_lattice(lat, driver, mu, {0.0});
  double err = 0.0;
  for (int k = 0; k <= N; ++k) {
    const double ref = T - lat.grid().node(k);
    for (int i = 0; i < lat.n_nodes(); ++i) err = std::max(err, std::abs(sol.y(k, i) - ref));
  }
  ck.le("lattice_clock_max_error", err, T / N, "Y_t = T - t up to the quadrature convention");
  LatticeEngine eng(lat);
  write_bsde_csv(art(res, out, "clock_lattice.csv"), eng, sol, 16);

  // Monte Carlo side
  {
    const int n_paths = static_cast<int>(cfg.param("n_paths", 5000));
    const PathBundle paths =
        simulate_paths(spec, TimeGrid::uniform(0.0, T, 100), 0.0, {0.0}, n_paths, cfg.seed, cfg.jobs);
    const FunctionalPath r = accumulate_functional(paths, mu);
    const BSDESolution mc = solve_gbsde_lsmc(paths, r, driver, 3);
    ck.le("lsmc_clock_y0_error", std::abs(mc.y0() - T), 3.0 * mc.y0_stderr() + 1e-9);
  }

  // PDE side
  {
    const SpaceTimeGrid grid = SpaceTimeGrid::make_1d(TimeGrid::uniform(0.0, T, 200), -6.0, 6.0, 81);
    const PDESolution pde = solve_parabolic_measure(grid, spec, driver, mu);
    double perr = 0.0;
    for (int k = 0; k <= 200; ++k) {
      const double ref = T - grid.time.node(k);
      for (int i = 0; i < grid.n_nodes(); ++i) perr = std::max(perr, std::abs(pde.u(k, i) - ref));
    }
    ck.le("pde_clock_max_error", perr, 1e-10);
  }

  // exact clock identity of the measure correspondence
  const double s = 0.25;
  const CorrespondenceReport cr = verify_measure_correspondence(
      spec, mu, [](double, const Vec&) { return 1.0; }, s, {0.3}, T, 200,
      static_cast<int>(cfg.param("n_paths", 5000)), cfg.seed);
  ck.le("clock_correspondence_lhs_exact", std::abs(cr.lhs - (T - s)), 1e-9);
  ck.le("clock_correspondence_gap", cr.gap, 1e-6);
  return res;
}

ExperimentResult run_gaussian_measure(const ExperimentConfig& cfg, const fs::path& out) {
  ExperimentResult res;
  res.case_name = "gaussian_measure";
  CheckList ck{&res.checks};

  const DiffusionSpec spec = constant_diffusion(1.0, 0.0);
  MeasureData mu;
  mu.density = [](double, const Vec& x) { return std::exp(-x[0] * x[0]); };
  mu.h_minus_one_pair = MeasureData::HMinusOnePair{
      [](double, const Vec& x) { return std::exp(-x[0] * x[0]); },
      [](double, const Vec&) { return Vec{0.0}; }};

  const ScalarField xi = [](double, const Vec& x) { return std::cos(x[0]); };
  const CorrespondenceReport cr =
      verify_measure_correspondence(spec, mu, xi, 0.0, {0.3}, 1.0, static_cast<int>(cfg.param("n_steps", 2000)),
                                    static_cast<int>(cfg.param("n_paths", 20000)), cfg.seed);
  ck.le("gaussian_correspondence_gap", cr.gap, 3.0 * cr.stderr_lhs,
        "lhs=" + format_double(cr.lhs) + " rhs=" + format_double(cr.rhs));

  std::ofstream f((out / "gaussian_correspondence.csv").string());
  f << "lhs,rhs,stderr,gap\n"
    << format_double(cr.lhs) << "," << format_double(cr.rhs) << "," << format_double(cr.stderr_lhs) << ","
    << format_double(cr.gap) << "\n";
  res.artifacts.push_back((out / "gaussian_correspondence.csv").string());
  return res;
}

ExperimentResult run_comparison_suite(const ExperimentConfig& cfg, const fs::path& out) {
  ExperimentResult res;
  res.case_name = "comparison_suite";
  CheckList ck{&res.checks};

  const int trials = static_cast<int>(cfg.param("trials", 50));
  const double T = 0.5;
  const int N = static_cast<int>(cfg.param("n_steps", 120));
  const int nx = static_cast<int>(cfg.param("n_space", 81));

  NormalRng rng(cfg.seed, 0xC0817);
  auto uniform = [&rng](double lo, double hi) { return lo + (hi - lo) * rng.next_uniform(); };

  double worst = 0.0;
  int worst_trial = -1;
  for (int trial = 0; trial < trials; ++trial) {
    const double c0 = uniform(0.8, 1.2);
    const double c1 = uniform(0.0, 0.3) * c0;
    const double om = uniform(0.5, 2.0);
    const double b0 = uniform(-0.25, 0.25);
    DiffusionSpec spec;
    spec.dim = 1;
    spec.a = [c0, c1, om](double, const Vec& x) {
      SquareMat m(1);
      m(0, 0) = c0 + c1 * std::sin(om * x[0]);
      return m;
    };
    spec.b = [b0, om](double, const Vec& x) { return Vec{b0 * std::cos(om * x[0])}; };
    spec.lambda_lo = c0 - c1;
    spec.lambda_hi = c0 + c1 + std::abs(b0);

    const double fy = uniform(-0.8, 0.8), fz = uniform(-0.3, 0.3), fx = uniform(-0.5, 0.5);
    const double dpos = uniform(0.0, 0.8);
    const double g0 = uniform(-0.4, 0.4), gpos = uniform(0.0, 0.5);
    const double q0 = uniform(0.0, 1.0);
    const double p0 = uniform(-0.5, 0.5), ppos = uniform(0.0, 0.6);

    DriverSpec d1;
    d1.f = [fy, fz, fx](double, const Vec& x, double y, const Vec& z) {
      return fy * std::tanh(y) + fz * z[0] + fx * std::sin(x[0]);
    };
    d1.g = [g0](double, const Vec&, double y) { return g0 * std::tanh(y); };
    d1.phi = [p0](const Vec& x) { return p0 * std::sin(x[0]); };
    d1.gamma_bound = [](double, const Vec&) { return 1.0; };
    d1.const_K = 2.0;
    d1.const_M = 1.0;
    d1.const_L = std::abs(fy) + std::abs(fz) + std::abs(g0);

    DriverSpec d2 = d1;
    d2.f = [f1 = d1.f, dpos](double t, const Vec& x, double y, const Vec& z) {
      return f1(t, x, y, z) + dpos * (1.0 + 0.5 * std::cos(x[0]));
    };
    d2.g = [g1 = d1.g, gpos](double t, const Vec& x, double y) { return g1(t, x, y) + gpos; };
    d2.phi = [phi1 = d1.phi, ppos](const Vec& x) { return phi1(x) + ppos; };

    MeasureData mu;
    mu.density = [q0](double, const Vec& x) { return q0 * (1.0 + 0.5 * std::sin(x[0])); };

    const MarkovLattice lat = build_lattice(spec, TimeGrid::uniform(0.0, T, N), {-4.0}, {4.0}, nx);
    const BSDESolution s1 = solve_gbsde_lattice(lat, d1, mu, {0.0});
    const BSDESolution s2 = solve_gbsde_lattice(lat, d2, mu, {0.0});
    const ComparisonReport rep = check_comparison(s1, s2);
    if (rep.max_violation > worst) {
      worst = rep.max_violation;
      worst_trial = trial;
    }
  }
  ck.le("comparison_max_violation", worst, 1e-6, "worst trial " + std::to_string(worst_trial));

  std::ofstream f((out / "comparison_suite.csv").string());
  f << "trials,max_violation\n" << trials << "," << format_double(worst) << "\n";
  res.artifacts.push_back((out / "comparison_suite.csv").string());
  return res;
}

ExperimentResult run_minimal_maximal(const ExperimentConfig& cfg, const fs::path& out) {
  ExperimentResult res;
  res.case_name = "minimal_maximal";
  CheckList ck{&res.checks};

  const double T = 1.0;
  const DiffusionSpec spec = constant_diffusion(1.0, 0.0);
  DriverSpec driver;
  driver.f = [](double, const Vec&, double y, const Vec&) { return std::min(std::sqrt(std::max(y, 0.0)), 1.0); };
  driver.phi = [](const Vec&) { return 0.0; };
  driver.gamma_bound = [](double, const Vec&) { return 1.0; };
  driver.const_K = 1.0;

  const int N = static_cast<int>(cfg.param("n_steps", 1000));
  const MarkovLattice lat = build_lattice(spec, TimeGrid::uniform(0.0, T, N), {-1.0}, {1.0}, 5);
  LatticeEngine eng(lat);
  const std::vector<int> schedule = cfg.schedule({1, 2, 4, 8, 16, 32, 64, 128});

  ApproximationCertificate cmin, cmax;
  const BSDESolution mn = minimal_solution(eng, driver, MeasureData::zero(), schedule, &cmin, 1e-7);
  const BSDESolution mx = maximal_solution(eng, driver, MeasureData::zero(), schedule, &cmax, 1e-7);

  ck.le("minimal_y0_abs", std::abs(mn.y(0, lat.nearest_node({0.0}))), 1e-6);
  ck.le("maximal_y0_vs_ode", std::abs(mx.y(0, lat.nearest_node({0.0})) - 0.25), 0.02 * 0.25,
        "closed-form value (T/2)^2");
  double order_violation = 0.0;
  for (std::size_t idx = 0; idx < mn.y.data().size(); ++idx)
    order_violation = std::max(order_violation, mn.y.data()[idx] - mx.y.data()[idx]);
  ck.le("minimal_below_maximal", order_violation, 1e-8);
  ck.le("minimal_monotone_violation", cmin.max_monotonicity_violation, 1e-8);
  ck.le("maximal_monotone_violation", cmax.max_monotonicity_violation, 1e-8);

  std::ofstream f((out / "minimal_maximal.csv").string());
  f << "n,minimal_gap,maximal_gap\n";
  for (std::size_t j = 0; j < cmin.schedule.size() || j < cmax.schedule.size(); ++j) {
    const int n = j < cmin.schedule.size() ? cmin.schedule[j] : cmax.schedule[j];
    f << n << ",";
    f << (j < cmin.successive_gap.size() ? format_double(cmin.successive_gap[j]) : "") << ",";
    f << (j < cmax.successive_gap.size() ? format_double(cmax.successive_gap[j]) : "") << "\n";
  }
  res.artifacts.push_back((out / "minimal_maximal.csv").string());
  return res;
}

ExperimentResult run_deterministic_barrier(const ExperimentConfig& cfg, const fs::path& out) {
  ExperimentResult res;
  res.case_name = "deterministic_barrier";
  CheckList ck{&res.checks};

  const double T = 1.0, c = cfg.param("slope", 1.0);
  const DiffusionSpec spec = constant_diffusion(1.0, 0.0);
  DriverSpec driver;
  driver.phi = [](const Vec&) { return 0.0; };
  driver.gamma_bound = [](double, const Vec&) { return 1.0; };
  driver.const_K = 1.0;
  driver.const_L = 0.0;
  auto h = [c, T](double t, const Vec&) { return c * (T - t); };

  const int N = static_cast<int>(cfg.param("n_steps", 1000));
  const double dt = T / N;
  const MarkovLattice lat = build_lattice(spec, TimeGrid::uniform(0.0, T, N), {-1.0}, {1.0}, 5);
  LatticeEngine eng(lat);
  const ObstacleSpec obs = decompose_obstacle(h, driver, spec, lat.grid());

  PenalizationReport pen_rep;
  const RBSDESolution pen =
      solve_rbsde_penalization(eng, driver, obs, cfg.schedule({4, 8, 16, 32, 64}), &pen_rep);

  const std::vector<int> n_list = cfg.n_list.empty() ? std::vector<int>{1, 2, 4, 8, 16, 32} : cfg.n_list;
  const HomographicSequenceReport seq = homographic_sequence(eng, driver, obs, n_list, pen, 1e-9);
  ck.le("homographic_monotone_violation", seq.max_monotonicity_violation, 1e-6);
  ck.le("homographic_domination_violation", seq.domination_violation, 1e-9);

  // barrier gaps sup|Y^n - S| and sup|K^n_T - cT| per n
  std::vector<double> gaps, kgaps;
  for (int n : n_list) {
    const HomographicIterate it = solve_rbsde_homographic(eng, driver, obs, n);
    double g = 0.0, kg = 0.0;
    for (int k = 0; k <= N; ++k)
      for (int i = 0; i < lat.n_nodes(); ++i)
        g = std::max(g, std::abs(it.sol.y(k, i) - h(lat.grid().node(k), lat.node(i))));
    for (int i = 0; i < lat.n_nodes(); ++i) kg = std::max(kg, std::abs(it.sol.k(N, i) - c * T));
    gaps.push_back(g);
    kgaps.push_back(kg);

    if (n == n_list.back()) {
      const LewyStampacchiaReport ls = check_lewy_stampacchia(eng, it.sol, obs, 1e-9);
      ck.add("lewy_stampacchia_iterate_violations", ls.violations, 0.0, ls.violations == 0);
      const ControlDensityReport cd = control_density(eng, it.sol, obs, 1e-9);
      ck.add("control_density_range_violations", cd.range_violations, 0.0, cd.range_violations == 0);
      double amin = 2.0;
      for (double v : cd.alpha_hat.data())
        if (!std::isnan(v)) amin = std::min(amin, v);
      ck.add("control_density_contact_limit", amin, 1.0, amin >= 1.0 - 1e-6, "alpha -> 1 on the contact set");
    }
  }
  // the scheme resolves this barrier exactly; C/n fit degenerates to C = 0
  const double scale = 1.0 + c * T;
  double gap_max = 0.0;
  for (double g : gaps) gap_max = std::max(gap_max, g);
  if (gap_max <= 1e-10 * scale) {
    ck.add("homographic_rate_fit", 0.0, 0.95, true, "exact contact: all gaps at machine precision, C=0");
  } else {
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t j = 0; j < gaps.size(); ++j) {
      const double xn = 1.0 / n_list[j];
      sxy += xn * gaps[j];
      sxx += xn * xn;
    }
    const double C = sxy / sxx;
    double ss_res = 0.0, ss_tot = 0.0, mean = 0.0;
    for (double g : gaps) mean += g;
    mean /= static_cast<double>(gaps.size());
    for (std::size_t j = 0; j < gaps.size(); ++j) {
      ss_res += (gaps[j] - C / n_list[j]) * (gaps[j] - C / n_list[j]);
      ss_tot += (gaps[j] - mean) * (gaps[j] - mean);
    }
    const double r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    ck.add("homographic_rate_fit", r2, 0.95, r2 >= 0.95, "C=" + format_double(C));
  }
  double kworst = 0.0;
  for (std::size_t j = 0; j < kgaps.size(); ++j)
    kworst = std::max(kworst, kgaps[j] - (gap_max > 1e-10 * scale ? gap_max * static_cast<double>(n_list[0]) / n_list[j] : 0.0));
  ck.le("control_terminal_gap", kworst, 5.0 * dt, "sup|K^n_T - cT| <= C/n + O(dt)");

  // the node-wise bound applies to genuine scheme controls; check the final
  // penalization iterate (extrapolated increments may overshoot transients)
  const RBSDESolution pen_last =
      solve_rbsde_penalization(eng, driver, obs, {cfg.schedule({4, 8, 16, 32, 64}).back()}, nullptr, false);
  const LewyStampacchiaReport lsp = check_lewy_stampacchia(eng, pen_last, obs, 2.0 * lat.spacing(0));
  ck.add("lewy_stampacchia_pen_violations", lsp.violations, 0.0, lsp.violations == 0);
  {
    // extrapolated penalization: residual scale c^2 T / (n_prev n_last) + O(dt)
    const auto& sched = pen_rep.schedule;
    const double n_last = sched.back(), n_prev = sched[sched.size() - 2];
    const double bound = 2.0 * c * c * T / (n_prev * n_last) + 5.0 * c * c * T * dt;
    ck.le("penalization_skorokhod", std::abs(check_skorokhod(eng, pen, obs)), bound,
          "rate O(1/n) + O(dt), extrapolation squares the 1/n term");
  }

  write_homographic_csv(art(res, out, "deterministic_barrier_sweep.csv"), seq);
  if (cfg.svg) {
    SvgLinePlot plot("homographic gaps vs n", true, true);
    std::vector<double> ns(n_list.begin(), n_list.end());
    std::vector<double> gp;
    for (double g : gaps) gp.push_back(std::max(g, 1e-18));
    plot.add_series("sup|Y^n - S|", ns, gp);
    plot.write(art(res, out, "deterministic_barrier_gaps.svg"));
  }

  // fully active space-independent PDE: u = c(T-t), reaction = c, alpha = 1
  {
    const SpaceTimeGrid grid = SpaceTimeGrid::make_1d(TimeGrid::uniform(0.0, T, N), -1.0, 1.0, 5);
    const PDESolution pde = solve_obstacle_projected(grid, spec, driver, h);
    double uerr = 0.0;
    for (int k = 0; k <= N; ++k)
      for (int i = 0; i < grid.n_nodes(); ++i)
        uerr = std::max(uerr, std::abs(pde.u(k, i) - h(grid.time.node(k), grid.node(i))));
    ck.le("pde_fully_active_u_error", uerr, 1e-9);
    const ReactionDensityReport rd = recover_reaction_density(pde, 2.0 * grid.dx);
    double amax = 0.0, amin = 2.0;
    for (double v : rd.alpha_hat.data())
      if (!std::isnan(v)) {
        amax = std::max(amax, v);
        amin = std::min(amin, v);
      }
    ck.le("pde_fully_active_alpha_error", std::max(std::abs(amax - 1.0), std::abs(amin - 1.0)), 1e-3);
    const PdeLsReport pls = check_pde_lewy_stampacchia(pde, spec, driver, 2.0 * grid.dx);
    ck.add("pde_lewy_stampacchia_violations", pls.violations, 0.0, pls.violations == 0);

    // homographic PDE family collapses onto the barrier here as well
    const PDESolution hom = solve_obstacle_homographic(grid, spec, driver, h, n_list);
    double herr = 0.0;
    for (const auto& m : hom.mu_n_sequence)
      for (int k = 0; k <= N; ++k)
        for (int i = 0; i < grid.n_nodes(); ++i)
          herr = std::max(herr, std::abs(m.u(k, i) - h(grid.time.node(k), grid.node(i))));
    ck.le("pde_homographic_exactness", herr, 1e-8);
    write_pde_csv(art(res, out, "deterministic_barrier_u.csv"), pde);
  }
  return res;
}

struct PutCase {
  DiffusionSpec spec;
  DriverSpec driver;
  std::function<double(double, const Vec&)> h;
  double kappa, rate, T;
  Vec box_lo, box_hi;
};

PutCase make_put_case(const ExperimentConfig& cfg, bool discounted) {
  PutCase pc;
  pc.kappa = cfg.param("kappa", 1.0);
  pc.rate = discounted ? cfg.param("rate", 0.1) : 0.0;
  pc.T = cfg.param("horizon", 0.5);
  const double a0 = cfg.param("a", 0.16);
  pc.spec = constant_diffusion(a0, 0.0);
  const double kappa = pc.kappa, rate = pc.rate;
  pc.driver.f = discounted
                    ? std::function<double(double, const Vec&, double, const Vec&)>(
                          [rate](double, const Vec&, double y, const Vec&) { return -rate * y; })
                    : nullptr;
  pc.driver.phi = [kappa](const Vec& x) { return std::max(kappa - x[0], 0.0); };
  pc.driver.gamma_bound = [](double, const Vec&) { return 0.0; };
  pc.driver.const_K = std::max(pc.rate, 1.0);
  pc.driver.const_L = pc.rate;
  pc.h = [kappa](double, const Vec& x) { return std::max(kappa - x[0], 0.0); };
  const double half = cfg.param("box_half", 1.7);
  pc.box_lo = {pc.kappa - half};
  pc.box_hi = {pc.kappa + half};
  return pc;
}

ExperimentResult run_american_put_style(const ExperimentConfig& cfg, const fs::path& out) {
  ExperimentResult res;
  res.case_name = "american_put_style";
  CheckList ck{&res.checks};
  const PutCase pc = make_put_case(cfg, false);

  const int N = static_cast<int>(cfg.param("n_steps", 250));
  const int nx = static_cast<int>(cfg.param("n_space", 181));
  const MarkovLattice lat = build_lattice(pc.spec, TimeGrid::uniform(0.0, pc.T, N), pc.box_lo, pc.box_hi, nx);
  LatticeEngine eng(lat);
  const ObstacleSpec obs = decompose_obstacle(pc.h, pc.driver, pc.spec, lat.grid(), lat.spacing(0));

  PenalizationReport rep;
  const RBSDESolution pen = solve_rbsde_penalization(eng, pc.driver, obs, cfg.schedule({4, 8, 16, 32, 64}), &rep);

  const SpaceTimeGrid grid = SpaceTimeGrid::make_1d(TimeGrid::uniform(0.0, pc.T, N), pc.box_lo[0], pc.box_hi[0], nx);
  const PDESolution pde = solve_obstacle_projected(grid, pc.spec, pc.driver, pc.h);

  const int i0 = lat.nearest_node({pc.kappa});
  const double u0 = pde.value_at(0.0, {pc.kappa});
  ck.le("pen_vs_projected_pde", std::abs(pen.y(0, i0) - u0), 0.01 * std::abs(u0),
        "undiscounted payoff: no early exercise, both sides European");
  // with f = 0 the payoff process is a submartingale, so the control vanishes
  double kmax = 0.0;
  for (int i = 0; i < lat.n_nodes(); ++i) kmax = std::max(kmax, pen.k(N, i));
  ck.le("control_mass", kmax, 1e-6);
  const LewyStampacchiaReport ls = check_lewy_stampacchia(eng, pen, obs, 2.0 * lat.spacing(0));
  ck.add("lewy_stampacchia_violations", ls.violations, 0.0, ls.violations == 0);

  write_rbsde_csv(art(res, out, "put_style_lattice.csv"), eng, pen, 32);
  write_pde_csv(art(res, out, "put_style_u.csv"), pde);
  return res;
}

ExperimentResult run_american_put_discounted(const ExperimentConfig& cfg, const fs::path& out) {
  ExperimentResult res;
  res.case_name = "american_put_discounted";
  CheckList ck{&res.checks};
  const PutCase pc = make_put_case(cfg, true);

  // deterministic engines at dt = 1e-3 (lattice) and 2e-3 (pde)
  const int N_lat = static_cast<int>(cfg.param("lattice_steps", 500));
  const int nx_lat = static_cast<int>(cfg.param("lattice_space", 261));
  const MarkovLattice lat = build_lattice(pc.spec, TimeGrid::uniform(0.0, pc.T, N_lat), pc.box_lo, pc.box_hi, nx_lat);
  LatticeEngine eng(lat);
  const double dx = lat.spacing(0);
  const ObstacleSpec obs = decompose_obstacle(pc.h, pc.driver, pc.spec, lat.grid(), dx);

  const int atm = lat.nearest_node({pc.kappa});
  PenalizationReport pen_rep;
  RBSDESolution pen = solve_rbsde_penalization(eng, pc.driver, obs, cfg.schedule({4, 8, 16, 32, 64}), &pen_rep);
  pen.start_index = atm;
  ck.le("penalization_monotone_violation", pen_rep.max_monotonicity_violation, 1e-6);

  const std::vector<int> n_list = cfg.n_list.empty() ? std::vector<int>{1, 2, 4, 8, 16, 32} : cfg.n_list;
  const HomographicSequenceReport seq = homographic_sequence(eng, pc.driver, obs, n_list, pen, 2.0 * dx);
  ck.le("homographic_monotone_violation", seq.max_monotonicity_violation, 1e-6);
  ck.le("homographic_domination_violation", seq.domination_violation, (dx + pc.T / N_lat));
  bool decreasing = true;
  for (std::size_t j = 1; j < seq.rows.size(); ++j)
    if (seq.rows[j].sup_gap_y > seq.rows[j - 1].sup_gap_y + 1e-12) decreasing = false;
  ck.add("homographic_gaps_decreasing", decreasing ? 1.0 : 0.0, 1.0, decreasing);
  write_homographic_csv(art(res, out, "put_homographic_sweep.csv"), seq);

  // scheme cross-validation: extrapolated homographic limit vs penalization
  {
    HomographicIterate h16 = solve_rbsde_homographic(eng, pc.driver, obs, 16);
    HomographicIterate h32 = solve_rbsde_homographic(eng, pc.driver, obs, 32);
    h16.sol.start_index = atm;
    h32.sol.start_index = atm;
    double hom_tol = 0.0, cross = 0.0;
    for (std::size_t idx = 0; idx < h32.sol.y.data().size(); ++idx) {
      const double d = h32.sol.y.data()[idx] - h16.sol.y.data()[idx];
      hom_tol = std::max(hom_tol, std::abs(d));
      cross = std::max(cross, std::abs(2.0 * h32.sol.y.data()[idx] - h16.sol.y.data()[idx] - pen.y.data()[idx]));
    }
    const double pen_tol = pen_rep.successive_gap.empty() ? 0.0 : pen_rep.successive_gap.back();
    ck.le("schemes_cross_validation", cross, 2.0 * (hom_tol + pen_tol),
          "extrapolated homographic vs extrapolated penalization");

    // Skorokhod residual at n = 32, dt = 1e-3. The penalized control only
    // charges where Y sits a gap of order Phi^-/n below the barrier, so the
    // residual scales like K_T/n; the homographic iterate also pairs the
    // kink mass against strictly positive gaps and is reported in the
    // convergence table instead.
    RBSDESolution pen32 = solve_rbsde_penalization(eng, pc.driver, obs, {32}, nullptr, false);
    pen32.start_index = atm;
    const double resid = check_skorokhod(eng, pen32, obs);
    double ymax = 0.0, ekt = 0.0;
    for (double v : pen32.y.data()) ymax = std::max(ymax, std::abs(v));
    {
      // E K_T weights each increment by the marginal at its own time
      const Array2D w = lat.marginals(pen32.start_index);
      for (int k = 0; k < N_lat; ++k)
        for (int i = 0; i < lat.n_nodes(); ++i) ekt += w(k, i) * (pen32.k(k + 1, i) - pen32.k(k, i));
    }
    ck.le("skorokhod_residual", std::abs(resid), 1e-3 * ymax * ekt,
          "E sum (Y-S) dK at n=32, dt=1e-3; E K_T = " + format_double(ekt));
  }

  RBSDESolution pen_last =
      solve_rbsde_penalization(eng, pc.driver, obs, {cfg.schedule({4, 8, 16, 32, 64}).back()}, nullptr, false);
  pen_last.start_index = atm;
  const LewyStampacchiaReport ls = check_lewy_stampacchia(eng, pen_last, obs, 2.0 * dx);
  ck.add("lewy_stampacchia_violations", ls.violations, 0.0, ls.violations == 0,
         "0 <= dK <= 1{|Y-S|<=2dx} dR + 1e-8 on " + std::to_string(ls.nodes_checked) + " nodes");
  const ControlDensityReport cd = control_density(eng, pen_last, obs, 2.0 * dx);
  ck.add("control_density_range_violations", cd.range_violations, 0.0, cd.range_violations == 0);

  // PDE side: projected oracle, homographic family, reaction density
  const int N_pde = static_cast<int>(cfg.param("pde_steps", 250));
  const int nx_pde = static_cast<int>(cfg.param("pde_space", 261));
  const SpaceTimeGrid grid =
      SpaceTimeGrid::make_1d(TimeGrid::uniform(0.0, pc.T, N_pde), pc.box_lo[0], pc.box_hi[0], nx_pde);
  const PDESolution proj = solve_obstacle_projected(grid, pc.spec, pc.driver, pc.h);
  write_pde_csv(art(res, out, "put_projected_u.csv"), proj);

  {
    std::vector<int> pde_n_list = n_list;
    const int pde_n_max = static_cast<int>(cfg.param("pde_n_max", 16384));
    for (int n = pde_n_list.back() * 2; n <= pde_n_max; n *= 2) pde_n_list.push_back(n);
    const PDESolution hom = solve_obstacle_homographic(grid, pc.spec, pc.driver, pc.h, pde_n_list);
    double dom = 0.0;
    for (const auto& m : hom.mu_n_sequence)
      for (std::size_t idx = 0; idx < m.u.data().size(); ++idx)
        dom = std::max(dom, hom.h_grid.data()[idx] - m.u.data()[idx]);
    ck.le("pde_homographic_domination", dom, 1e-9, "u_n >= h nodewise");

    const WeightSpec w(1.0);
    std::vector<PdeConvergenceRow> rows;
    Array2D diff(hom.u.rows(), hom.u.cols(), 0.0);
    double prev_gap = 1e300;
    bool l2_decreasing = true;
    for (const auto& m : hom.mu_n_sequence) {
      for (std::size_t idx = 0; idx < diff.data().size(); ++idx)
        diff.data()[idx] = m.u.data()[idx] - proj.u.data()[idx];
      PdeConvergenceRow row;
      row.n = m.n;
      for (double v : diff.data()) row.sup_gap = std::max(row.sup_gap, std::abs(v));
      row.l2_rho_gap = l2_rho_norm(grid, diff, w);
      for (int k = 0; k < N_pde; ++k)
        for (int i = 0; i < grid.n_nodes(); ++i) row.mu_mass += m.mu(k, i) * grid.dx * grid.time.dt(k);
      if (row.l2_rho_gap > prev_gap + 1e-12) l2_decreasing = false;
      prev_gap = row.l2_rho_gap;
      rows.push_back(row);
    }
    ck.add("pde_homographic_l2_gap_decreasing", l2_decreasing ? 1.0 : 0.0, 1.0, l2_decreasing);
    write_pde_convergence_csv(art(res, out, "put_pde_convergence.csv"), rows);
    if (cfg.svg) {
      SvgLinePlot plot("pde homographic gaps", true, true);
      std::vector<double> ns, l2;
      for (const auto& r : rows) {
        ns.push_back(r.n);
        l2.push_back(std::max(r.l2_rho_gap, 1e-18));
      }
      plot.add_series("L2_rho gap", ns, l2);
      plot.write(art(res, out, "put_pde_gaps.svg"));
    }

    // grid self-convergence of the homographic family itself (coarse vs
    // current grid at the largest n); the projected scheme never touches
    // the regularized kink measure, so its own halving error understates
    // the pair's discretization scale
    const int N_c = N_pde / 2, nx_c = (nx_pde + 1) / 2;
    const SpaceTimeGrid coarse =
        SpaceTimeGrid::make_1d(TimeGrid::uniform(0.0, pc.T, N_c), pc.box_lo[0], pc.box_hi[0], nx_c);
    const PDESolution hom_coarse =
        solve_obstacle_homographic(coarse, pc.spec, pc.driver, pc.h, {pde_n_list.back()});
    Array2D self_diff(static_cast<std::size_t>(N_c) + 1, static_cast<std::size_t>(nx_c), 0.0);
    for (int k = 0; k <= N_c; ++k)
      for (int i = 0; i < nx_c; ++i) self_diff(k, i) = hom_coarse.u(k, i) - hom.u(2 * k, 2 * i);
    const double self_err = l2_rho_norm(coarse, self_diff, w);
    ck.le("pde_homographic_final_gap", rows.back().l2_rho_gap, 2.0 * self_err,
          "vs projected at n=" + std::to_string(pde_n_list.back()) + "; homographic grid-halving error " +
              format_double(self_err));

    double m16 = 0.0, m32 = 0.0;
    for (const auto& r : rows) {
      if (r.n == 16) m16 = r.mu_mass;
      if (r.n == 32) m32 = r.mu_mass;
    }
    ck.le("mu_mass_cauchy", std::abs(m32 - m16), 0.05 * std::abs(m32), "total masses at n = 16 and 32");
    double proj_mass = 0.0;
    for (int k = 0; k < N_pde; ++k)
      for (int i = 0; i < grid.n_nodes(); ++i) proj_mass += proj.reaction(k, i) * grid.dx * grid.time.dt(k);
    ck.le("mu_mass_vs_projected", std::abs(m32 - proj_mass), 0.10 * std::abs(proj_mass));

    // weak pairings against three fixed smooth test functions
    const std::vector<ScalarField> tests{
        [](double, const Vec& x) { return std::exp(-x[0] * x[0]); },
        [](double t, const Vec& x) { return (1.0 + t) * std::cos(x[0]); },
        [kp = pc.kappa](double, const Vec& x) { return 1.0 / (1.0 + (x[0] - kp) * (x[0] - kp)); }};
    const PDESolution::HomographicMember* m32p = &hom.mu_n_sequence.back();
    for (const auto& m : hom.mu_n_sequence)
      if (m.n == 32) m32p = &m;
    for (std::size_t ti = 0; ti < tests.size(); ++ti) {
      double hom_pair = 0.0, proj_pair = 0.0;
      const auto& m = *m32p;
      for (int k = 0; k < N_pde; ++k) {
        const double t = grid.time.node(k);
        const double dtk = grid.time.dt(k);
        for (int i = 0; i < grid.n_nodes(); ++i) {
          const double xv = tests[ti](t, grid.node(i));
          hom_pair += xv * m.mu(k, i) * grid.dx * dtk;
          proj_pair += xv * proj.reaction(k, i) * grid.dx * dtk;
        }
      }
      ck.le("weak_pairing_test" + std::to_string(ti), std::abs(hom_pair - proj_pair), 0.10 * std::abs(proj_pair),
            "mu_n vs projected reaction");
    }
  }

  const ReactionDensityReport rd = recover_reaction_density(proj, 2.0 * grid.dx);
  ck.add("pde_reaction_range_violations", rd.range_violations, 0.0, rd.range_violations == 0,
         std::to_string(rd.defined_nodes) + " defined nodes");
  ck.le("pde_reaction_off_contact", rd.max_off_contact, 1e-8);
  const PdeLsReport pls = check_pde_lewy_stampacchia(proj, pc.spec, pc.driver, 2.0 * grid.dx);
  ck.add("pde_lewy_stampacchia_violations", pls.violations, 0.0, pls.violations == 0,
         std::to_string(pls.nodes_checked) + " nodes checked");

  if (cfg.mode == RunMode::full || cfg.mode == RunMode::bridge) {
    // reflected bridge: penalized LSMC against the projected pde values
    BridgeCase bc;
    bc.spec = pc.spec;
    bc.driver = pc.driver;
    bc.obstacle_h = pc.h;
    bc.n_steps = static_cast<int>(cfg.param("bridge_steps", 100));
    bc.n_paths = static_cast<int>(cfg.param("n_paths", 20000));
    bc.basis_order = static_cast<int>(cfg.param("basis_order", 4));
    bc.penalization_schedule = {4, 8, 16, 32};
    bc.seed = cfg.seed;
    bc.jobs = cfg.jobs;
    const std::vector<std::pair<double, Vec>> probes{{0.0, {0.85}}, {0.0, {1.0}}, {0.0, {1.15}}};
    BridgeReport br = compare_representation(proj, bc, probes, 0.0);
    for (auto& p : br.points) {
      const double tol = 3.0 * p.mc_stderr + 0.02 * std::abs(p.pde_value);
      p.pass = p.gap <= tol;
      ck.add("bridge_obstacle_x" + format_double(p.x[0]), p.gap, tol, p.pass);
    }
    write_bridge_csv(art(res, out, "put_bridge.csv"), br);

    // control-measure pairing against the reaction density
    const std::vector<ScalarField> tests{
        [](double, const Vec& x) { return std::exp(-0.5 * x[0] * x[0]); },
        [](double t, const Vec&) { return 1.0 + t; },
        [](double, const Vec& x) { return std::cos(2.0 * x[0]); }};
    const auto pairings = verify_control_measure(eng, pen, proj, pc.spec, tests, 0.0, {pc.kappa});
    for (std::size_t ti = 0; ti < pairings.size(); ++ti)
      ck.le("control_measure_test" + std::to_string(ti), pairings[ti].gap,
            3.0 * pairings[ti].stderr_lhs + 0.05 * std::abs(pairings[ti].rhs),
            "lhs=" + format_double(pairings[ti].lhs) + " rhs=" + format_double(pairings[ti].rhs));
  }
  return res;
}

ExperimentResult run_custom(const ExperimentConfig& cfg, const fs::path& out) {
  ExperimentResult res;
  res.case_name = "custom";
  const json j = json::parse(cfg.raw_json);

  auto params_of = [](const json& node) {
    std::map<std::string, double> p;
    for (auto it = node.begin(); it != node.end(); ++it)
      if (it.value().is_number()) p[it.key()] = it.value().get<double>();
    return p;
  };

  if (!j.contains("diffusion") || !j.contains("driver"))
    throw std::invalid_argument("custom case: 'diffusion' and 'driver' sections required");
  const DiffusionSpec spec = diffusion_from_family(j["diffusion"].value("family", "constant"), params_of(j["diffusion"]));
  const DriverSpec driver = driver_from_family(j["driver"].value("f", "zero"), j["driver"].value("terminal", "constant"),
                                               params_of(j["driver"]));
  MeasureData mu = MeasureData::zero();
  if (j.contains("measure")) mu = measure_from_family(j["measure"].value("family", "zero"), params_of(j["measure"]));

  const double T = cfg.param("horizon", 1.0);
  const int N = static_cast<int>(cfg.param("n_steps", 200));
  const std::string scheme = j.value("scheme", "lattice");
  if (scheme == "lattice") {
    Vec lo, hi;
    default_box(spec, TimeGrid::uniform(0.0, T, N), {cfg.param("x0", 0.0)}, lo, hi);
    const MarkovLattice lat =
        build_lattice(spec, TimeGrid::uniform(0.0, T, N), lo, hi, static_cast<int>(cfg.param("n_space", 161)));
    LatticeEngine eng(lat);
    const BSDESolution sol = solve_gbsde_lattice(lat, driver, mu, {cfg.param("x0", 0.0)});
    write_bsde_csv(art(res, out, "custom_solution.csv"), eng, sol, 64);
  } else if (scheme == "lsmc") {
    const PathBundle paths = simulate_paths(spec, TimeGrid::uniform(0.0, T, N), 0.0, {cfg.param("x0", 0.0)},
                                            static_cast<int>(cfg.param("n_paths", 10000)), cfg.seed, cfg.jobs);
    const FunctionalPath r = accumulate_functional(paths, mu);
    const BSDESolution sol = solve_gbsde_lsmc(paths, r, driver, static_cast<int>(cfg.param("basis_order", 3)));
    PathEngine eng(paths, static_cast<int>(cfg.param("basis_order", 3)));
    write_bsde_csv(art(res, out, "custom_solution.csv"), eng, sol, 64);
  } else if (scheme == "pde") {
    Vec lo, hi;
    default_box(spec, TimeGrid::uniform(0.0, T, N), {cfg.param("x0", 0.0)}, lo, hi);
    const SpaceTimeGrid grid =
        SpaceTimeGrid::make_1d(TimeGrid::uniform(0.0, T, N), lo[0], hi[0], static_cast<int>(cfg.param("n_space", 161)));
    const PDESolution sol = solve_parabolic_measure(grid, spec, driver, mu);
    write_pde_csv(art(res, out, "custom_solution.csv"), sol);
  } else {
    throw std::invalid_argument("custom case: unknown scheme '" + scheme + "'");
  }
  res.checks.push_back({"custom_run_completed", true, 1.0, 1.0, scheme});
  return res;
}

}  // namespace

const std::vector<CaseInfo>& experiment_catalog() {
  static const std::vector<CaseInfo> catalog{
      {"heat_baseline", "pure diffusion with a Gaussian terminal condition",
       "Feynman-Kac identity u(s,x) = Y_s and Z = sigma grad u on a smooth case"},
      {"ode_discount", "space-free exponential decay f(y) = -y, phi = 1",
       "closed-form backward value e^{-(T-t)} reproduced by lattice, regression Monte Carlo and the pde solver"},
      {"clock_measure", "unit measure density with g = 1: the additive functional is the clock",
       "measure term integration dY = -g dR and the exact pairing E int xi dR = T - s"},
      {"gaussian_measure", "Gaussian measure density paired against cos",
       "measure vs additive-functional correspondence E int xi dR = int int xi p q"},
      {"comparison_suite", "randomized ordered Lipschitz driver pairs on one lattice",
       "comparison: ordered terminal, driver and measure data give ordered solutions"},
      {"minimal_maximal", "square-root (non-Lipschitz) driver with zero terminal",
       "minimal/maximal solutions via monotone Lipschitz regularization; nonuniqueness gap (T/2)^2"},
      {"deterministic_barrier", "linear deterministic barrier c(T-t), exact contact",
       "homographic family: Y^n >= S, monotone decrease, K^n -> cT; Lewy-Stampacchia with equality"},
      {"american_put_style", "undiscounted put payoff: obstacle never binds",
       "inactive barrier: reflected solution equals the plain one and the control vanishes"},
      {"american_put_discounted", "discounted put: genuine free boundary",
       "penalization vs homographic vs projected pde; Skorokhod, Lewy-Stampacchia, reaction density r = alpha Phi^-"},
      {"custom", "user-defined coefficient families from the configuration file",
       "single solve of the requested scheme, exported to CSV"},
  };
  return catalog;
}

std::vector<CaseInfo> filter_catalog(const std::string& needle) {
  std::vector<CaseInfo> out;
  std::string low = needle;
  std::transform(low.begin(), low.end(), low.begin(), [](unsigned char c) { return std::tolower(c); });
  for (const auto& c : experiment_catalog()) {
    std::string hay = c.name + " " + c.description + " " + c.claim;
    std::transform(hay.begin(), hay.end(), hay.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (low.empty() || hay.find(low) != std::string::npos) out.push_back(c);
  }
  return out;
}

ExperimentConfig load_config(const std::string& path_or_name) {
  ExperimentConfig cfg;
  std::error_code ec;
  if (fs::exists(path_or_name, ec)) {
    std::ifstream f(path_or_name);
    if (!f) throw std::invalid_argument("cannot read config file " + path_or_name);
    json j;
    try {
      j = json::parse(f);
    } catch (const json::parse_error& e) {
      throw std::invalid_argument("config parse error in " + path_or_name + ": " + e.what());
    }
    if (!j.contains("schema_version") || !j["schema_version"].is_number_integer())
      throw std::invalid_argument(path_or_name + ": missing integer 'schema_version'");
    cfg.schema_version = j["schema_version"].get<int>();
    if (cfg.schema_version != 1)
      throw std::invalid_argument(path_or_name + ": unsupported schema_version " +
                                  std::to_string(cfg.schema_version));
    if (!j.contains("case") || !j["case"].is_string())
      throw std::invalid_argument(path_or_name + ": missing string 'case'");
    cfg.case_name = j["case"].get<std::string>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("params")) {
      if (!j["params"].is_object()) throw std::invalid_argument(path_or_name + ": 'params' must be an object");
      for (auto it = j["params"].begin(); it != j["params"].end(); ++it) {
        if (!it.value().is_number())
          throw std::invalid_argument(path_or_name + ": parameter '" + it.key() + "' must be numeric");
        cfg.params[it.key()] = it.value().get<double>();
      }
    }
    if (j.contains("n_list")) {
      for (const auto& v : j["n_list"]) {
        if (!v.is_number_integer() || v.get<int>() < 1)
          throw std::invalid_argument(path_or_name + ": n_list entries must be positive integers");
        cfg.n_list.push_back(v.get<int>());
      }
    }
    cfg.raw_json = j.dump();
  } else {
    cfg.case_name = path_or_name;
    cfg.raw_json = "{}";
  }

  bool known = false;
  for (const auto& c : experiment_catalog()) known = known || c.name == cfg.case_name;
  if (!known) throw std::invalid_argument("unknown case '" + cfg.case_name + "' (see the list subcommand)");
  return cfg;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const fs::path out(cfg.out_dir);
  fs::create_directories(out);

  ExperimentResult res;
  if (cfg.case_name == "heat_baseline") res = run_heat_baseline(cfg, out);
  else if (cfg.case_name == "ode_discount") res = run_ode_discount(cfg, out);
  else if (cfg.case_name == "clock_measure") res = run_clock_measure(cfg, out);
  else if (cfg.case_name == "gaussian_measure") res = run_gaussian_measure(cfg, out);
  else if (cfg.case_name == "comparison_suite") res = run_comparison_suite(cfg, out);
  else if (cfg.case_name == "minimal_maximal") res = run_minimal_maximal(cfg, out);
  else if (cfg.case_name == "deterministic_barrier") res = run_deterministic_barrier(cfg, out);
  else if (cfg.case_name == "american_put_style") res = run_american_put_style(cfg, out);
  else if (cfg.case_name == "american_put_discounted") res = run_american_put_discounted(cfg, out);
  else if (cfg.case_name == "custom") res = run_custom(cfg, out);
  else throw std::invalid_argument("unknown case '" + cfg.case_name + "'");

  write_summary_json(res, (out / (res.case_name + "_summary.json")).string());
  res.artifacts.push_back((out / (res.case_name + "_summary.json")).string());
  return res;
}

void write_summary_json(const ExperimentResult& result, const std::string& filename) {
  json j;
  j["case"] = result.case_name;
  j["pass"] = result.all_pass();
  json checks = json::array();
  for (const auto& c : result.checks) {
    json e;
    e["name"] = c.name;
    e["pass"] = c.pass;
    e["value"] = c.value;
    e["threshold"] = c.threshold;
    if (!c.detail.empty()) e["detail"] = c.detail;
    checks.push_back(e);
  }
  j["checks"] = checks;
  j["artifacts"] = result.artifacts;
  std::ofstream f(filename);
  if (!f) throw SolveError("cannot open " + filename + " for writing");
  f << j.dump(2) << "\n";
}

DiffusionSpec diffusion_from_family(const std::string& family, const std::map<std::string, double>& p) {
  auto get = [&p](const std::string& k, double d) {
    auto it = p.find(k);
    return it == p.end() ? d : it->second;
  };
  if (family == "constant") {
    return constant_diffusion(get("a", 1.0), get("b", 0.0));
  }
  if (family == "affine") {
    DiffusionSpec spec = constant_diffusion(get("a", 1.0), 0.0);
    const double b0 = get("b0", 0.0), b1 = get("b1", 0.0);
    spec.b = [b0, b1](double, const Vec& x) { return Vec{b0 + b1 * x[0]}; };
    spec.lambda_hi = std::max(spec.lambda_hi, std::abs(b0) + std::abs(b1) * 8.0);
    return spec;
  }
  if (family == "trigonometric") {
    const double c0 = get("c0", 1.0), c1 = get("c1", 0.3), om = get("omega", 1.0), b0 = get("b", 0.0);
    if (!(c0 > std::abs(c1))) throw std::invalid_argument("trigonometric family: need c0 > |c1| for ellipticity");
    DiffusionSpec spec;
    spec.dim = 1;
    spec.a = [c0, c1, om](double, const Vec& x) {
      SquareMat m(1);
      const double s = c0 + c1 * std::sin(om * x[0]);
      m(0, 0) = s * s;
      return m;
    };
    spec.b = [b0, om](double, const Vec& x) { return Vec{b0 * std::cos(om * x[0])}; };
    spec.lambda_lo = (c0 - std::abs(c1)) * (c0 - std::abs(c1));
    spec.lambda_hi = (c0 + std::abs(c1)) * (c0 + std::abs(c1)) + std::abs(b0);
    return spec;
  }
  throw std::invalid_argument("unknown diffusion family '" + family + "'");
}

DriverSpec driver_from_family(const std::string& f_family, const std::string& terminal_family,
                              const std::map<std::string, double>& p) {
  auto get = [&p](const std::string& k, double d) {
    auto it = p.find(k);
    return it == p.end() ? d : it->second;
  };
  DriverSpec d;
  d.gamma_bound = [](double, const Vec&) { return 1.0; };
  if (f_family == "zero") {
    d.const_K = 1.0;
    d.const_L = 0.0;
  } else if (f_family == "discount") {
    const double r = get("rate", 1.0);
    d.f = [r](double, const Vec&, double y, const Vec&) { return -r * y; };
    d.const_K = std::max(1.0, std::abs(r));
    d.const_L = std::abs(r);
  } else if (f_family == "linear") {
    const double cy = get("c_y", 0.0), cz = get("c_z", 0.0), c0 = get("c_0", 0.0);
    d.f = [cy, cz, c0](double, const Vec&, double y, const Vec& z) { return cy * y + cz * z[0] + c0; };
    d.const_K = std::abs(cy) + std::abs(cz) + std::abs(c0) + 1.0;
    d.const_L = std::abs(cy) + std::abs(cz);
  } else if (f_family == "sqrt_capped") {
    const double off = get("offset", 0.0);
    d.f = [off](double, const Vec&, double y, const Vec&) {
      return std::min(std::sqrt(std::max(y, 0.0)), 1.0) + off;
    };
    d.const_K = 1.0 + std::abs(off);
  } else {
    throw std::invalid_argument("unknown driver family '" + f_family + "'");
  }
  const double gv = get("g", 0.0);
  if (gv != 0.0) {
    d.g = [gv](double, const Vec&, double) { return gv; };
    d.const_M = std::abs(gv);
  }

  if (terminal_family == "constant") {
    const double v = get("value", 0.0);
    d.phi = [v](const Vec&) { return v; };
  } else if (terminal_family == "identity") {
    d.phi = [](const Vec& x) { return x[0]; };
  } else if (terminal_family == "gaussian_pdf") {
    d.phi = [](const Vec& x) { return normal_pdf(x[0]); };
  } else if (terminal_family == "put") {
    const double kappa = get("kappa", 1.0);
    d.phi = [kappa](const Vec& x) { return std::max(kappa - x[0], 0.0); };
  } else {
    throw std::invalid_argument("unknown terminal family '" + terminal_family + "'");
  }
  return d;
}

MeasureData measure_from_family(const std::string& family, const std::map<std::string, double>& p) {
  auto get = [&p](const std::string& k, double d) {
    auto it = p.find(k);
    return it == p.end() ? d : it->second;
  };
  MeasureData m;
  if (family == "zero") return MeasureData::zero();
  if (family == "constant") {
    const double q = get("q", 1.0);
    if (q < 0.0) throw std::invalid_argument("measure density must be nonnegative");
    m.density = [q](double, const Vec&) { return q; };
    return m;
  }
  if (family == "gaussian") {
    const double q = get("q", 1.0);
    m.density = [q](double, const Vec& x) { return q * std::exp(-x[0] * x[0]); };
    return m;
  }
  if (family == "quadratic") {
    const double q = get("q", 1.0);
    m.density = [q](double, const Vec& x) { return q * x[0] * x[0]; };
    return m;
  }
  throw std::invalid_argument("unknown measure family '" + family + "'");
}

}  // namespace bsdelab
