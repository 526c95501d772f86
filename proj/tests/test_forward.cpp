#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "bsdelab/gaussian.hpp"
#include "bsdelab/lattice.hpp"
#include "bsdelab/paths.hpp"
#include "support/oracles.hpp"

using namespace bsdelab;

namespace {

DiffusionSpec brownian() {
  DiffusionSpec spec;
  spec.dim = 1;
  spec.a = [](double, const Vec&) { return SquareMat::identity(1); };
  spec.b = [](double, const Vec&) { return Vec{0.0}; };
  spec.lambda_lo = spec.lambda_hi = 1.0;
  spec.div_a = [](double, const Vec&) { return Vec{0.0}; };
  return spec;
}

}  // namespace

TEST_CASE("euler paths: brownian moments") {
  const DiffusionSpec spec = brownian();
  const TimeGrid grid = TimeGrid::uniform(0.0, 1.0, 50);
  const int n = 20000;
  const PathBundle paths = simulate_paths(spec, grid, 0.0, {0.4}, n, 42);

  double mean = 0.0, var = 0.0;
  for (int p = 0; p < n; ++p) mean += paths.x[0](p, 50) - 0.4;
  mean /= n;
  for (int p = 0; p < n; ++p) {
    const double d = paths.x[0](p, 50) - 0.4 - mean;
    var += d * d;
  }
  var /= (n - 1.0);
  const double se_mean = std::sqrt(var / n);
  CHECK(std::abs(mean) <= 3.0 * se_mean);
  // Var(X_T - x) = T; the variance estimator has SE ~ var * sqrt(2/n)
  CHECK(std::abs(var - 1.0) <= 3.0 * std::sqrt(2.0 / n));
}

TEST_CASE("euler paths: constant drift") {
  DiffusionSpec spec = brownian();
  spec.b = [](double, const Vec&) { return Vec{0.7}; };
  spec.lambda_hi = 1.0;
  const TimeGrid grid = TimeGrid::uniform(0.0, 0.5, 25);
  const int n = 20000;
  const PathBundle paths = simulate_paths(spec, grid, 0.0, {0.0}, n, 43);
  double mean = 0.0, var = 0.0;
  for (int p = 0; p < n; ++p) mean += paths.x[0](p, 25);
  mean /= n;
  for (int p = 0; p < n; ++p) var += (paths.x[0](p, 25) - mean) * (paths.x[0](p, 25) - mean);
  var /= (n - 1.0);
  CHECK(std::abs(mean - 0.7 * 0.5) <= 3.0 * std::sqrt(var / n));
}

TEST_CASE("euler paths: deterministic reproducibility") {
  DiffusionSpec spec = brownian();
  const TimeGrid grid = TimeGrid::uniform(0.0, 1.0, 20);
  const PathBundle a = simulate_paths(spec, grid, 0.0, {0.0}, 500, 777);
  const PathBundle b = simulate_paths(spec, grid, 0.0, {0.0}, 500, 777);
  CHECK(a.x[0].data() == b.x[0].data());
  CHECK(a.db[0].data() == b.db[0].data());
  // partitioning into jobs must not change anything (per-path streams)
  const PathBundle c = simulate_paths(spec, grid, 0.0, {0.0}, 500, 777, 4);
  CHECK(a.x[0].data() == c.x[0].data());
  const PathBundle d = simulate_paths(spec, grid, 0.0, {0.0}, 500, 778);
  CHECK(a.x[0].data() != d.x[0].data());
}

TEST_CASE("euler paths: divergence-form coefficient, fine-grid reference") {
  // frozen from a 10^6-path run at N = 512 (dev-time oracle):
  //   E[X_T] = 0.42017306, SE = 8.8e-4   (x0 = 0.3, T = 1)
  const double reference_mean = 0.42017306;
  const double reference_se = 0.00088;

  DiffusionSpec spec;
  spec.dim = 1;
  spec.a = [](double, const Vec& x) {
    SquareMat m(1);
    const double s = 1.0 + 0.5 * std::sin(x[0]);
    m(0, 0) = s * s;
    return m;
  };
  spec.b = [](double, const Vec&) { return Vec{0.0}; };
  spec.lambda_lo = 0.25;
  spec.lambda_hi = 2.25;

  const TimeGrid grid = TimeGrid::uniform(0.0, 1.0, 64);
  const int n = 100000;
  const PathBundle paths = simulate_paths(spec, grid, 0.0, {0.3}, n, 4242);
  double mean = 0.0, var = 0.0;
  for (int p = 0; p < n; ++p) mean += paths.x[0](p, 64);
  mean /= n;
  for (int p = 0; p < n; ++p) var += (paths.x[0](p, 64) - mean) * (paths.x[0](p, 64) - mean);
  var /= (n - 1.0);
  const double combined = 3.0 * (std::sqrt(var / n) + reference_se) + 2e-3;  // weak-error allowance at N=64
  CHECK(std::abs(mean - reference_mean) <= combined);
}

TEST_CASE("euler paths: start time must match the grid") {
  DiffusionSpec spec = brownian();
  const TimeGrid grid = TimeGrid::uniform(0.5, 1.0, 10);
  CHECK_THROWS_AS(simulate_paths(spec, grid, 0.0, {0.0}, 10, 1), std::invalid_argument);
}

TEST_CASE("lattice: moment-matched rows") {
  DiffusionSpec spec = brownian();
  SUBCASE("full CFL ratio gives the half/half row") {
    // dt/dx^2 = 1: interior row (1/2, 0, 1/2)
    const TimeGrid grid = TimeGrid::uniform(0.0, 1.0, 100);  // dt = 0.01
    const MarkovLattice lat = build_lattice(spec, grid, {-2.0}, {2.0}, 41);  // dx = 0.1
    const int *idx; const double *p, *db;
    lat.row(0, 20, idx, p, db);
    CHECK(p[0] == doctest::Approx(0.5));
    CHECK(p[1] == doctest::Approx(0.0));
    CHECK(p[2] == doctest::Approx(0.5));
  }
  SUBCASE("half CFL ratio gives the quarter/half/quarter row") {
    const TimeGrid grid = TimeGrid::uniform(0.0, 1.0, 200);  // dt = 0.005
    const MarkovLattice lat = build_lattice(spec, grid, {-2.0}, {2.0}, 41);
    const int *idx; const double *p, *db;
    lat.row(0, 20, idx, p, db);
    CHECK(p[0] == doctest::Approx(0.25));
    CHECK(p[1] == doctest::Approx(0.5));
    CHECK(p[2] == doctest::Approx(0.25));
  }
  SUBCASE("rows are stochastic and nonnegative; moments match") {
    DiffusionSpec varying;
    varying.dim = 1;
    varying.a = [](double, const Vec& x) {
      SquareMat m(1);
      m(0, 0) = 0.8 + 0.3 * std::sin(x[0]);
      return m;
    };
    varying.b = [](double, const Vec& x) { return Vec{0.2 * std::cos(x[0])}; };
    varying.lambda_lo = 0.5;
    varying.lambda_hi = 1.3;
    const TimeGrid grid = TimeGrid::uniform(0.0, 0.5, 200);
    const MarkovLattice lat = build_lattice(varying, grid, {-3.0}, {3.0}, 61);
    const int *idx; const double *p, *db;
    for (int i = 0; i < lat.n_nodes(); ++i) {
      lat.row(0, i, idx, p, db);
      double sum = 0.0, m1 = 0.0, m2 = 0.0;
      for (int e = 0; e < 3; ++e) {
        CHECK(p[e] >= -1e-15);
        sum += p[e];
        const double disp = (lat.node(idx[e])[0] - lat.node(i)[0]);
        m1 += p[e] * disp;
        m2 += p[e] * disp * disp;
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
      if (i > 0 && i + 1 < lat.n_nodes()) {
        const double dt = grid.dt(0);
        const double drift = varying.ito_drift(0.0, lat.node(i))[0] * dt;
        const double var = varying.a(0.0, lat.node(i))(0, 0) * dt;
        CHECK(m1 == doctest::Approx(drift).epsilon(1e-10));
        CHECK(m2 - m1 * m1 == doctest::Approx(var).epsilon(1e-10));
      }
    }
  }
  SUBCASE("CFL violation reports the required step count") {
    const TimeGrid grid = TimeGrid::uniform(0.0, 1.0, 10);  // dt = 0.1 too big for dx = 0.1
    try {
      build_lattice(spec, grid, {-2.0}, {2.0}, 41);
      FAIL("expected CFL error");
    } catch (const SolveError& e) {
      CHECK(std::string(e.what()).find("n_steps >=") != std::string::npos);
    }
  }
}

TEST_CASE("lattice: chapman-kolmogorov composition") {
  DiffusionSpec spec = brownian();
  const TimeGrid grid = TimeGrid::uniform(0.0, 0.2, 4);
  const MarkovLattice lat = build_lattice(spec, grid, {-1.5}, {1.5}, 13);
  const int n = lat.n_nodes();
  const Array2D p01 = lat.dense_transition(0);
  const Array2D p12 = lat.dense_transition(1);
  const Array2D p23 = lat.dense_transition(2);
  // ((P01 P12) P23) == (P01 (P12 P23)) exactly up to fp roundoff
  auto mul = [n](const Array2D& a, const Array2D& b) {
    Array2D c(static_cast<std::size_t>(n), static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) {
        const double w = a(i, k);
        if (w == 0.0) continue;
        for (int j = 0; j < n; ++j) c(i, j) += w * b(k, j);
      }
    return c;
  };
  const Array2D left = mul(mul(p01, p12), p23);
  const Array2D right = mul(p01, mul(p12, p23));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) CHECK(left(i, j) == doctest::Approx(right(i, j)).epsilon(1e-13));
  // and rows of the composition remain stochastic
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += left(i, j);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("lattice: terminal law close to the gaussian kernel") {
  DiffusionSpec spec = brownian();
  const TimeGrid grid = TimeGrid::uniform(0.0, 1.0, 200);
  const MarkovLattice lat = build_lattice(spec, grid, {-6.0}, {6.0}, 171);
  const Array2D w = lat.marginals(lat.nearest_node({0.0}));
  // Kolmogorov distance between the chain law at T and N(0,1)
  double cdf = 0.0, worst = 0.0;
  for (int i = 0; i < lat.n_nodes(); ++i) {
    cdf += w(200, i);
    const double x = lat.node(i)[0] + 0.5 * lat.spacing(0);
    const double ref = 0.5 * std::erfc(-x / std::sqrt(2.0));
    worst = std::max(worst, std::abs(cdf - ref));
  }
  CHECK(worst <= 0.01);
}

TEST_CASE("2d lattice: tensor rows") {
  DiffusionSpec spec;
  spec.dim = 2;
  spec.a = [](double, const Vec&) { return SquareMat::diag({1.0, 4.0}); };
  spec.b = [](double, const Vec&) { return Vec{0.0, 0.0}; };
  spec.lambda_lo = 1.0;
  spec.lambda_hi = 4.0;
  spec.div_a = [](double, const Vec&) { return Vec{0.0, 0.0}; };
  const TimeGrid grid = TimeGrid::uniform(0.0, 0.1, 100);
  const MarkovLattice lat = build_lattice(spec, grid, {-2.0, -4.0}, {2.0, 4.0}, 21);
  const int *idx; const double *p, *db;
  int mid = lat.nearest_node({0.0, 0.0});
  lat.row(0, mid, idx, p, db);
  double sum = 0.0;
  for (int e = 0; e < lat.stencil(); ++e) sum += p[e];
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

  DiffusionSpec cross = spec;
  cross.a = [](double, const Vec&) {
    SquareMat m(2);
    m(0, 0) = 1.0; m(0, 1) = 0.2; m(1, 0) = 0.2; m(1, 1) = 1.0;
    return m;
  };
  CHECK_THROWS_AS(build_lattice(cross, grid, {-2.0, -2.0}, {2.0, 2.0}, 11), std::invalid_argument);
}

TEST_CASE("additive functional accumulation") {
  DiffusionSpec spec = brownian();
  const TimeGrid grid = TimeGrid::uniform(0.0, 1.0, 40);
  const PathBundle paths = simulate_paths(spec, grid, 0.0, {0.3}, 4000, 11);

  SUBCASE("zero density") {
    MeasureData mu = MeasureData::zero();
    const FunctionalPath r = accumulate_functional(paths, mu);
    CHECK(r.r(17, 40) == 0.0);
  }
  SUBCASE("unit density is the clock") {
    MeasureData mu;
    mu.density = [](double, const Vec&) { return 1.0; };
    const FunctionalPath r = accumulate_functional(paths, mu);
    for (int k = 0; k <= 40; ++k) CHECK(r.r(3, k) == doctest::Approx(grid.node(k)).epsilon(1e-13));
  }
  SUBCASE("additivity over subintervals is exact") {
    MeasureData mu;
    mu.density = [](double, const Vec& x) { return x[0] * x[0]; };
    const FunctionalPath r = accumulate_functional(paths, mu);
    for (int p = 0; p < 50; ++p)
      CHECK(r.r(p, 40) - r.r(p, 13) == doctest::Approx((r.r(p, 40) - r.r(p, 25)) + (r.r(p, 25) - r.r(p, 13))));
    // nondecreasing
    for (int p = 0; p < 50; ++p)
      for (int k = 0; k < 40; ++k) CHECK(r.r(p, k + 1) >= r.r(p, k));
  }
  SUBCASE("quadratic density matches the gaussian-moment quadrature") {
    // E R_T = int_0^T E[X_t^2] dt = int_0^T (x0^2 + t) dt
    MeasureData mu;
    mu.density = [](double, const Vec& x) { return x[0] * x[0]; };
    const FunctionalPath r = accumulate_functional(paths, mu);
    double mean = 0.0, var = 0.0;
    for (int p = 0; p < paths.n_paths; ++p) mean += r.r(p, 40);
    mean /= paths.n_paths;
    for (int p = 0; p < paths.n_paths; ++p) var += (r.r(p, 40) - mean) * (r.r(p, 40) - mean);
    var /= (paths.n_paths - 1.0);
    // left-point quadrature of the oracle integrand on the same grid
    double expected = 0.0;
    for (int k = 0; k < 40; ++k) expected += (0.09 + grid.node(k)) * grid.dt(k);
    CHECK(std::abs(mean - expected) <= 3.0 * std::sqrt(var / paths.n_paths));
  }
  SUBCASE("negative density rejected") {
    MeasureData mu;
    mu.density = [](double, const Vec& x) { return x[0]; };  // negative for x < 0
    CHECK_THROWS_AS(accumulate_functional(paths, mu), SolveError);
  }
}

TEST_CASE("gaussian transition density") {
  const SquareMat a1 = SquareMat::identity(1);
  const Vec b0{0.0};
  SUBCASE("standard normal at the center") {
    CHECK(gaussian_density(0.0, {0.2}, 1.0, {0.2}, a1, b0) == doctest::Approx(0.3989422804).epsilon(1e-9));
  }
  SUBCASE("normalization by quadrature") {
    const double total = oracles::simpson(
        [&](double y) { return gaussian_density(0.0, {0.0}, 1.0, {y}, a1, b0); }, -10.0, 10.0, 2000);
    CHECK(std::abs(total - 1.0) <= 1e-8);
  }
  SUBCASE("2d covariance recovered by quadrature") {
    const SquareMat a2 = SquareMat::diag({1.0, 4.0});
    const Vec b2{0.0, 0.0};
    const double tau = 0.7;
    // integrate y0^2 p and y1^2 p over the plane with nested Simpson
    auto moment = [&](int c) {
      return oracles::simpson(
          [&](double y0) {
            return oracles::simpson(
                [&](double y1) {
                  const double p = gaussian_density(0.0, {0.0, 0.0}, tau, {y0, y1}, a2, b2);
                  return (c == 0 ? y0 * y0 : y1 * y1) * p;
                },
                -14.0, 14.0, 320);
          },
          -8.0, 8.0, 320);
    };
    CHECK(std::abs(moment(0) - 1.0 * tau) <= 1e-6);
    CHECK(std::abs(moment(1) - 4.0 * tau) <= 1e-6);
  }
  SUBCASE("needs t beyond s") {
    CHECK_THROWS_AS(gaussian_density(1.0, {0.0}, 1.0, {0.0}, a1, b0), std::invalid_argument);
  }
}

TEST_CASE("path bundle binary round trip") {
  DiffusionSpec spec = brownian();
  const TimeGrid grid = TimeGrid::uniform(0.25, 1.0, 12);
  const PathBundle paths = simulate_paths(spec, grid, 0.25, {0.1}, 64, 2024);
  const std::string file = (std::filesystem::temp_directory_path() / "bsdelab_paths_test.bin").string();
  write_paths_binary(paths, file);
  const PathBundle back = read_paths_binary(file);
  CHECK(back.seed == paths.seed);
  CHECK(back.n_paths == paths.n_paths);
  CHECK(back.x[0].data() == paths.x[0].data());
  CHECK(back.db[0].data() == paths.db[0].data());
  std::filesystem::remove(file);
}
