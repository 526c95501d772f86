#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "bsdelab/errors.hpp"
#include "bsdelab/inf_convolution.hpp"
#include "bsdelab/linalg.hpp"
#include "bsdelab/specs.hpp"
#include "bsdelab/time_grid.hpp"
#include "bsdelab/weights.hpp"
#include "support/oracles.hpp"

using namespace bsdelab;

TEST_CASE("weight evaluation") {
  CHECK(weight_eval(WeightSpec(1.0), Vec{0.0}) == doctest::Approx(1.0));
  CHECK(weight_eval(WeightSpec(0.0), Vec{3.7, -1.2}) == doctest::Approx(1.0));
  CHECK(weight_eval(WeightSpec(1.0), Vec{1.0, 0.0}) == doctest::Approx(0.5));
  CHECK_THROWS_AS(WeightSpec(-0.5), std::invalid_argument);

  // radially decreasing
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  WeightSpec w(1.7);
  for (int i = 0; i < 200; ++i) {
    const double a = u(rng), b = u(rng);
    if (std::abs(a) <= std::abs(b)) CHECK(weight_eval(w, a) >= weight_eval(w, b));
  }
}

TEST_CASE("sigma factorization") {
  SUBCASE("identity") {
    const SquareMat s = sigma_from_a(SquareMat::identity(2), "test");
    CHECK(s(0, 0) == doctest::Approx(1.0));
    CHECK(s(1, 1) == doctest::Approx(1.0));
    CHECK(s(0, 1) == doctest::Approx(0.0));
  }
  SUBCASE("diagonal square root") {
    const SquareMat s = sigma_from_a(SquareMat::diag({4.0, 9.0}), "test");
    CHECK(s(0, 0) == doctest::Approx(2.0));
    CHECK(s(1, 1) == doctest::Approx(3.0));
  }
  SUBCASE("recomposition is the oracle") {
    SquareMat a(2);
    a(0, 0) = 2.0; a(0, 1) = 1.0; a(1, 0) = 1.0; a(1, 1) = 2.0;
    const SquareMat s = sigma_from_a(a, "test");
    const SquareMat back = s.multiply_transposed();
    double num = 0.0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) num += (back(i, j) - a(i, j)) * (back(i, j) - a(i, j));
    CHECK(std::sqrt(num) / a.frobenius_norm() <= 1e-12);
  }
  SUBCASE("indefinite input fails naming the point") {
    DiffusionSpec spec;
    spec.dim = 2;
    spec.a = [](double, const Vec&) {
      SquareMat m(2);
      m(0, 0) = 1.0; m(0, 1) = 2.0; m(1, 0) = 2.0; m(1, 1) = 1.0;
      return m;
    };
    try {
      spec.sigma(0.25, {1.5, -0.5});
      FAIL("expected a decomposition error");
    } catch (const SolveError& e) {
      const std::string what = e.what();
      CHECK(what.find("t=0.25") != std::string::npos);
      CHECK(what.find("1.5") != std::string::npos);
    }
  }
}

TEST_CASE("inf-convolution") {
  std::vector<Vec> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back({-1.0 + 0.1 * i});

  SUBCASE("constant function") {
    auto f = [](const Vec&) { return 3.25; };
    CHECK(inf_convolution(f, 5, grid, {0.33}) == doctest::Approx(3.25));
  }
  SUBCASE("1-Lipschitz function is already its own regularization") {
    auto f = [](const Vec& x) { return std::abs(x[0]); };
    // 0.3 is a grid node, so the minimum is attained there exactly
    CHECK(inf_convolution(f, 1, grid, {0.3}) == doctest::Approx(0.3));
    CHECK(inf_convolution(f, 4, grid, {0.3}) == doctest::Approx(0.3));
  }
  SUBCASE("sqrt against the brute-force oracle") {
    auto f1 = [](double x) { return std::sqrt(std::abs(x)); };
    auto f = [&](const Vec& x) { return f1(x[0]); };
    std::vector<Vec> fine;
    for (int i = 0; i < 10000; ++i) fine.push_back({-1.0 + 2.0 * i / 9999.0});
    const double expected = oracles::inf_convolution_brute(f1, 2, -1.0, 1.0, 10000, 0.0);
    CHECK(inf_convolution(f, 2, fine, {0.0}) == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("empty grid") {
    auto f = [](const Vec&) { return 0.0; };
    CHECK_THROWS_AS(inf_convolution(f, 1, {}, {0.0}), std::invalid_argument);
  }
  SUBCASE("monotone in n and below f at grid points") {
    auto f = [](const Vec& x) { return std::sqrt(std::abs(x[0])) + 0.3 * std::sin(5.0 * x[0]); };
    for (const Vec& q : grid) {
      double prev = -1e300;
      for (int n : {1, 2, 4, 8}) {
        const double v = inf_convolution(f, n, grid, q);
        CHECK(v >= prev - 1e-12);
        CHECK(v <= f(q) + 1e-12);
        prev = v;
      }
    }
  }
  SUBCASE("n-Lipschitz in the query") {
    auto f = [](const Vec& x) { return x[0] * x[0] * 3.0; };
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(-1.3, 1.3);
    for (int n : {1, 3, 7}) {
      for (int i = 0; i < 100; ++i) {
        const double a = u(rng), b = u(rng);
        const double fa = inf_convolution(f, n, grid, {a});
        const double fb = inf_convolution(f, n, grid, {b});
        CHECK(std::abs(fa - fb) <= n * std::abs(a - b) + 1e-12);
      }
    }
  }
  SUBCASE("fast 1D evaluator agrees with the grid minimum exactly") {
    auto f1 = [](double x) { return std::cos(3.0 * x) + 0.5 * std::abs(x); };
    const int pts = 501;
    InfConvolution1D fast(f1, 3, -2.0, 2.0, pts);
    std::mt19937 rng(13);
    std::uniform_real_distribution<double> u(-2.5, 2.5);
    for (int i = 0; i < 300; ++i) {
      const double q = u(rng);
      const double slow = oracles::inf_convolution_brute(f1, 3, -2.0, 2.0, pts, q);
      CHECK(fast(q) == doctest::Approx(slow).epsilon(1e-13));
    }
  }
}

TEST_CASE("time grid") {
  const TimeGrid g = TimeGrid::uniform(0.5, 2.0, 6);
  CHECK(g.n_steps() == 6);
  CHECK(g.node(0) == doctest::Approx(0.5));
  CHECK(g.horizon() == doctest::Approx(2.0));
  CHECK(g.dt(3) == doctest::Approx(0.25));
  CHECK_THROWS_AS(TimeGrid::uniform(1.0, 1.0, 4), std::invalid_argument);
  CHECK_THROWS_AS(TimeGrid::uniform(0.0, 1.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(TimeGrid::from_nodes({0.0, 0.5, 0.5}), std::invalid_argument);
}

TEST_CASE("diffusion spec") {
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

  SUBCASE("divergence by finite differences matches the analytic derivative") {
    for (double x : {-1.2, 0.0, 0.7, 2.5}) {
      const double analytic = 2.0 * (1.0 + 0.5 * std::sin(x)) * 0.5 * std::cos(x);
      CHECK(spec.div_a_at(0.0, {x})[0] == doctest::Approx(analytic).epsilon(1e-6));
    }
  }
  SUBCASE("ito drift adds half the divergence") {
    const double x = 0.4;
    const double expected = 0.5 * 2.0 * (1.0 + 0.5 * std::sin(x)) * 0.5 * std::cos(x);
    CHECK(spec.ito_drift(0.0, {x})[0] == doctest::Approx(expected).epsilon(1e-6));
  }
  SUBCASE("ellipticity probing") {
    CHECK_NOTHROW(spec.validate({{0.0}, {1.0}, {-2.0}}, 0.0, 1.0));
    DiffusionSpec bad = spec;
    bad.lambda_hi = 0.5;  // too small for the probed quadratic form
    CHECK_THROWS_AS(bad.validate({{1.4}}, 0.0, 1.0), SolveError);
  }
}

TEST_CASE("driver growth validation") {
  DriverSpec d;
  d.f = [](double, const Vec&, double y, const Vec&) { return 3.0 * y; };
  d.gamma_bound = [](double, const Vec&) { return 0.0; };
  d.const_K = 1.0;  // violated: |f| = 3|y| > K|y|
  CHECK_THROWS_AS(d.validate({{0.0, Vec{0.0}, 1.0, Vec{0.0}}}), SolveError);
  d.const_K = 3.0;
  CHECK_NOTHROW(d.validate({{0.0, Vec{0.0}, 1.0, Vec{0.0}}}));
}

TEST_CASE("measure pairing against its H^-1 representation") {
  MeasureData mu;
  mu.density = [](double, const Vec& x) { return std::exp(-x[0] * x[0]); };
  mu.h_minus_one_pair = MeasureData::HMinusOnePair{
      [](double, const Vec& x) { return std::exp(-x[0] * x[0]); },
      [](double, const Vec&) { return Vec{0.0}; }};
  auto eta = [](double t, double x) { return (1.0 + t) * std::cos(x); };
  auto eta_dx = [](double t, double x) { return -(1.0 + t) * std::sin(x); };
  CHECK(pairing_gap(mu, eta, eta_dx, 0.0, 1.0, -6.0, 6.0, 64, 400) <= 1e-10);

  MeasureData no_pair;
  no_pair.density = mu.density;
  CHECK_THROWS_AS(pairing_gap(no_pair, eta, eta_dx, 0.0, 1.0, -1.0, 1.0, 4, 4), std::invalid_argument);
}

TEST_CASE("tridiagonal and least squares") {
  SUBCASE("thomas solve verified by substitution") {
    const Vec lower{-1.0, -1.0}, diag{2.0, 2.0, 2.0}, upper{-1.0, -1.0};
    const Vec rhs{1.0, 0.0, 1.0};
    const Vec x = solve_tridiagonal(lower, diag, upper, rhs);
    CHECK(2.0 * x[0] - x[1] == doctest::Approx(1.0));
    CHECK(-x[0] + 2.0 * x[1] - x[2] == doctest::Approx(0.0));
    CHECK(-x[1] + 2.0 * x[2] == doctest::Approx(1.0));
  }
  SUBCASE("projection reproduces exactly representable targets") {
    std::mt19937 rng(3);
    std::normal_distribution<double> g(0.0, 1.0);
    const int m = 400;
    Vec ones(m, 1.0), x(m), target(m);
    for (int i = 0; i < m; ++i) {
      x[static_cast<std::size_t>(i)] = g(rng);
      target[static_cast<std::size_t>(i)] = 2.0 - 3.0 * x[static_cast<std::size_t>(i)];
    }
    const Vec fit = least_squares_fit({ones, x}, target, "test");
    for (int i = 0; i < m; ++i)
      CHECK(fit[static_cast<std::size_t>(i)] == doctest::Approx(target[static_cast<std::size_t>(i)]).epsilon(1e-9));
  }
  SUBCASE("collinear design is rejected with context") {
    std::mt19937 rng(5);
    std::normal_distribution<double> g(0.0, 1.0);
    const int m = 100;
    Vec ones(m, 1.0), x(m), x2(m), target(m, 0.0);
    for (int i = 0; i < m; ++i) {
      x[static_cast<std::size_t>(i)] = g(rng);
      x2[static_cast<std::size_t>(i)] = 2.0 * x[static_cast<std::size_t>(i)] + 1.0;
    }
    try {
      least_squares_fit({ones, x, x2}, target, "time step 7");
      FAIL("expected rank-deficiency");
    } catch (const SolveError& e) {
      CHECK(std::string(e.what()).find("time step 7") != std::string::npos);
    }
  }
}
