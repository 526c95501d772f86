#pragma once

// Test-only reference implementations, kept independent of the library's
// solution paths: plain quadratures, a fixed-step Runge-Kutta integrator
// and closed forms used to freeze expected values.

#include <cmath>
#include <functional>
#include <vector>

namespace oracles {

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846); }

/// heat semigroup of the standard normal pdf at backward time t (horizon T)
inline double heat_of_gaussian(double t, double x, double T) {
  const double var = 1.0 + (T - t);
  return normal_pdf(x / std::sqrt(var)) / std::sqrt(var);
}

/// classical RK4 for y' = rhs(t, y), integrated backward from y(T) = yT
/// with n fixed steps; returns y(t_target)
inline double rk4_backward(const std::function<double(double, double)>& rhs, double T, double yT,
                           double t_target, int n_steps) {
  double t = T, y = yT;
  const double dt = (T - t_target) / n_steps;
  for (int i = 0; i < n_steps; ++i) {
    const double k1 = rhs(t, y);
    const double k2 = rhs(t - 0.5 * dt, y - 0.5 * dt * k1);
    const double k3 = rhs(t - 0.5 * dt, y - 0.5 * dt * k2);
    const double k4 = rhs(t - dt, y - dt * k3);
    y -= dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t -= dt;
  }
  return y;
}

/// composite Simpson on [a, b] with n (even) intervals
inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double acc = f(a) + f(b);
  for (int i = 1; i < n; ++i) acc += (i % 2 == 1 ? 4.0 : 2.0) * f(a + i * h);
  return acc * h / 3.0;
}

/// brute-force Lipschitz regularization over an explicit uniform grid
inline double inf_convolution_brute(const std::function<double(double)>& f, int n, double lo, double hi,
                                    int points, double query) {
  double best = 1e300;
  for (int i = 0; i < points; ++i) {
    const double y = lo + (hi - lo) * i / (points - 1);
    best = std::min(best, f(y) + n * std::abs(query - y));
  }
  return best;
}

}  // namespace oracles
