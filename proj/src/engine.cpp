#include "bsdelab/engine.hpp"

#include <algorithm>
#include <cmath>

#include "bsdelab/errors.hpp"

namespace bsdelab {

NodeField LatticeEngine::measure_increments(const MeasureData& mu, std::optional<double> cap) const {
  const MarkovLattice* lat = lat_;
  ScalarField q = mu.density ? mu.density : ScalarField([](double, const Vec&) { return 0.0; });
  if (!cap) {
    return [lat, q](int k, int i) { return q(lat->grid().node(k), lat->node(i)) * lat->grid().dt(k); };
  }
  // deterministic clock truncation
  const int N = lat->grid().n_steps();
  auto factors = std::make_shared<std::vector<double>>(static_cast<std::size_t>(N), 1.0);
  double clock = 0.0;
  for (int k = 0; k < N; ++k) {
    double qmax = 0.0;
    for (int i = 0; i < lat->n_nodes(); ++i)
      qmax = std::max(qmax, q(lat->grid().node(k), lat->node(i)));
    const double inc = qmax * lat->grid().dt(k);
    double f = 1.0;
    if (inc > 0.0) f = std::clamp((*cap - clock) / inc, 0.0, 1.0);
    (*factors)[static_cast<std::size_t>(k)] = f;
    clock += inc;
  }
  return [lat, q, factors](int k, int i) {
    return q(lat->grid().node(k), lat->node(i)) * lat->grid().dt(k) * (*factors)[static_cast<std::size_t>(k)];
  };
}

PathEngine::PathEngine(const PathBundle& paths, int basis_order, std::vector<ScalarField> extra_basis)
    : paths_(&paths), basis_order_(basis_order), extra_basis_(std::move(extra_basis)) {
  if (basis_order < 0) throw std::invalid_argument("path engine: negative basis order");
  // n_paths >= 10x basis dimension keeps the regression sane
  std::size_t basis_dim = 1 + extra_basis_.size();
  if (paths.dim == 1) {
    basis_dim += static_cast<std::size_t>(basis_order);
  } else {
    basis_dim += static_cast<std::size_t>((basis_order + 1) * (basis_order + 2) / 2) - 1;
  }
  if (static_cast<std::size_t>(paths.n_paths) < 10 * basis_dim)
    throw std::invalid_argument("path engine: need n_paths >= 10 x basis dimension (" +
                                std::to_string(10 * basis_dim) + ")");
}

std::vector<Vec> PathEngine::basis_columns(int k) const {
  const int m = paths_->n_paths;
  std::vector<Vec> cols;
  cols.emplace_back(static_cast<std::size_t>(m), 1.0);
  if (paths_->dim == 1) {
    Vec x(static_cast<std::size_t>(m));
    for (int p = 0; p < m; ++p) x[static_cast<std::size_t>(p)] = paths_->x[0](p, k);
    Vec pow = x;
    for (int d = 1; d <= basis_order_; ++d) {
      cols.push_back(pow);
      for (int p = 0; p < m; ++p) pow[static_cast<std::size_t>(p)] *= x[static_cast<std::size_t>(p)];
    }
  } else {
    // monomials x^i y^j with i + j <= order
    std::vector<Vec> xs(static_cast<std::size_t>(paths_->dim), Vec(static_cast<std::size_t>(m)));
    for (int c = 0; c < paths_->dim; ++c)
      for (int p = 0; p < m; ++p)
        xs[static_cast<std::size_t>(c)][static_cast<std::size_t>(p)] = paths_->x[static_cast<std::size_t>(c)](p, k);
    for (int total = 1; total <= basis_order_; ++total)
      for (int i = 0; i <= total; ++i) {
        const int j = total - i;
        Vec col(static_cast<std::size_t>(m), 1.0);
        for (int p = 0; p < m; ++p) {
          double v = 1.0;
          for (int e = 0; e < i; ++e) v *= xs[0][static_cast<std::size_t>(p)];
          for (int e = 0; e < j; ++e) v *= xs[1][static_cast<std::size_t>(p)];
          col[static_cast<std::size_t>(p)] = v;
        }
        cols.push_back(std::move(col));
      }
  }
  const double t = paths_->grid.node(k);
  for (const ScalarField& f : extra_basis_) {
    Vec col(static_cast<std::size_t>(m));
    for (int p = 0; p < m; ++p) col[static_cast<std::size_t>(p)] = f(t, paths_->state(p, k));
    cols.push_back(std::move(col));
  }
  return cols;
}

void PathEngine::condition(int k, const std::vector<double>& y_next, std::vector<double>& cont,
                           std::vector<std::vector<double>>& z) const {
  const int m = paths_->n_paths;
  const double dt = paths_->grid.dt(k);
  LeastSquares ls(basis_columns(k), "regression at time step " + std::to_string(k));
  cont = ls.fit(y_next);
  z.assign(static_cast<std::size_t>(paths_->dim), std::vector<double>(static_cast<std::size_t>(m), 0.0));
  Vec target(static_cast<std::size_t>(m));
  for (int c = 0; c < paths_->dim; ++c) {
    for (int p = 0; p < m; ++p)
      target[static_cast<std::size_t>(p)] =
          y_next[static_cast<std::size_t>(p)] * paths_->db[static_cast<std::size_t>(c)](p, k) / dt;
    z[static_cast<std::size_t>(c)] = ls.fit(target);
  }
}

NodeField PathEngine::measure_increments(const MeasureData& mu, std::optional<double> cap) const {
  auto r = std::make_shared<FunctionalPath>(accumulate_functional(*paths_, mu));
  const double level = cap.value_or(std::numeric_limits<double>::infinity());
  return [r, level](int k, int p) {
    const double a = std::min(r->r(p, k), level);
    const double b = std::min(r->r(p, k + 1), level);
    return b - a;
  };
}

}  // namespace bsdelab
