#include "bsdelab/lattice.hpp"

#include <algorithm>
#include <cmath>

#include "bsdelab/errors.hpp"

namespace bsdelab {

namespace {

// per-dimension trinomial weights on {-dx, 0, +dx} matching mean m and
// second moment v + m^2 exactly
struct Triple {
  double down, stay, up;
};

Triple moment_triple(double m, double v, double dx) {
  const double s = (v + m * m) / (dx * dx);
  const double drift = m / dx;
  Triple t;
  t.up = 0.5 * (s + drift);
  t.down = 0.5 * (s - drift);
  t.stay = 1.0 - s;
  return t;
}

}  // namespace

void default_box(const DiffusionSpec& spec, const TimeGrid& grid, const Vec& center, Vec& lo, Vec& hi) {
  const double span = grid.horizon() - grid.t0();
  const double half = 6.0 * std::sqrt(spec.lambda_hi * span);
  lo.resize(center.size());
  hi.resize(center.size());
  for (std::size_t c = 0; c < center.size(); ++c) {
    lo[c] = center[c] - half;
    hi[c] = center[c] + half;
  }
}

MarkovLattice build_lattice(const DiffusionSpec& spec, const TimeGrid& grid, const Vec& space_lo,
                            const Vec& space_hi, int n_space) {
  if (spec.dim > 2) throw std::invalid_argument("build_lattice: only 1D and 2D supported");
  if (n_space < 3) throw std::invalid_argument("build_lattice: need at least three nodes per dimension");

  MarkovLattice lat;
  lat.grid_ = grid;
  lat.dim_ = spec.dim;
  lat.stencil_ = spec.dim == 1 ? 3 : 9;
  lat.lo_ = space_lo;
  lat.hi_ = space_hi;
  lat.shape_.assign(static_cast<std::size_t>(spec.dim), n_space);
  lat.dx_.resize(static_cast<std::size_t>(spec.dim));
  for (int c = 0; c < spec.dim; ++c)
    lat.dx_[static_cast<std::size_t>(c)] =
        (space_hi[static_cast<std::size_t>(c)] - space_lo[static_cast<std::size_t>(c)]) / (n_space - 1);

  const int n_nodes = spec.dim == 1 ? n_space : n_space * n_space;
  lat.nodes_.reserve(static_cast<std::size_t>(n_nodes));
  for (int i = 0; i < n_nodes; ++i) {
    Vec x(static_cast<std::size_t>(spec.dim));
    if (spec.dim == 1) {
      x[0] = space_lo[0] + i * lat.dx_[0];
    } else {
      x[0] = space_lo[0] + (i % n_space) * lat.dx_[0];
      x[1] = space_lo[1] + (i / n_space) * lat.dx_[1];
    }
    lat.nodes_.push_back(std::move(x));
  }

  // probe time dependence of the coefficients on a coarse sample
  lat.homogeneous_ = true;
  {
    const double t0 = grid.t0(), t1 = grid.horizon();
    for (int i = 0; i < n_nodes && lat.homogeneous_; i += std::max(1, n_nodes / 7)) {
      const Vec& x = lat.nodes_[static_cast<std::size_t>(i)];
      const SquareMat a0 = spec.a(t0, x), a1 = spec.a(0.5 * (t0 + t1), x), a2 = spec.a(t1, x);
      const Vec b0 = spec.ito_drift(t0, x), b2 = spec.ito_drift(t1, x);
      for (int r = 0; r < spec.dim; ++r) {
        for (int c = 0; c < spec.dim; ++c)
          if (a0(r, c) != a1(r, c) || a0(r, c) != a2(r, c)) lat.homogeneous_ = false;
        if (b0[static_cast<std::size_t>(r)] != b2[static_cast<std::size_t>(r)]) lat.homogeneous_ = false;
      }
    }
  }

  const int n_steps_stored = lat.homogeneous_ ? 1 : grid.n_steps();
  lat.steps_.resize(static_cast<std::size_t>(n_steps_stored));

  double worst_ratio = 0.0;  // max of (v + m^2)/dx^2 over nodes/steps
  for (int ks = 0; ks < n_steps_stored; ++ks) {
    auto& sd = lat.steps_[static_cast<std::size_t>(ks)];
    sd.idx.assign(static_cast<std::size_t>(n_nodes) * lat.stencil_, 0);
    sd.prob.assign(static_cast<std::size_t>(n_nodes) * lat.stencil_, 0.0);
    sd.db.assign(static_cast<std::size_t>(n_nodes) * lat.stencil_ * spec.dim, 0.0);
    const double t = grid.node(ks);
    const double dt = grid.dt(ks);

    for (int i = 0; i < n_nodes; ++i) {
      const Vec& x = lat.nodes_[static_cast<std::size_t>(i)];
      const SquareMat a = spec.a(t, x);
      if (spec.dim == 2 && std::abs(a(0, 1)) > 1e-12)
        throw std::invalid_argument("build_lattice: 2D lattice requires diagonal a (tensor trinomial)");
      const Vec drift = spec.ito_drift(t, x);
      const SquareMat sig = sigma_from_a(a, "lattice node " + std::to_string(i));

      Triple tri[2];
      int coord[2] = {0, 0};
      if (spec.dim == 1) {
        coord[0] = i;
      } else {
        coord[0] = i % n_space;
        coord[1] = i / n_space;
      }
      for (int c = 0; c < spec.dim; ++c) {
        const double m = drift[static_cast<std::size_t>(c)] * dt;
        const double v = a(c, c) * dt;
        const double dx = lat.dx_[static_cast<std::size_t>(c)];
        worst_ratio = std::max(worst_ratio, (v + m * m) / (dx * dx));
        Triple tr = moment_triple(m, v, dx);
        if (tr.stay < -1e-12 || tr.up < -1e-12 || tr.down < -1e-12) {
          if (tr.stay < -1e-12) {
            // time refinement fixes a violated stay weight; report it below
            tri[c] = tr;
            continue;
          }
          throw SolveError("build_lattice: negative transition weight; reduce dx or drift (node " +
                           std::to_string(i) + ")");
        }
        tri[c] = tr;
      }
      if (worst_ratio > 1.0 + 1e-12) {
        const double span = grid.horizon() - grid.t0();
        const int needed = static_cast<int>(std::ceil(grid.n_steps() * worst_ratio * (1.0 + 1e-9)));
        throw SolveError("build_lattice: CFL condition a*dt/dx^2 <= 1 violated (ratio " +
                         std::to_string(worst_ratio) + "); use n_steps >= " + std::to_string(needed) +
                         " over horizon " + std::to_string(span));
      }

      // boundary nodes absorb: the chain stops there (negligible mass on a
      // 6-sigma box, and no spurious drift bias at the edges)
      bool absorbing = false;
      for (int c = 0; c < spec.dim; ++c)
        if (coord[c] == 0 || coord[c] == n_space - 1) absorbing = true;
      if (absorbing) {
        const std::size_t base = static_cast<std::size_t>(i) * lat.stencil_;
        sd.idx[base] = i;
        sd.prob[base] = 1.0;
        for (int e = 1; e < lat.stencil_; ++e) {
          sd.idx[base + static_cast<std::size_t>(e)] = i;
          sd.prob[base + static_cast<std::size_t>(e)] = 0.0;
        }
        continue;
      }

      // tensor product rows; db = sigma^{-1}(x_j - x_i - drift dt)
      const int offsets1[3] = {-1, 0, 1};
      const double w1[3] = {tri[0].down, tri[0].stay, tri[0].up};
      const double w2[3] = {spec.dim == 2 ? tri[1].down : 1.0, spec.dim == 2 ? tri[1].stay : 1.0,
                            spec.dim == 2 ? tri[1].up : 1.0};
      int e = 0;
      const int n2 = spec.dim == 2 ? 3 : 1;
      for (int o2 = 0; o2 < n2; ++o2) {
        for (int o1 = 0; o1 < 3; ++o1, ++e) {
          int j;
          Vec disp(static_cast<std::size_t>(spec.dim), 0.0);
          if (spec.dim == 1) {
            int cj = std::clamp(coord[0] + offsets1[o1], 0, n_space - 1);
            j = cj;
            disp[0] = (cj - coord[0]) * lat.dx_[0];
          } else {
            int cj0 = std::clamp(coord[0] + offsets1[o1], 0, n_space - 1);
            int cj1 = std::clamp(coord[1] + offsets1[o2], 0, n_space - 1);
            j = cj1 * n_space + cj0;
            disp[0] = (cj0 - coord[0]) * lat.dx_[0];
            disp[1] = (cj1 - coord[1]) * lat.dx_[1];
          }
          const double p = w1[o1] * (spec.dim == 2 ? w2[o2] : 1.0);
          const std::size_t base = (static_cast<std::size_t>(i) * lat.stencil_ + static_cast<std::size_t>(e));
          sd.idx[base] = j;
          sd.prob[base] = p;
          // forward-solve lower-triangular sigma for the dB surrogate
          Vec rhs(static_cast<std::size_t>(spec.dim));
          for (int c = 0; c < spec.dim; ++c)
            rhs[static_cast<std::size_t>(c)] = disp[static_cast<std::size_t>(c)] - drift[static_cast<std::size_t>(c)] * dt;
          for (int c = 0; c < spec.dim; ++c) {
            double s = rhs[static_cast<std::size_t>(c)];
            for (int kk = 0; kk < c; ++kk) s -= sig(c, kk) * sd.db[base * static_cast<std::size_t>(spec.dim) + static_cast<std::size_t>(kk)];
            sd.db[base * static_cast<std::size_t>(spec.dim) + static_cast<std::size_t>(c)] = s / sig(c, c);
          }
        }
      }
    }
  }
  return lat;
}

int MarkovLattice::nearest_node(const Vec& x) const {
  int idx[2] = {0, 0};
  const int n_space = shape_[0];
  for (int c = 0; c < dim_; ++c) {
    const double pos = (x[static_cast<std::size_t>(c)] - lo_[static_cast<std::size_t>(c)]) / dx_[static_cast<std::size_t>(c)];
    idx[c] = std::clamp(static_cast<int>(std::lround(pos)), 0, shape_[static_cast<std::size_t>(c)] - 1);
  }
  return dim_ == 1 ? idx[0] : idx[1] * n_space + idx[0];
}

void MarkovLattice::row(int k, int i, const int*& idx, const double*& prob, const double*& db) const {
  const StepData& sd = step(k);
  const std::size_t base = static_cast<std::size_t>(i) * stencil_;
  idx = sd.idx.data() + base;
  prob = sd.prob.data() + base;
  db = sd.db.data() + base * static_cast<std::size_t>(dim_);
}

void MarkovLattice::condition(int k, const std::vector<double>& y_next, std::vector<double>& cont,
                              std::vector<std::vector<double>>& z) const {
  const int n = n_nodes();
  const double dt = grid_.dt(k);
  cont.assign(static_cast<std::size_t>(n), 0.0);
  z.assign(static_cast<std::size_t>(dim_), std::vector<double>(static_cast<std::size_t>(n), 0.0));
  const int* idx;
  const double* prob;
  const double* db;
  for (int i = 0; i < n; ++i) {
    row(k, i, idx, prob, db);
    double c0 = 0.0;
    double zc[2] = {0.0, 0.0};
    for (int e = 0; e < stencil_; ++e) {
      const double py = prob[e] * y_next[static_cast<std::size_t>(idx[e])];
      c0 += py;
      for (int c = 0; c < dim_; ++c) zc[c] += py * db[e * dim_ + c];
    }
    cont[static_cast<std::size_t>(i)] = c0;
    for (int c = 0; c < dim_; ++c) z[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)] = zc[c] / dt;
  }
}

Array2D MarkovLattice::marginals(int start_index) const {
  const int n = n_nodes();
  const int N = grid_.n_steps();
  Array2D m(static_cast<std::size_t>(N) + 1, static_cast<std::size_t>(n), 0.0);
  m(0, start_index) = 1.0;
  const int* idx;
  const double* prob;
  const double* db;
  for (int k = 0; k < N; ++k) {
    for (int i = 0; i < n; ++i) {
      const double w = m(k, i);
      if (w == 0.0) continue;
      row(k, i, idx, prob, db);
      for (int e = 0; e < stencil_; ++e) m(k + 1, idx[e]) += w * prob[e];
    }
  }
  return m;
}

Array2D MarkovLattice::dense_transition(int k) const {
  const int n = n_nodes();
  Array2D p(static_cast<std::size_t>(n), static_cast<std::size_t>(n), 0.0);
  const int* idx;
  const double* prob;
  const double* db;
  for (int i = 0; i < n; ++i) {
    row(k, i, idx, prob, db);
    for (int e = 0; e < stencil_; ++e) p(i, idx[e]) += prob[e];
  }
  return p;
}

}  // namespace bsdelab
