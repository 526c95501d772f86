#include "bsdelab/csv.hpp"

#include <cstdio>
#include <fstream>

#include "bsdelab/errors.hpp"

namespace bsdelab {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::ofstream open_or_throw(const std::string& filename) {
  std::ofstream f(filename);
  if (!f) throw SolveError("cannot open " + filename + " for writing");
  return f;
}

}  // namespace

void write_bsde_csv(const std::string& filename, const BackwardEngine& engine, const BSDESolution& sol,
                    int max_states) {
  std::ofstream f = open_or_throw(filename);
  const int m = max_states > 0 ? std::min(max_states, engine.n_states()) : engine.n_states();
  const int N = sol.grid.n_steps();
  f << "node,time,state";
  for (int c = 0; c < engine.dim(); ++c) f << ",x" << c;
  f << ",y";
  for (int c = 0; c < engine.dim(); ++c) f << ",z" << c;
  f << "\n";
  for (int k = 0; k <= N; ++k)
    for (int i = 0; i < m; ++i) {
      f << k << "," << format_double(sol.grid.node(k)) << "," << i;
      const Vec x = engine.state(k, i);
      for (double v : x) f << "," << format_double(v);
      f << "," << format_double(sol.y(k, i));
      for (int c = 0; c < engine.dim(); ++c) f << "," << format_double(sol.z[static_cast<std::size_t>(c)](k, i));
      f << "\n";
    }
}

void write_rbsde_csv(const std::string& filename, const BackwardEngine& engine, const RBSDESolution& sol,
                     int max_states) {
  std::ofstream f = open_or_throw(filename);
  const int m = max_states > 0 ? std::min(max_states, engine.n_states()) : engine.n_states();
  const int N = sol.grid.n_steps();
  f << "node,time,state";
  for (int c = 0; c < engine.dim(); ++c) f << ",x" << c;
  f << ",y";
  for (int c = 0; c < engine.dim(); ++c) f << ",z" << c;
  f << ",k\n";
  for (int k = 0; k <= N; ++k)
    for (int i = 0; i < m; ++i) {
      f << k << "," << format_double(sol.grid.node(k)) << "," << i;
      const Vec x = engine.state(k, i);
      for (double v : x) f << "," << format_double(v);
      f << "," << format_double(sol.y(k, i));
      for (int c = 0; c < engine.dim(); ++c) f << "," << format_double(sol.z[static_cast<std::size_t>(c)](k, i));
      f << "," << format_double(sol.k(k, i)) << "\n";
    }
}

void write_pde_csv(const std::string& filename, const PDESolution& sol) {
  std::ofstream f = open_or_throw(filename);
  const SpaceTimeGrid& g = sol.grid;
  f << "t";
  for (int i = 0; i < g.n_nodes(); ++i) {
    const Vec x = g.node(i);
    f << ",u(";
    for (std::size_t c = 0; c < x.size(); ++c) f << (c ? "|" : "") << format_double(x[c]);
    f << ")";
  }
  f << "\n";
  for (int k = 0; k <= g.time.n_steps(); ++k) {
    f << format_double(g.time.node(k));
    for (int i = 0; i < g.n_nodes(); ++i) f << "," << format_double(sol.u(k, i));
    f << "\n";
  }
}

void write_pde_convergence_csv(const std::string& filename, const std::vector<PdeConvergenceRow>& rows) {
  std::ofstream f = open_or_throw(filename);
  f << "n,sup_gap,l2_rho_gap,mu_mass\n";
  for (const auto& r : rows)
    f << r.n << "," << format_double(r.sup_gap) << "," << format_double(r.l2_rho_gap) << ","
      << format_double(r.mu_mass) << "\n";
}

void write_homographic_csv(const std::string& filename, const HomographicSequenceReport& rep) {
  std::ofstream f = open_or_throw(filename);
  f << "n,sup_gap_y,int_gap_z,sup_gap_k,skorokhod,ls_violations\n";
  for (const auto& r : rep.rows)
    f << r.n << "," << format_double(r.sup_gap_y) << "," << format_double(r.int_gap_z) << ","
      << format_double(r.sup_gap_k) << "," << format_double(r.skorokhod) << "," << r.ls_violations << "\n";
}

void write_bridge_csv(const std::string& filename, const BridgeReport& rep) {
  std::ofstream f = open_or_throw(filename);
  f << "s,x,pde_value,mc_value,mc_stderr,gap,pass\n";
  for (const auto& p : rep.points) {
    f << format_double(p.s) << ",";
    for (std::size_t c = 0; c < p.x.size(); ++c) f << (c ? "|" : "") << format_double(p.x[c]);
    f << "," << format_double(p.pde_value) << "," << format_double(p.mc_value) << ","
      << format_double(p.mc_stderr) << "," << format_double(p.gap) << "," << (p.pass ? 1 : 0) << "\n";
  }
}

namespace {

constexpr std::uint64_t kSolutionMagic = 0x62736f6c31303000ULL;  // "bsol100"

}  // namespace

void write_solution_binary(const std::string& filename, const BSDESolution& sol) {
  std::ofstream f(filename, std::ios::binary);
  if (!f) throw SolveError("cannot open " + filename + " for writing");
  auto u64 = [&f](std::uint64_t v) { f.write(reinterpret_cast<const char*>(&v), 8); };
  auto f64 = [&f](double v) { f.write(reinterpret_cast<const char*>(&v), 8); };
  u64(kSolutionMagic);
  u64(sol.mode == SolveMode::lattice ? 0 : 1);
  u64(sol.z.size());
  u64(sol.y.cols());
  u64(static_cast<std::uint64_t>(sol.grid.n_steps()));
  f64(sol.grid.t0());
  f64(sol.grid.horizon());
  f.write(reinterpret_cast<const char*>(sol.y.data().data()),
          static_cast<std::streamsize>(sol.y.data().size() * sizeof(double)));
  for (const auto& plane : sol.z)
    f.write(reinterpret_cast<const char*>(plane.data().data()),
            static_cast<std::streamsize>(plane.data().size() * sizeof(double)));
}

BSDESolution read_solution_binary(const std::string& filename) {
  std::ifstream f(filename, std::ios::binary);
  if (!f) throw SolveError("cannot open " + filename);
  auto u64 = [&f]() {
    std::uint64_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  auto f64 = [&f]() {
    double v = 0;
    f.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  if (u64() != kSolutionMagic) throw SolveError(filename + ": not a solution file");
  BSDESolution sol;
  sol.mode = u64() == 0 ? SolveMode::lattice : SolveMode::monte_carlo;
  const std::size_t d = u64();
  const std::size_t m = u64();
  const int N = static_cast<int>(u64());
  const double t0 = f64(), T = f64();
  sol.grid = TimeGrid::uniform(t0, T, N);
  sol.y = Array2D(static_cast<std::size_t>(N) + 1, m);
  sol.z.assign(d, Array2D(static_cast<std::size_t>(N) + 1, m));
  f.read(reinterpret_cast<char*>(sol.y.data().data()),
         static_cast<std::streamsize>(sol.y.data().size() * sizeof(double)));
  for (auto& plane : sol.z)
    f.read(reinterpret_cast<char*>(plane.data().data()),
           static_cast<std::streamsize>(plane.data().size() * sizeof(double)));
  if (!f) throw SolveError(filename + ": truncated solution file");
  return sol;
}

}  // namespace bsdelab
