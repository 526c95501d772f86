#include "bsdelab/paths.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <thread>

#include "bsdelab/errors.hpp"
#include "bsdelab/rng.hpp"

namespace bsdelab {

namespace {

void simulate_block(const DiffusionSpec& spec, const TimeGrid& grid, const Vec& x0, std::uint64_t seed,
                    int p_begin, int p_end, std::vector<Array2D>& x, std::vector<Array2D>& db) {
  const int N = grid.n_steps();
  const int d = spec.dim;
  Vec xk(static_cast<std::size_t>(d)), dB(static_cast<std::size_t>(d));
  for (int p = p_begin; p < p_end; ++p) {
    NormalRng rng(seed, static_cast<std::uint64_t>(p));
    for (int c = 0; c < d; ++c) {
      xk[static_cast<std::size_t>(c)] = x0[static_cast<std::size_t>(c)];
      x[static_cast<std::size_t>(c)](p, 0) = x0[static_cast<std::size_t>(c)];
    }
    for (int k = 0; k < N; ++k) {
      const double t = grid.node(k);
      const double dt = grid.dt(k);
      const double sq = std::sqrt(dt);
      for (int c = 0; c < d; ++c) dB[static_cast<std::size_t>(c)] = sq * rng.next_normal();
      const Vec drift = spec.ito_drift(t, xk);
      const SquareMat sig = spec.sigma(t, xk);
      const Vec diff = sig.apply(dB);
      for (int c = 0; c < d; ++c) {
        xk[static_cast<std::size_t>(c)] += drift[static_cast<std::size_t>(c)] * dt + diff[static_cast<std::size_t>(c)];
        x[static_cast<std::size_t>(c)](p, k + 1) = xk[static_cast<std::size_t>(c)];
        db[static_cast<std::size_t>(c)](p, k) = dB[static_cast<std::size_t>(c)];
      }
    }
  }
}

}  // namespace

PathBundle simulate_paths(const DiffusionSpec& spec, const TimeGrid& grid, double s, const Vec& x0,
                          int n_paths, std::uint64_t seed, int jobs) {
  if (std::abs(s - grid.t0()) > 1e-12)
    throw std::invalid_argument("simulate_paths: start time must equal the first grid node");
  if (n_paths < 1) throw std::invalid_argument("simulate_paths: need at least one path");
  if (static_cast<int>(x0.size()) != spec.dim) throw std::invalid_argument("simulate_paths: start dimension mismatch");

  PathBundle out;
  out.grid = grid;
  out.start_time = s;
  out.start_x = x0;
  out.n_paths = n_paths;
  out.dim = spec.dim;
  out.seed = seed;
  const int N = grid.n_steps();
  out.x.assign(static_cast<std::size_t>(spec.dim), Array2D(static_cast<std::size_t>(n_paths), static_cast<std::size_t>(N) + 1));
  out.db.assign(static_cast<std::size_t>(spec.dim), Array2D(static_cast<std::size_t>(n_paths), static_cast<std::size_t>(N)));

  jobs = std::max(1, jobs);
  if (jobs == 1 || n_paths < 2 * jobs) {
    simulate_block(spec, grid, x0, seed, 0, n_paths, out.x, out.db);
  } else {
    std::vector<std::thread> workers;
    const int chunk = (n_paths + jobs - 1) / jobs;
    for (int w = 0; w < jobs; ++w) {
      const int lo = w * chunk;
      const int hi = std::min(n_paths, lo + chunk);
      if (lo >= hi) break;
      workers.emplace_back([&, lo, hi] { simulate_block(spec, grid, x0, seed, lo, hi, out.x, out.db); });
    }
    for (auto& t : workers) t.join();
  }
  return out;
}

FunctionalPath accumulate_functional(const PathBundle& paths, const MeasureData& mu) {
  const int N = paths.grid.n_steps();
  FunctionalPath out;
  out.r = Array2D(static_cast<std::size_t>(paths.n_paths), static_cast<std::size_t>(N) + 1);
  for (int p = 0; p < paths.n_paths; ++p) {
    double acc = 0.0;
    out.r(p, 0) = 0.0;
    for (int k = 0; k < N; ++k) {
      const double q = mu.q(paths.grid.node(k), paths.state(p, k));
      if (q < 0.0)
        throw SolveError("accumulate_functional: negative density sample at t=" + std::to_string(paths.grid.node(k)) +
                         ", path " + std::to_string(p));
      acc += q * paths.grid.dt(k);
      out.r(p, k + 1) = acc;
    }
  }
  return out;
}

namespace {

constexpr std::uint64_t kPathsMagic = 0x70626e646c313030ULL;  // "pbndl100"

void write_u64(std::ofstream& f, std::uint64_t v) { f.write(reinterpret_cast<const char*>(&v), 8); }
void write_f64(std::ofstream& f, double v) { f.write(reinterpret_cast<const char*>(&v), 8); }
std::uint64_t read_u64(std::ifstream& f) {
  std::uint64_t v = 0;
  f.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
double read_f64(std::ifstream& f) {
  double v = 0;
  f.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

}  // namespace

void write_paths_binary(const PathBundle& paths, const std::string& filename) {
  std::ofstream f(filename, std::ios::binary);
  if (!f) throw SolveError("cannot open " + filename + " for writing");
  write_u64(f, kPathsMagic);
  write_u64(f, static_cast<std::uint64_t>(paths.dim));
  write_u64(f, static_cast<std::uint64_t>(paths.n_paths));
  write_u64(f, static_cast<std::uint64_t>(paths.grid.n_steps()));
  write_u64(f, paths.seed);
  write_f64(f, paths.start_time);
  write_f64(f, paths.grid.horizon());
  for (double v : paths.start_x) write_f64(f, v);
  for (const auto& plane : paths.x)
    f.write(reinterpret_cast<const char*>(plane.data().data()),
            static_cast<std::streamsize>(plane.data().size() * sizeof(double)));
  for (const auto& plane : paths.db)
    f.write(reinterpret_cast<const char*>(plane.data().data()),
            static_cast<std::streamsize>(plane.data().size() * sizeof(double)));
}

PathBundle read_paths_binary(const std::string& filename) {
  std::ifstream f(filename, std::ios::binary);
  if (!f) throw SolveError("cannot open " + filename);
  if (read_u64(f) != kPathsMagic) throw SolveError(filename + ": not a path bundle file");
  PathBundle out;
  out.dim = static_cast<int>(read_u64(f));
  out.n_paths = static_cast<int>(read_u64(f));
  const int N = static_cast<int>(read_u64(f));
  out.seed = read_u64(f);
  out.start_time = read_f64(f);
  const double T = read_f64(f);
  out.grid = TimeGrid::uniform(out.start_time, T, N);
  out.start_x.resize(static_cast<std::size_t>(out.dim));
  for (double& v : out.start_x) v = read_f64(f);
  out.x.assign(static_cast<std::size_t>(out.dim), Array2D(static_cast<std::size_t>(out.n_paths), static_cast<std::size_t>(N) + 1));
  out.db.assign(static_cast<std::size_t>(out.dim), Array2D(static_cast<std::size_t>(out.n_paths), static_cast<std::size_t>(N)));
  for (auto& plane : out.x)
    f.read(reinterpret_cast<char*>(plane.data().data()),
           static_cast<std::streamsize>(plane.data().size() * sizeof(double)));
  for (auto& plane : out.db)
    f.read(reinterpret_cast<char*>(plane.data().data()),
           static_cast<std::streamsize>(plane.data().size() * sizeof(double)));
  if (!f) throw SolveError(filename + ": truncated path bundle");
  return out;
}

void write_paths_csv(const PathBundle& paths, const std::string& filename) {
  std::ofstream f(filename);
  if (!f) throw SolveError("cannot open " + filename + " for writing");
  f << "path,node,time";
  for (int c = 0; c < paths.dim; ++c) f << ",x" << c;
  f << "\n";
  char buf[64];
  for (int p = 0; p < paths.n_paths; ++p)
    for (int k = 0; k <= paths.grid.n_steps(); ++k) {
      f << p << "," << k;
      std::snprintf(buf, sizeof(buf), ",%.17g", paths.grid.node(k));
      f << buf;
      for (int c = 0; c < paths.dim; ++c) {
        std::snprintf(buf, sizeof(buf), ",%.17g", paths.x[static_cast<std::size_t>(c)](p, k));
        f << buf;
      }
      f << "\n";
    }
}

}  // namespace bsdelab
