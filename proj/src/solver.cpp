#include "apnn/solver.hpp"

#include <fftw3.h>
#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "apnn/errors.hpp"
#include "apnn/kernels.hpp"

namespace apnn {

void Grid::validate() const {
  if (nx < 4 || nv < 4) throw config_error("grid needs nx >= 4 and nv >= 4");
  if (!(x_hi > x_lo) || !(v_hi > v_lo))
    throw config_error("grid extents are empty");
}

namespace {

// Reusable periodic Poisson inverter for one nx. Gauges the zero mode to 0,
// so the input's mean is simply dropped.
class PoissonWork {
 public:
  PoissonWork(int nx, double dx) : nx_(nx), dx_(dx) {
    re_ = fftw_alloc_real(nx);
    cx_ = fftw_alloc_complex(nx / 2 + 1);
    fwd_ = fftw_plan_dft_r2c_1d(nx, re_, cx_, FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_c2r_1d(nx, cx_, re_, FFTW_ESTIMATE);
    sym_.resize(nx / 2 + 1);
    for (int k = 1; k <= nx / 2; ++k)
      sym_[k] = (2.0 - 2.0 * std::cos(2.0 * M_PI * k / nx)) / (dx * dx);
  }
  ~PoissonWork() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
    fftw_free(re_);
    fftw_free(cx_);
  }
  PoissonWork(const PoissonWork&) = delete;
  PoissonWork& operator=(const PoissonWork&) = delete;

  void solve(const double* src, double* phi) {
    std::memcpy(re_, src, sizeof(double) * nx_);
    fftw_execute(fwd_);
    cx_[0][0] = 0.0;
    cx_[0][1] = 0.0;
    for (int k = 1; k <= nx_ / 2; ++k) {
      const double d = sym_[k] * nx_;  // folds the c2r normalization
      cx_[k][0] /= d;
      cx_[k][1] /= d;
    }
    fftw_execute(inv_);
    std::memcpy(phi, re_, sizeof(double) * nx_);
  }

 private:
  int nx_;
  double dx_;
  double* re_;
  fftw_complex* cx_;
  fftw_plan fwd_, inv_;
  std::vector<double> sym_;
};

void centered_gradient(const std::vector<double>& phi, double dx,
                       std::vector<double>& dxphi) {
  const int nx = int(phi.size());
  dxphi.resize(nx);
  for (int i = 0; i < nx; ++i) {
    const int ip = i + 1 == nx ? 0 : i + 1;
    const int im = i == 0 ? nx - 1 : i - 1;
    dxphi[i] = (phi[ip] - phi[im]) / (2.0 * dx);
  }
}

// Face ratio P/(e^P - 1): the flux-weighted interpolation collapses to it.
double face_ratio(double P) {
  if (std::abs(P) < 1e-12) return 1.0 - 0.5 * P;
  return P / std::expm1(P);
}

// State shared by the kinetic stepper.
struct FieldState {
  std::vector<double> phi, E, dxphi;
};

// Field update from rho. The spectral path drops the source's mean (the
// gauge has no zero mode); the gradient law evaluates dx phi = rho - h
// directly and integrates it for phi.
void update_field(const SolverProblem& prob, const Grid& g,
                  const std::vector<double>& rho, PoissonWork& pw,
                  FieldState& fs) {
  const int nx = g.nx;
  fs.phi.resize(nx);
  fs.E.resize(nx);
  fs.dxphi.resize(nx);
  if (prob.field_gradient) {
    for (int i = 0; i < nx; ++i) fs.dxphi[i] = rho[i] - prob.h(g.x(i));
    // trapezoid antiderivative, zero-mean gauge
    fs.phi[0] = 0.0;
    for (int i = 1; i < nx; ++i)
      fs.phi[i] =
          fs.phi[i - 1] + 0.5 * g.dx() * (fs.dxphi[i - 1] + fs.dxphi[i]);
    double mean = 0.0;
    for (double p : fs.phi) mean += p;
    mean /= nx;
    for (double& p : fs.phi) p -= mean;
    for (int i = 0; i < nx; ++i) fs.E[i] = -fs.dxphi[i];
  } else {
    std::vector<double> src(nx);
    for (int i = 0; i < nx; ++i) src[i] = rho[i] - prob.h(g.x(i));
    pw.solve(src.data(), fs.phi.data());
    centered_gradient(fs.phi, g.dx(), fs.dxphi);
    for (int i = 0; i < nx; ++i) fs.E[i] = -fs.dxphi[i];
  }
}

void trapezoid_moments(const Grid& g, const std::vector<double>& f,
                       std::vector<double>& rho, std::vector<double>* flux) {
  const int nx = g.nx, nv = g.nv;
  const double dv = g.dv();
  rho.resize(nx);
  if (flux) flux->resize(nx);
  for (int i = 0; i < nx; ++i) {
    const double* fi = f.data() + std::size_t(i) * nv;
    double m0 = 0.5 * (fi[0] + fi[nv - 1]);
    double m1 = 0.5 * (g.v(0) * fi[0] + g.v(nv - 1) * fi[nv - 1]);
    for (int j = 1; j < nv - 1; ++j) {
      m0 += fi[j];
      m1 += g.v(j) * fi[j];
    }
    rho[i] = dv * m0;
    if (flux) (*flux)[i] = dv * m1;
  }
}

// Tridiagonal solve, Thomas elimination. Coefficients are consumed.
void thomas(std::vector<double>& lo, std::vector<double>& di,
            std::vector<double>& up, double* x, int n) {
  for (int j = 1; j < n; ++j) {
    if (std::abs(di[j - 1]) < 1e-14)
      throw numeric_error("tridiagonal solver breakdown in collision step");
    const double w = lo[j] / di[j - 1];
    di[j] -= w * up[j - 1];
    x[j] -= w * x[j - 1];
  }
  if (std::abs(di[n - 1]) < 1e-14)
    throw numeric_error("tridiagonal solver breakdown in collision step");
  x[n - 1] /= di[n - 1];
  for (int j = n - 2; j >= 0; --j) x[j] = (x[j] - up[j] * x[j + 1]) / di[j];
}

GridSolution make_snapshot(const Grid& g, double t,
                           const std::vector<double>& f, const FieldState& fs,
                           const std::vector<double>& rho) {
  GridSolution s;
  s.grid = g;
  s.time = t;
  s.rho = rho;
  s.phi = fs.phi;
  s.E = fs.E;
  s.f = f;
  std::vector<double> r2;
  trapezoid_moments(g, f, r2, &s.flux);
  return s;
}

void check_times(const std::vector<double>& times) {
  if (times.empty()) throw config_error("solver needs at least one time");
  double prev = 0.0;
  for (double t : times) {
    if (!(t >= prev)) throw config_error("snapshot times must be ascending and >= 0");
    prev = t;
  }
}

}  // namespace

void solve_poisson_periodic(const std::vector<double>& src, double dx,
                            std::vector<double>& phi, std::vector<double>& E) {
  const int nx = int(src.size());
  if (nx < 4) throw config_error("poisson grid too small");
  double total = 0.0;
  for (double s : src) total += s;
  if (std::abs(total * dx) > 1e-8)
    throw numeric_error("poisson source is not neutral; no periodic solution");
  PoissonWork pw(nx, dx);
  phi.resize(nx);
  pw.solve(src.data(), phi.data());
  std::vector<double> dxphi;
  centered_gradient(phi, dx, dxphi);
  E.resize(nx);
  for (int i = 0; i < nx; ++i) E[i] = -dxphi[i];
}

SolverRun solve_kinetic(const SolverProblem& prob, const Grid& grid,
                        const std::vector<double>& times) {
  grid.validate();
  check_times(times);
  if (!prob.f0 || !prob.h) throw config_error("kinetic solve needs f0 and h");
  const int nx = grid.nx, nv = grid.nv;
  const double dx = grid.dx(), dv = grid.dv();
  const double vmax = std::max(std::abs(grid.v_lo), std::abs(grid.v_hi));

  std::vector<double> f(std::size_t(nx) * nv);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < nv; ++j)
      f[std::size_t(i) * nv + j] = prob.f0(grid.x(i), grid.v(j));

  std::vector<double> rho;
  trapezoid_moments(grid, f, rho, nullptr);
  PoissonWork pw(nx, dx);
  FieldState fs;
  update_field(prob, grid, rho, pw, fs);

  SolverRun run;
  run.energy_time.push_back(0.0);
  run.energy.push_back(electric_energy(fs.E, dx));

  std::vector<double> fstar(f.size());
  double t = 0.0;
  for (double t_snap : times) {
    while (t < t_snap - 1e-12) {
      double dt = prob.cfl * dx / vmax;
      dt = std::min(dt, t_snap - t);

      // transport: periodic upwind in x at each velocity node
#pragma omp parallel for num_threads(worker_count()) schedule(static)
      for (int i = 0; i < nx; ++i) {
        const int ip = i + 1 == nx ? 0 : i + 1;
        const int im = i == 0 ? nx - 1 : i - 1;
        for (int j = 0; j < nv; ++j) {
          const double nu = grid.v(j) * dt / dx;
          const double fc = f[std::size_t(i) * nv + j];
          fstar[std::size_t(i) * nv + j] =
              nu >= 0.0 ? fc - nu * (fc - f[std::size_t(im) * nv + j])
                        : fc - nu * (f[std::size_t(ip) * nv + j] - fc);
        }
      }

      // collision: implicit drift-diffusion solve per x column
#pragma omp parallel for num_threads(worker_count()) schedule(static)
      for (int i = 0; i < nx; ++i) {
        const double c = dt / (prob.eps(grid.x(i)) * dv);
        // face coefficients: flux through face m (between nodes m, m+1) is
        // a_m f_m + b_m f_{m+1}; a <= 0 <= b makes the system an M-matrix,
        // and a_m + b_m = w_m keeps column sums at one (mass conservation).
        std::vector<double> a(nv - 1), b(nv - 1);
        for (int m = 0; m < nv - 1; ++m) {
          const double w = grid.v(m) + 0.5 * dv + fs.dxphi[i];
          const double P = w * dv;
          const double ratio = face_ratio(P);
          a[m] = -ratio / dv;
          b[m] = ratio * std::exp(P) / dv;
        }
        std::vector<double> lo(nv, 0.0), di(nv, 0.0), up(nv, 0.0);
        for (int j = 0; j < nv; ++j) {
          di[j] = 1.0;
          if (j + 1 < nv) {
            di[j] -= c * a[j];
            up[j] = -c * b[j];
          }
          if (j > 0) {
            di[j] += c * b[j - 1];
            lo[j] = c * a[j - 1];
          }
        }
        double* col = fstar.data() + std::size_t(i) * nv;
        thomas(lo, di, up, col, nv);
        std::memcpy(f.data() + std::size_t(i) * nv, col, sizeof(double) * nv);
      }

      trapezoid_moments(grid, f, rho, nullptr);
      update_field(prob, grid, rho, pw, fs);
      t += dt;
      run.energy_time.push_back(t);
      run.energy.push_back(electric_energy(fs.E, dx));
    }
    run.snaps.push_back(make_snapshot(grid, t_snap, f, fs, rho));
  }
  return run;
}

SolverRun solve_limit(const SolverProblem& prob, const Grid& grid,
                      const std::vector<double>& times) {
  grid.validate();
  check_times(times);
  if (!prob.rho0 || !prob.h) throw config_error("limit solve needs rho0 and h");
  const int nx = grid.nx;
  const double dx = grid.dx();

  std::vector<double> rho(nx);
  for (int i = 0; i < nx; ++i) rho[i] = prob.rho0(grid.x(i));
  PoissonWork pw(nx, dx);
  FieldState fs;
  update_field(prob, grid, rho, pw, fs);

  SolverRun run;
  run.energy_time.push_back(0.0);
  run.energy.push_back(electric_energy(fs.E, dx));

  std::vector<double> u(nx), flux(nx), rho_new(nx);
  double t = 0.0;
  for (double t_snap : times) {
    while (t < t_snap - 1e-12) {
      // face drift velocity u = -dx phi at x_{i+1/2}
      double umax = 0.0;
      for (int i = 0; i < nx; ++i) {
        const int ip = i + 1 == nx ? 0 : i + 1;
        if (prob.field_gradient) {
          const double xf = grid.x_lo + (i + 0.5) * dx;
          u[i] = -(0.5 * (rho[i] + rho[ip]) - prob.h(xf));
        } else {
          u[i] = -(fs.phi[ip] - fs.phi[i]) / dx;
        }
        umax = std::max(umax, std::abs(u[i]));
      }
      double dt = umax > 0.0 ? prob.cfl * dx / umax : t_snap - t;
      dt = std::min(dt, t_snap - t);

      for (int i = 0; i < nx; ++i) {
        const int ip = i + 1 == nx ? 0 : i + 1;
        flux[i] = u[i] >= 0.0 ? u[i] * rho[i] : u[i] * rho[ip];
      }
      for (int i = 0; i < nx; ++i) {
        const int im = i == 0 ? nx - 1 : i - 1;
        rho_new[i] = rho[i] - dt / dx * (flux[i] - flux[im]);
      }
      rho.swap(rho_new);
      update_field(prob, grid, rho, pw, fs);
      t += dt;
      run.energy_time.push_back(t);
      run.energy.push_back(electric_energy(fs.E, dx));
    }
    GridSolution s;
    s.grid = grid;
    s.time = t_snap;
    s.rho = rho;
    s.phi = fs.phi;
    s.E = fs.E;
    s.flux.resize(nx);
    for (int i = 0; i < nx; ++i) s.flux[i] = -rho[i] * fs.dxphi[i];
    run.snaps.push_back(std::move(s));
  }
  return run;
}

double electric_energy(const std::vector<double>& E, double dx) {
  double s = 0.0;
  for (double e : E) s += e * e;
  return std::sqrt(s * dx);
}

void write_solution_csv(const std::string& path, const GridSolution& s) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path);
  out << "t,x,rho,phi,E,flux\n";
  out.precision(17);
  for (int i = 0; i < s.grid.nx; ++i)
    out << s.time << ',' << s.grid.x(i) << ',' << s.rho[i] << ',' << s.phi[i]
        << ',' << s.E[i] << ',' << s.flux[i] << "\n";
  if (!out) throw io_error("write failed: " + path);
}

GridSolution read_solution_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,x,rho,phi,E,flux", 0) != 0)
    throw io_error("bad solution header in " + path);
  GridSolution s;
  std::vector<double> xs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    double t, x, r, p, e, j;
    char c;
    if (!(ls >> t >> c >> x >> c >> r >> c >> p >> c >> e >> c >> j))
      throw io_error("bad solution row in " + path);
    s.time = t;
    xs.push_back(x);
    s.rho.push_back(r);
    s.phi.push_back(p);
    s.E.push_back(e);
    s.flux.push_back(j);
  }
  if (xs.size() < 4) throw io_error("solution too short in " + path);
  s.grid.nx = int(xs.size());
  s.grid.x_lo = xs.front();
  const double dx = xs[1] - xs[0];
  s.grid.x_hi = xs.front() + dx * s.grid.nx;
  return s;
}

void write_f_snapshot(const std::string& path, const GridSolution& s) {
  std::FILE* out = std::fopen(path.c_str(), "wb");
  if (!out) throw io_error("cannot write " + path);
  const char magic[8] = {'a', 'p', 'n', 'n', 'f', 's', 'n', 'p'};
  bool ok = std::fwrite(magic, 1, 8, out) == 8;
  const std::int32_t dims[2] = {s.grid.nx, s.grid.nv};
  ok = ok && std::fwrite(dims, sizeof dims[0], 2, out) == 2;
  const double ext[5] = {s.grid.x_lo, s.grid.x_hi, s.grid.v_lo, s.grid.v_hi,
                         s.time};
  ok = ok && std::fwrite(ext, sizeof ext[0], 5, out) == 5;
  ok = ok && std::fwrite(s.f.data(), sizeof(double), s.f.size(), out) ==
                 s.f.size();
  std::fclose(out);
  if (!ok) throw io_error("write failed: " + path);
}

GridSolution read_f_snapshot(const std::string& path) {
  std::FILE* in = std::fopen(path.c_str(), "rb");
  if (!in) throw io_error("cannot open " + path);
  char magic[8];
  std::int32_t dims[2];
  double ext[5];
  GridSolution s;
  bool ok = std::fread(magic, 1, 8, in) == 8 &&
            std::memcmp(magic, "apnnfsnp", 8) == 0 &&
            std::fread(dims, sizeof dims[0], 2, in) == 2 &&
            std::fread(ext, sizeof ext[0], 5, in) == 5;
  if (ok) {
    s.grid.nx = dims[0];
    s.grid.nv = dims[1];
    s.grid.x_lo = ext[0];
    s.grid.x_hi = ext[1];
    s.grid.v_lo = ext[2];
    s.grid.v_hi = ext[3];
    s.time = ext[4];
    s.f.resize(std::size_t(s.grid.nx) * s.grid.nv);
    ok = std::fread(s.f.data(), sizeof(double), s.f.size(), in) == s.f.size();
  }
  std::fclose(in);
  if (!ok) throw io_error("bad f snapshot: " + path);
  trapezoid_moments(s.grid, s.f, s.rho, &s.flux);
  return s;
}

void write_energy_csv(const std::string& path, const std::vector<double>& t,
                      const std::vector<double>& e) {
  if (t.size() != e.size()) throw config_error("energy series length mismatch");
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path);
  out << "t,energy\n";
  out.precision(17);
  for (std::size_t i = 0; i < t.size(); ++i)
    out << t[i] << ',' << e[i] << "\n";
  if (!out) throw io_error("write failed: " + path);
}

}
