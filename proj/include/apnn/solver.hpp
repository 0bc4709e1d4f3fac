#pragma once

#include <functional>
#include <string>
#include <vector>

#include "apnn/physics.hpp"

namespace apnn {

// Periodic x-grid (right endpoint excluded), node-centered v-grid.
struct Grid {
  int nx = 256;
  int nv = 128;
  double x_lo = 0.0, x_hi = 1.0;
  double v_lo = -6.0, v_hi = 6.0;
  double dx() const { return (x_hi - x_lo) / nx; }
  double dv() const { return (v_hi - v_lo) / (nv - 1); }
  double x(int i) const { return x_lo + i * dx(); }
  double v(int j) const { return v_lo + j * dv(); }
  void validate() const;
};

// One time slice. f is row-major [nx x nv]; the drift-limit solver leaves it
// empty. rho is always the dv-trapezoid of f where f is present.
struct GridSolution {
  Grid grid;
  double time = 0.0;
  std::vector<double> rho, phi, E, flux;  // [nx]
  std::vector<double> f;                  // [nx*nv] or empty
};

// -dxx phi = src on the periodic grid by discrete-Fourier inversion of the
// three-point second difference, zero-mean gauge on phi. src must be neutral
// (|sum(src) dx| <= 1e-8), else numeric_error: the zero mode has no periodic
// solution. E = -dx phi by centered differences.
void solve_poisson_periodic(const std::vector<double>& src, double dx,
                            std::vector<double>& phi, std::vector<double>& E);

struct SolverProblem {
  std::function<double(double x, double v)> f0;  // kinetic initial data
  std::function<double(double x)> rho0;          // drift-limit initial data
  std::function<double(double x)> h;             // background density
  ScaleField eps;
  bool field_gradient = false;  // field law dx phi = rho - h
  double cfl = 0.9;
};

struct SolverRun {
  std::vector<GridSolution> snaps;  // one per requested time, same order
  std::vector<double> energy_time;  // electric energy after every step
  std::vector<double> energy;
};

// Splitting scheme, first order in time: explicit upwind transport in x,
// implicit drift-diffusion collision step per x column (tridiagonal solve
// with flux-weighted face interpolation, zero-flux ends), field update. The
// step size obeys only the transport CFL, so eps may be arbitrarily small.
// Column sums are conserved exactly and positivity is preserved.
SolverRun solve_kinetic(const SolverProblem& prob, const Grid& grid,
                        const std::vector<double>& times);

// Conservative upwind scheme for the drift equation d_t rho = d_x(rho dxphi)
// with the field refreshed from rho every step.
SolverRun solve_limit(const SolverProblem& prob, const Grid& grid,
                      const std::vector<double>& times);

double electric_energy(const std::vector<double>& E, double dx);

// CSV slice (header t,x,rho,phi,E,flux), binary f snapshot, energy series.
void write_solution_csv(const std::string& path, const GridSolution& s);
GridSolution read_solution_csv(const std::string& path);
void write_f_snapshot(const std::string& path, const GridSolution& s);
GridSolution read_f_snapshot(const std::string& path);
void write_energy_csv(const std::string& path, const std::vector<double>& t,
                      const std::vector<double>& e);

}
