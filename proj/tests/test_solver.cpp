#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"

#include "apnn/errors.hpp"
#include "apnn/solver.hpp"

using namespace apnn;

namespace {

const double kPi = std::acos(-1.0);

std::string tmp_path(const std::string& leaf) {
  const char* base = std::getenv("APNN_TEST_TMP");
  std::filesystem::path p = base ? base : std::filesystem::temp_directory_path();
  p /= "solver";
  std::filesystem::create_directories(p);
  return (p / leaf).string();
}

SolverProblem uniform_equilibrium(double eps0) {
  SolverProblem prob;
  prob.f0 = [](double, double v) { return maxwellian(v, 0.0); };
  prob.rho0 = [](double) { return 1.0; };
  prob.h = [](double) { return 1.0; };
  prob.eps.eps0 = eps0;
  return prob;
}

SolverProblem landau_like(double eps0) {
  SolverProblem prob;
  prob.f0 = [](double x, double v) {
    return (1.0 + 0.05 * std::cos(0.5 * x)) * maxwellian(v, 0.0);
  };
  prob.rho0 = [](double x) { return 1.0 + 0.05 * std::cos(0.5 * x); };
  prob.h = [](double) { return 1.0; };
  prob.eps.eps0 = eps0;
  return prob;
}

double column_mass(const GridSolution& s) {
  double total = 0;
  for (double r : s.rho) total += r * s.grid.dx();
  return total;
}

}  // namespace

TEST_CASE("grid accessors and validation") {
  Grid g;
  g.nx = 8;
  g.nv = 5;
  g.x_lo = 0.0;
  g.x_hi = 2.0;
  g.v_lo = -1.0;
  g.v_hi = 1.0;
  CHECK(g.dx() == doctest::Approx(0.25));
  CHECK(g.dv() == doctest::Approx(0.5));
  CHECK(g.x(3) == doctest::Approx(0.75));
  CHECK(g.v(4) == doctest::Approx(1.0));

  Grid bad = g;
  bad.nx = 0;
  CHECK_THROWS_AS(bad.validate(), config_error);
  bad = g;
  bad.nv = 1;
  CHECK_THROWS_AS(bad.validate(), config_error);
  bad = g;
  bad.v_hi = bad.v_lo;
  CHECK_THROWS_AS(bad.validate(), config_error);
}

TEST_CASE("poisson solve on a manufactured cosine") {
  const int nx = 256;
  const double L = 4.0 * kPi, dx = L / nx;
  const double alpha = 0.05, k = 0.5;
  std::vector<double> src(nx), phi, E;
  for (int i = 0; i < nx; ++i) src[i] = alpha * std::cos(k * i * dx);
  solve_poisson_periodic(src, dx, phi, E);

  // -dxx phi = alpha cos(kx) has phi = (alpha/k^2) cos(kx), E = (alpha/k) sin
  double max_phi = 0, max_E = 0, mean = 0;
  for (int i = 0; i < nx; ++i) {
    const double x = i * dx;
    max_phi = std::max(max_phi,
                       std::abs(phi[i] - (alpha / (k * k)) * std::cos(k * x)));
    max_E = std::max(max_E, std::abs(E[i] - (alpha / k) * std::sin(k * x)));
    mean += phi[i];
  }
  CHECK(max_phi <= 2e-4);  // second-order in dx
  CHECK(max_E <= 2e-4);
  CHECK(std::abs(mean / nx) <= 1e-12);  // zero-mean gauge

  // the discrete second difference of phi reproduces the source exactly
  for (int i = 0; i < nx; ++i) {
    const double lap =
        -(phi[(i + 1) % nx] - 2 * phi[i] + phi[(i + nx - 1) % nx]) / (dx * dx);
    CHECK(lap == doctest::Approx(src[i]).epsilon(1e-10));
  }
}

TEST_CASE("poisson solve rejects a non-neutral source") {
  std::vector<double> src(64, 0.01), phi, E;
  CHECK_THROWS_AS(solve_poisson_periodic(src, 0.1, phi, E), numeric_error);
}

TEST_CASE("electric energy is the discrete l2 norm of the field") {
  std::vector<double> zero(50, 0.0);
  CHECK(electric_energy(zero, 0.02) == 0.0);

  std::vector<double> ones(100, 1.0);
  CHECK(electric_energy(ones, 0.01) == doctest::Approx(1.0).epsilon(1e-14));

  // sum of sin^2 over full periods is exactly nx/2, so the norm of
  // 0.1 sin(x/2) on [0,4pi] is 0.1 sqrt(2 pi) at any resolution
  const int nx = 128;
  const double L = 4.0 * kPi, dx = L / nx;
  std::vector<double> E(nx);
  for (int i = 0; i < nx; ++i) E[i] = 0.1 * std::sin(0.5 * i * dx);
  const double expect = 0.1 * std::sqrt(0.5 * L);
  CHECK(electric_energy(E, dx) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("uniform equilibrium is a fixed point of the kinetic scheme") {
  Grid g;
  g.nx = 32;
  g.nv = 32;
  g.x_hi = 4.0 * kPi;
  g.v_lo = -6.0;
  g.v_hi = 6.0;
  SolverRun run = solve_kinetic(uniform_equilibrium(1.0), g, {0.05});
  REQUIRE(run.snaps.size() == 1);
  const GridSolution& s = run.snaps[0];
  CHECK(s.time == doctest::Approx(0.05).epsilon(1e-12));
  for (double r : s.rho) CHECK(r == doctest::Approx(s.rho[0]).epsilon(1e-10));
  for (double e : s.E) CHECK(std::abs(e) <= 1e-10);
}

TEST_CASE("kinetic scheme conserves mass and positivity") {
  Grid g;
  g.nx = 48;
  g.nv = 40;
  g.x_hi = 4.0 * kPi;
  SolverRun run = solve_kinetic(landau_like(1.0), g, {0.0, 0.15});
  REQUIRE(run.snaps.size() == 2);
  // plain column sums are conserved exactly; the trapezoid mass also sees
  // the end columns, which the transport step feeds at roundoff level
  const double m0 = column_mass(run.snaps[0]);
  const double m1 = column_mass(run.snaps[1]);
  CHECK(m1 == doctest::Approx(m0).epsilon(1e-10));
  for (double fv : run.snaps[1].f) CHECK(fv >= 0.0);
  // energy series covers the run at every step
  CHECK(run.energy.size() == run.energy_time.size());
  CHECK(run.energy_time.back() == doctest::Approx(0.15).epsilon(1e-12));
}

TEST_CASE("collision-dominated run damps the field") {
  // at eps = 0.01 the density relaxes like the drift equation, which kills
  // each perturbation mode at unit rate; by t = 1.5 the field must have lost
  // most of its initial amplitude
  Grid g;
  g.nx = 64;
  g.nv = 64;
  g.x_hi = 4.0 * kPi;
  g.v_lo = -7.0;
  g.v_hi = 7.0;
  SolverRun run = solve_kinetic(landau_like(0.01), g, {1.5});
  REQUIRE(!run.energy.empty());
  CHECK(run.energy.back() < 0.5 * run.energy.front());
}

TEST_CASE("drift limit preserves a flat profile and total mass") {
  Grid g;
  g.nx = 64;
  g.nv = 8;
  g.x_hi = 1.0;
  SolverProblem prob = uniform_equilibrium(1e-3);
  SolverRun run = solve_limit(prob, g, {0.1});
  for (double r : run.snaps[0].rho)
    CHECK(r == doctest::Approx(1.0).epsilon(1e-12));

  SolverProblem wavy;
  wavy.rho0 = [](double x) { return 1.0 + 0.3 * std::sin(2.0 * kPi * x); };
  wavy.h = [](double) { return 1.0; };
  SolverRun moved = solve_limit(wavy, g, {0.0, 0.05});
  CHECK(column_mass(moved.snaps[1]) ==
        doctest::Approx(column_mass(moved.snaps[0])).epsilon(1e-12));
  for (double r : moved.snaps[1].rho) CHECK(r >= 0.0);
}

TEST_CASE("gravitational field law integrates rho minus h directly") {
  Grid g;
  g.nx = 128;
  g.nv = 16;
  g.x_hi = 4.0 * kPi;
  SolverProblem prob = landau_like(1e-3);
  prob.field_gradient = true;
  SolverRun run = solve_limit(prob, g, {0.0});
  const GridSolution& s = run.snaps[0];
  // dx phi = rho - h, so E = -(rho - h) pointwise
  for (int i = 0; i < g.nx; ++i)
    CHECK(s.E[i] == doctest::Approx(-(s.rho[i] - 1.0)).epsilon(1e-10));
  // phi ~ (alpha/k) sin(kx) = 0.1 sin(x/2)
  for (int i = 0; i < g.nx; i += 7) {
    CHECK(s.phi[i] ==
          doctest::Approx(0.1 * std::sin(0.5 * g.x(i))).epsilon(2e-3));
  }
}

TEST_CASE("solution csv roundtrip is lossless") {
  Grid g;
  g.nx = 16;
  g.nv = 12;
  g.x_hi = 2.0;
  SolverRun run = solve_kinetic(landau_like(0.5), g, {0.03});
  GridSolution s = run.snaps[0];
  s.f.clear();  // csv carries the x-profiles only

  const std::string path = tmp_path("slice.csv");
  write_solution_csv(path, s);
  GridSolution back = read_solution_csv(path);
  CHECK(back.time == s.time);
  REQUIRE(back.rho.size() == s.rho.size());
  for (std::size_t i = 0; i < s.rho.size(); ++i) {
    CHECK(back.rho[i] == s.rho[i]);
    CHECK(back.phi[i] == s.phi[i]);
    CHECK(back.E[i] == s.E[i]);
    CHECK(back.flux[i] == s.flux[i]);
  }
  CHECK_THROWS_AS(read_solution_csv(tmp_path("missing.csv")), io_error);
}

TEST_CASE("f snapshot roundtrip keeps the kinetic grid") {
  Grid g;
  g.nx = 12;
  g.nv = 10;
  g.x_hi = 2.0;
  SolverRun run = solve_kinetic(landau_like(0.7), g, {0.02});
  const GridSolution& s = run.snaps[0];
  REQUIRE(int(s.f.size()) == g.nx * g.nv);

  const std::string path = tmp_path("snap.fbin");
  write_f_snapshot(path, s);
  GridSolution back = read_f_snapshot(path);
  CHECK(back.grid.nx == g.nx);
  CHECK(back.grid.nv == g.nv);
  CHECK(back.time == s.time);
  REQUIRE(back.f.size() == s.f.size());
  for (std::size_t i = 0; i < s.f.size(); ++i) CHECK(back.f[i] == s.f[i]);

  // rho is consistent with the dv-trapezoid of f
  for (int i = 0; i < g.nx; ++i) {
    double r = 0;
    for (int j = 0; j < g.nv; ++j) {
      const double w = (j == 0 || j == g.nv - 1) ? 0.5 : 1.0;
      r += w * s.f[std::size_t(i) * g.nv + j] * g.dv();
    }
    CHECK(s.rho[i] == doctest::Approx(r).epsilon(1e-12));
  }
}

TEST_CASE("kinetic run approaches the drift limit for small eps") {
  Grid g;
  g.nx = 96;
  g.nv = 72;
  g.x_hi = 4.0 * kPi;
  g.v_lo = -7.0;
  g.v_hi = 7.0;
  SolverProblem prob = landau_like(1e-3);
  SolverRun kin = solve_kinetic(prob, g, {0.1});
  SolverRun lim = solve_limit(prob, g, {0.1});
  double num = 0, den = 0;
  for (int i = 0; i < g.nx; ++i) {
    const double d = kin.snaps[0].rho[i] - lim.snaps[0].rho[i];
    num += d * d;
    den += lim.snaps[0].rho[i] * lim.snaps[0].rho[i];
  }
  CHECK(std::sqrt(num / den) <= 2e-2);
}
