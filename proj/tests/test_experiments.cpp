#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

#include "apnn/errors.hpp"
#include "apnn/experiments.hpp"
#include "apnn/rng.hpp"

using namespace apnn;

namespace {

const double kPi = std::acos(-1.0);

// midpoint rule: exact for piecewise-constant data whose jumps sit on cell
// boundaries, spectrally accurate for smooth periodic integrands
template <class F>
double integrate(F&& fn, double lo, double hi, int n) {
  double s = 0.0;
  const double dx = (hi - lo) / n;
  for (int i = 0; i < n; ++i) s += fn(lo + (i + 0.5) * dx);
  return s * dx;
}

std::string tmp_path(const std::string& leaf) {
  const char* base = std::getenv("APNN_TEST_TMP");
  std::filesystem::path p = base ? base : std::filesystem::temp_directory_path();
  p /= "experiments";
  std::filesystem::create_directories(p);
  return (p / leaf).string();
}

}  // namespace

TEST_CASE("problem names parse both ways") {
  const ProblemId ids[] = {ProblemId::landau,  ProblemId::bump_on_tail,
                           ProblemId::riemann, ProblemId::mixing,
                           ProblemId::gravitational, ProblemId::uq};
  for (ProblemId id : ids) CHECK(parse_problem(problem_name(id)) == id);
  CHECK(parse_problem("bump") == ProblemId::bump_on_tail);
  CHECK(parse_problem("gravity") == ProblemId::gravitational);
  CHECK_THROWS_AS(parse_problem("two_stream"), config_error);
}

TEST_CASE("make_problem rejects a non-positive scale") {
  CHECK_THROWS_AS(make_problem(ProblemId::landau, 0.0), config_error);
  CHECK_THROWS_AS(make_problem(ProblemId::landau, -1.0), config_error);
}

TEST_CASE("initial data is charge neutral where the formulation needs it") {
  const ProblemId neutral[] = {ProblemId::landau, ProblemId::riemann,
                               ProblemId::mixing, ProblemId::gravitational,
                               ProblemId::uq};
  for (ProblemId id : neutral) {
    ProblemSetup p = make_problem(id, default_eps(id));
    const auto& P = p.loss;
    const double net_charge = integrate(
        [&](double x) { return P.rho0(x, nullptr) - P.source(x, nullptr); },
        P.x_lo, P.x_hi, 20000);
    CHECK(std::abs(net_charge) <= 1e-10);
  }

  // the bump-on-tail data is non-neutral: the velocity mass of f0 runs about
  // 2.9 percent below rho0 and the background, a documented property of the
  // case. At x = pi the cosine factor drops out, so one column shows the
  // x-averaged deficit.
  ProblemSetup bump = make_problem(ProblemId::bump_on_tail, 1.0);
  const auto& B = bump.loss;
  const double col_mass = integrate(
      [&](double v) { return B.f0(kPi, v, nullptr); }, -12.0, 12.0, 6000);
  const double expect = 0.9 + 0.1 / std::sqrt(2.0);  // = 0.97071
  CHECK(col_mass == doctest::Approx(expect).epsilon(1e-6));
  CHECK(col_mass - B.source(kPi, nullptr) ==
        doctest::Approx(-0.0293).epsilon(2e-3));
}

TEST_CASE("rho0 is the velocity mass of f0") {
  for (ProblemId id : {ProblemId::landau, ProblemId::riemann, ProblemId::uq}) {
    ProblemSetup p = make_problem(id, default_eps(id));
    const auto& P = p.loss;
    std::vector<double> zs(std::max(P.nz, 1), 0.25);
    const double* z = P.nz ? zs.data() : nullptr;
    for (double frac : {0.12, 0.5, 0.87}) {
      const double x = P.x_lo + frac * (P.x_hi - P.x_lo);
      const double mass = integrate(
          [&](double v) { return P.f0(x, v, z); }, -10.0, 10.0, 4000);
      CHECK(mass == doctest::Approx(P.rho0(x, z)).epsilon(1e-6));
    }
  }
}

TEST_CASE("equilibrium problems have vanishing micro part") {
  for (ProblemId id : {ProblemId::riemann, ProblemId::mixing, ProblemId::uq}) {
    ProblemSetup p = make_problem(id, default_eps(id));
    CHECK(p.equilibrium_ic);
    REQUIRE(bool(p.loss.g0));
    std::vector<double> zs(std::max(p.loss.nz, 1), -0.4);
    const double* z = p.loss.nz ? zs.data() : nullptr;
    for (double x : {p.loss.x_lo + 0.3, p.loss.x_lo + 0.61})
      for (double v : {-2.0, 0.5})
        CHECK(p.loss.g0(x, v, z) == 0.0);
  }

  // non-equilibrium initial data: g0 = (f0 - rho0 M)/eps carries no mass
  ProblemSetup lan = make_problem(ProblemId::landau, 0.5);
  CHECK(!lan.equilibrium_ic);
  const double x = 1.3;
  const double g_mass = integrate(
      [&](double v) { return lan.loss.g0(x, v, nullptr); }, -10.0, 10.0, 4000);
  CHECK(std::abs(g_mass) <= 1e-6);

  // the tail bump dominates g0 out at its drift speed
  ProblemSetup bump = make_problem(ProblemId::bump_on_tail, 1.0);
  CHECK(bump.loss.g0(0.0, 4.5, nullptr) > 0.05);
}

TEST_CASE("phi0 solves the initial field equation") {
  // spectral problems: -phi0'' = rho0 - h, checked by second differences
  for (ProblemId id : {ProblemId::landau, ProblemId::riemann, ProblemId::mixing,
                       ProblemId::uq}) {
    ProblemSetup p = make_problem(id, default_eps(id));
    const auto& P = p.loss;
    const double hstep = (P.x_hi - P.x_lo) * 1e-5;
    for (double frac : {0.1, 0.35, 0.62, 0.9}) {
      const double x = P.x_lo + frac * (P.x_hi - P.x_lo);
      const double lap = -(P.phi0(x + hstep, nullptr) -
                           2.0 * P.phi0(x, nullptr) +
                           P.phi0(x - hstep, nullptr)) /
                         (hstep * hstep);
      const double src = P.rho0(x, nullptr) - P.source(x, nullptr);
      CHECK(lap == doctest::Approx(src).epsilon(5e-4));
    }
  }

  // gravitational field law: phi0' = rho0 - h
  ProblemSetup grav = make_problem(ProblemId::gravitational, 1e-3);
  const auto& G = grav.loss;
  CHECK(grav.loss.field_gradient);
  const double hstep = 1e-6;
  for (double x : {0.7, 3.1, 9.2}) {
    const double d =
        (G.phi0(x + hstep, nullptr) - G.phi0(x - hstep, nullptr)) / (2 * hstep);
    CHECK(d == doctest::Approx(G.rho0(x, nullptr) - G.source(x, nullptr))
                   .epsilon(1e-6));
  }
}

TEST_CASE("uq randomness enters through a separable perturbation") {
  ProblemSetup p = make_problem(ProblemId::uq, 1.0);
  REQUIRE(p.loss.nz == 10);
  // all-zero z is exactly the z-average of the perturbation
  std::vector<double> z0(10, 0.0);
  std::vector<double> z1(10, 0.5);
  const double x = 0.4;
  CHECK(p.loss.rho0(x, z0.data()) < p.loss.rho0(x, z1.data()));
  CHECK(p.loss.source(x, z1.data()) - p.loss.source(x, z0.data()) ==
        doctest::Approx(p.loss.rho0(x, z1.data()) - p.loss.rho0(x, z0.data()))
            .epsilon(1e-12));
}

TEST_CASE("defaults match the run settings tables") {
  CHECK(default_eps(ProblemId::landau) == 1.0);
  CHECK(default_eps(ProblemId::riemann) == 1e-3);
  CHECK(default_eps(ProblemId::mixing) == 1e-3);
  CHECK(default_eps(ProblemId::gravitational) == 1e-3);

  PenaltyConfig lm = default_penalties(ProblemId::landau, Method::micro_macro, 1.0);
  CHECK(lm.domain_macro == 300.0);
  CHECK(lm.domain_poisson == 300.0);
  CHECK(lm.ic_rho == 1.0);  // initial terms keep the base weight
  PenaltyConfig ls =
      default_penalties(ProblemId::landau, Method::micro_macro, 1e-2);
  CHECK(ls.domain_macro == 0.5);

  PenaltyConfig rm = default_penalties(ProblemId::riemann, Method::micro_macro, 1e-3);
  CHECK(rm.domain_macro == 5.0);
  CHECK(rm.domain_kinetic == 5.0);
  CHECK(rm.domain_poisson == 1.0);
  CHECK(rm.ic_rho == 5.0);

  PenaltyConfig rc =
      default_penalties(ProblemId::riemann, Method::mass_conservation, 1e-3);
  CHECK(rc.ic_rho == 3.0);
  CHECK(rc.ic_gf == 1000.0);

  PenaltyConfig mx = default_penalties(ProblemId::mixing, Method::micro_macro, 1e-3);
  CHECK(mx.domain_macro == 0.1);

  PenaltyConfig gv =
      default_penalties(ProblemId::gravitational, Method::mass_conservation, 1e-3);
  CHECK(gv.domain_macro == 50.0);

  PenaltyConfig bu = default_penalties(ProblemId::bump_on_tail, Method::micro_macro, 1e-3);
  CHECK(bu.domain_macro == 1.0);
  CHECK(bu.ic_rho == 1000.0);

  // the random-input case weights scale with the method, not the regime,
  // for the conservation form
  CHECK(default_penalties(ProblemId::uq, Method::micro_macro, 1.0)
            .domain_macro == 50.0);
  CHECK(default_penalties(ProblemId::uq, Method::micro_macro, 1e-3)
            .domain_macro == 1.0);
  CHECK(default_penalties(ProblemId::uq, Method::mass_conservation, 1.0)
            .domain_macro == 100.0);
  CHECK(default_penalties(ProblemId::uq, Method::mass_conservation, 1e-3)
            .domain_macro == 100.0);

  BatchConfig bb = default_batches(ProblemId::landau, Method::mass_conservation);
  CHECK(bb.n_domain == 512);
  CHECK(bb.n_ic == 256);
  CHECK(bb.n_bc == 0);
  CHECK(bb.n_conservation == 256);
  BatchConfig bm = default_batches(ProblemId::landau, Method::micro_macro);
  CHECK(bm.n_conservation == 0);
  BatchConfig br = default_batches(ProblemId::riemann, Method::micro_macro);
  CHECK(br.n_ic == 512);

  CHECK(default_scalar_widths(ProblemId::landau) ==
        std::vector<int>(5, 128));
  CHECK(default_kinetic_widths(ProblemId::landau) ==
        std::vector<int>(5, 256));
}

TEST_CASE("error norms") {
  std::vector<double> ref = {1.0, -2.0, 3.0, 0.5};
  std::vector<double> pred = ref;
  for (double& v : pred) v *= 1.1;
  CHECK(rel_l2(pred, ref) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(rel_l2(ref, ref) == 0.0);

  // rmse and rel_l2 describe the same residual
  double ref_norm = 0;
  for (double v : ref) ref_norm += v * v;
  CHECK(rel_l2(pred, ref) ==
        doctest::Approx(rmse(pred, ref) * std::sqrt(4.0 / ref_norm))
            .epsilon(1e-12));

  std::vector<double> short_vec = {1.0};
  CHECK_THROWS_AS(rel_l2(short_vec, ref), config_error);
  std::vector<double> empty;
  CHECK_THROWS_AS(rel_l2(empty, empty), config_error);
}

TEST_CASE("field evaluation is deterministic and consistent across methods") {
  ProblemSetup prob = make_problem(ProblemId::landau, 1.0);
  QuadratureRule rule = velocity_rule(24, prob.loss.v_lo, prob.loss.v_hi);
  std::vector<double> xs;
  for (int i = 0; i < 24; ++i)
    xs.push_back(prob.loss.x_lo +
                 (prob.loss.x_hi - prob.loss.x_lo) * i / 24.0);

  const int ws = input_width(prob.ff, false, 0);
  const int wk = input_width(prob.ff, true, 0);
  Mlp rho = make_mlp({ws, 10, 10, 1}, Head::softplus);
  Mlp f = make_mlp({wk, 12, 12, 1}, Head::softplus);
  Mlp g = make_mlp({wk, 12, 12, 1}, Head::zero_mean_v);
  Mlp phi = make_mlp({ws, 10, 10, 1}, Head::identity);
  xavier_init(rho, 1);
  xavier_init(f, 2);
  xavier_init(g, 3);
  xavier_init(phi, 4);

  EvalNets pinn{Method::vanilla, nullptr, &f, &phi};
  FieldSlice a = evaluate_fields(prob, pinn, rule, 0.5, xs, 1, 2026);
  FieldSlice b = evaluate_fields(prob, pinn, rule, 0.5, xs, 1, 2026);
  CHECK(a.rho == b.rho);
  CHECK(a.phi == b.phi);
  CHECK(a.E == b.E);
  CHECK(a.flux == b.flux);

  // vanilla rho is the quadrature mass of softplus(f raw)
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::vector<Jet> col(rule.size());
    eval_column_jets(f, prob.ff, rule, 0, 0.5, xs[i], nullptr, m_val,
                     col.data());
    double mass = 0, flux = 0;
    for (int j = 0; j < rule.size(); ++j) {
      mass += rule.weights[j] * col[j].val;
      flux += rule.weights[j] * rule.nodes[j] * col[j].val;
    }
    CHECK(a.rho[i] == doctest::Approx(mass).epsilon(1e-12));
    CHECK(a.flux[i] == doctest::Approx(flux).epsilon(1e-12));
  }

  // micro-macro flux reconstructs f = rho M + eps g
  EvalNets mm{Method::micro_macro, &rho, &g, &phi};
  FieldSlice c = evaluate_fields(prob, mm, rule, 0.5, xs, 1, 2026);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Jet rj = eval_scalar_jet(rho, prob.ff, 0, 0.5, xs[i], nullptr, m_val);
    const Jet pj = eval_scalar_jet(phi, prob.ff, 0, 0.5, xs[i], nullptr, m_dx);
    std::vector<Jet> col(rule.size());
    eval_column_jets(g, prob.ff, rule, 0, 0.5, xs[i], nullptr, m_val,
                     col.data());
    double flux = 0;
    for (int j = 0; j < rule.size(); ++j) {
      const double v = rule.nodes[j];
      const double fv =
          rj.val * maxwellian(v, pj.dx) + prob.loss.eps(xs[i]) * col[j].val;
      flux += rule.weights[j] * v * fv;
    }
    CHECK(c.rho[i] == doctest::Approx(rj.val).epsilon(1e-12));
    CHECK(c.flux[i] == doctest::Approx(flux).epsilon(1e-12));
    CHECK(c.E[i] == doctest::Approx(-pj.dx).epsilon(1e-12));
  }

  // head mismatches are rejected
  EvalNets bad = pinn;
  bad.gf = &g;  // zero-mean head cannot be a distribution
  CHECK_THROWS_AS(evaluate_fields(prob, bad, rule, 0.5, xs, 1, 2026),
                  config_error);
  EvalNets missing{Method::micro_macro, nullptr, &g, &phi};
  CHECK_THROWS_AS(evaluate_fields(prob, missing, rule, 0.5, xs, 1, 2026),
                  config_error);
}

TEST_CASE("z-averaged evaluation converges with the draw count") {
  ProblemSetup prob = make_problem(ProblemId::uq, 1.0);
  QuadratureRule rule = velocity_rule(12, prob.loss.v_lo, prob.loss.v_hi);
  std::vector<double> xs = {0.15, 0.5, 0.85};

  const int ws = input_width(prob.ff, false, prob.loss.nz);
  const int wk = input_width(prob.ff, true, prob.loss.nz);
  Mlp f = make_mlp({wk, 10, 10, 1}, Head::softplus);
  Mlp phi = make_mlp({ws, 10, 10, 1}, Head::identity);
  xavier_init(f, 6);
  xavier_init(phi, 7);
  EvalNets nets{Method::vanilla, nullptr, &f, &phi};

  // spread of single draws sets the scale for the mean of many
  std::vector<double> singles;
  for (std::uint64_t s = 1; s <= 16; ++s)
    singles.push_back(evaluate_fields(prob, nets, rule, 0.05, xs, 1, s).rho[1]);
  double mean = 0;
  for (double v : singles) mean += v;
  mean /= singles.size();
  double var = 0;
  for (double v : singles) var += (v - mean) * (v - mean);
  var /= (singles.size() - 1);
  const double sigma = std::sqrt(var);

  const int n = 256;
  const double avg_a = evaluate_fields(prob, nets, rule, 0.05, xs, n, 101).rho[1];
  const double avg_b = evaluate_fields(prob, nets, rule, 0.05, xs, n, 202).rho[1];
  CHECK(std::abs(avg_a - avg_b) <= 8.0 * sigma / std::sqrt(double(n)) + 1e-12);
}

TEST_CASE("metrics csv has the documented schema") {
  std::vector<MetricRow> rows;
  MetricRow r;
  r.problem = "landau";
  r.method = "mm";
  r.metric = "rel_l2";
  r.quantity = "rho";
  r.epsilon = 0.01;
  r.time = 0.5;
  r.value = 0.003125;
  rows.push_back(r);
  const std::string path = tmp_path("metrics.csv");
  write_metrics_csv(path, rows);

  std::ifstream in(path);
  REQUIRE(in.good());
  std::string header, line;
  std::getline(in, header);
  CHECK(header == "problem,method,epsilon,metric,quantity,time,value");
  std::getline(in, line);
  CHECK(line.find("landau,mm,") == 0);
  CHECK(line.find("rel_l2,rho,") != std::string::npos);
}
