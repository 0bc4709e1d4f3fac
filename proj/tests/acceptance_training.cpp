// Training acceptance gate: desk-scale reproductions of the benchmark error
// tables. Training is stochastic, so the bounds already carry a factor-of-ten
// slack over the published figures; the default reduced budget shrinks the
// networks, batches, quadrature, and most iteration counts, doubles the
// bounds once more, and labels every line "reduced-budget". APNN_ACCEPT_FULL=1
// selects the full budget: table-width networks, 20000 iterations everywhere,
// best of three seeds.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "apnn/experiments.hpp"
#include "apnn/kernels.hpp"
#include "apnn/quadrature.hpp"
#include "apnn/rng.hpp"
#include "apnn/solver.hpp"
#include "apnn/training.hpp"

namespace {

using namespace apnn;

struct Budget {
  const char* label;
  int quad, seeds;
  int domain, initial, conservation;
  // Per-case iteration counts. The initial-energy criterion needs the two
  // runs it reuses trained to the full count even at the reduced preset
  // (the field amplitude converges last); the other cases settle earlier.
  int it_mm1, it_mm001, it_pinn, it_mc001, it_bump;
  std::vector<int> scalar, kinetic;  // empty: the per-problem defaults
  double slack;                      // multiplies every upper bound
};

Budget pick_budget() {
  const char* full = std::getenv("APNN_ACCEPT_FULL");
  if (full && std::strcmp(full, "1") == 0)
    return {"full-budget", 32, 3, 512, 256, 256,
            20000, 20000, 20000, 20000, 20000, {}, {}, 1.0};
  return {"reduced-budget", 16, 1, 192, 96, 96,
          20000, 6000, 2500, 20000, 2500, {24, 24, 24}, {32, 32, 32}, 2.0};
}

struct Trained {
  Mlp rho, gf, phi;
  Method method = Method::vanilla;
  EvalNets eval() const {
    return {method, method == Method::vanilla ? nullptr : &rho, &gf, &phi};
  }
};

Trained train_case(const ProblemSetup& ps, Method m, const Budget& B,
                   int iters, std::uint64_t seed) {
  LossSetup setup;
  setup.method = m;
  setup.ff = ps.ff;
  setup.rule = velocity_rule(B.quad, ps.loss.v_lo, ps.loss.v_hi);
  setup.problem = ps.loss;
  setup.penalties = default_penalties(ps.id, m, ps.eps0);

  BatchConfig batches = default_batches(ps.id, m);
  batches.n_domain = B.domain;
  batches.n_ic = B.initial;
  if (batches.n_conservation > 0) batches.n_conservation = B.conservation;

  const std::vector<int> sw =
      B.scalar.empty() ? default_scalar_widths(ps.id) : B.scalar;
  const std::vector<int> kw =
      B.kinetic.empty() ? default_kinetic_widths(ps.id) : B.kinetic;
  auto layout = [&](const std::vector<int>& hidden, bool has_v) {
    std::vector<int> w{input_width(ps.ff, has_v, ps.loss.nz)};
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(1);
    return w;
  };

  Trained tr;
  tr.method = m;
  TrainNets nets;
  if (m != Method::vanilla) {
    tr.rho = make_mlp(layout(sw, false), Head::softplus);
    xavier_init(tr.rho, derive_seed(seed, 1));
    nets.rho = &tr.rho;
  }
  tr.gf = make_mlp(layout(kw, true), m == Method::micro_macro
                                         ? Head::zero_mean_v
                                         : Head::softplus);
  xavier_init(tr.gf, derive_seed(seed, 2));
  nets.gf = &tr.gf;
  tr.phi = make_mlp(layout(sw, false), Head::identity);
  xavier_init(tr.phi, derive_seed(seed, 3));
  nets.phi = &tr.phi;

  TrainingConfig cfg;
  cfg.max_iters = iters;
  cfg.log_every = 2000;
  cfg.checkpoint_every = 0;
  cfg.seed = seed;
  const TrainResult res = train(setup, batches, nets, cfg, "",
                                [](int iter, const LossReport& rep) {
                                  std::printf("    iter %6d  total %.3e\n",
                                              iter, rep.total);
                                  std::fflush(stdout);
                                });
  std::printf("  %s / %s seed %llu: final total %.3e in %.0f s\n",
              problem_name(ps.id), method_name(m),
              (unsigned long long)seed, res.final_total, res.seconds);
  std::fflush(stdout);
  return tr;
}

// Reference solutions shared between criteria on the same case.
struct RefCase {
  ProblemSetup ps;
  std::vector<double> xs;
  std::map<double, GridSolution> at;  // keyed by snapshot time
};

RefCase make_reference(ProblemId id, double eps,
                       const std::vector<double>& times) {
  RefCase rc;
  rc.ps = make_problem(id, eps);
  SolverProblem sp;
  sp.f0 = [f0 = rc.ps.loss.f0](double x, double v) {
    return f0(x, v, nullptr);
  };
  sp.rho0 = [r0 = rc.ps.loss.rho0](double x) { return r0(x, nullptr); };
  sp.h = [h = rc.ps.loss.source](double x) { return h(x, nullptr); };
  sp.eps = rc.ps.loss.eps;
  sp.field_gradient = rc.ps.loss.field_gradient;

  const Grid grid{256, 128, rc.ps.loss.x_lo, rc.ps.loss.x_hi, rc.ps.loss.v_lo,
                  rc.ps.loss.v_hi};
  const SolverRun run = solve_kinetic(sp, grid, times);
  for (std::size_t i = 0; i < times.size(); ++i)
    rc.at.emplace(times[i], run.snaps[i]);
  rc.xs.resize(grid.nx);
  for (int i = 0; i < grid.nx; ++i) rc.xs[i] = grid.x(i);
  return rc;
}

struct Check {
  std::string name;
  double value = 0.0, bound = 0.0;
  bool floor = false;  // pass when value stays at or above the bound
  bool pass() const { return floor ? value >= bound : value <= bound; }
};

FieldSlice eval_slice(const RefCase& rc, const Trained& tr, double t,
                      const QuadratureRule& rule) {
  return evaluate_fields(rc.ps, tr.eval(), rule, t, rc.xs, 1, 2026);
}

}  // namespace

int main() {
  const Budget B = pick_budget();
  if (const char* threads = std::getenv("APNN_THREADS"))
    set_worker_count(std::atoi(threads));

  std::printf("training acceptance, %s: %d..%d iterations per case, "
              "%d quadrature points, %d seed(s), bound slack x%.0f\n",
              B.label, std::min({B.it_mm1, B.it_mm001, B.it_pinn, B.it_mc001,
                                 B.it_bump}),
              std::max({B.it_mm1, B.it_mm001, B.it_pinn, B.it_mc001,
                        B.it_bump}),
              B.quad, B.seeds, B.slack);
  std::fflush(stdout);

  RefCase landau1 = make_reference(ProblemId::landau, 1.0, {0.0, 0.5});
  RefCase landau001 = make_reference(ProblemId::landau, 0.01, {1.0});
  RefCase bump = make_reference(ProblemId::bump_on_tail, 0.001, {1.0});
  const QuadratureRule eval_rule_landau =
      velocity_rule(32, landau1.ps.loss.v_lo, landau1.ps.loss.v_hi);
  const QuadratureRule eval_rule_bump =
      velocity_rule(32, bump.ps.loss.v_lo, bump.ps.loss.v_hi);

  std::vector<Check> checks;

  // Kinetic regime, micro-macro: density and field at t = 0.5. The trained
  // nets also pin the initial field energy, checked further down.
  Trained mm1;
  {
    double best = 0.0;
    for (int s = 1; s <= B.seeds; ++s) {
      Trained tr = train_case(landau1.ps, Method::micro_macro, B, B.it_mm1, s);
      const FieldSlice sl = eval_slice(landau1, tr, 0.5, eval_rule_landau);
      const double err = rel_l2(sl.rho, landau1.at.at(0.5).rho);
      if (s == 1 || err < best) {
        best = err;
        mm1 = std::move(tr);
      }
    }
    const FieldSlice sl = eval_slice(landau1, mm1, 0.5, eval_rule_landau);
    checks.push_back({"landau-eps1-mm-density-t0.5", best, 5e-3 * B.slack});
    checks.push_back({"landau-eps1-mm-field-t0.5",
                      rel_l2(sl.E, landau1.at.at(0.5).E), 0.16 * B.slack});
  }

  // High-field regime: the asymptotic-preserving losses keep working while
  // the vanilla loss degenerates, so its field error has a floor.
  {
    double best = 0.0;
    for (int s = 1; s <= B.seeds; ++s) {
      Trained tr =
          train_case(landau001.ps, Method::micro_macro, B, B.it_mm001, 10 + s);
      const FieldSlice sl = eval_slice(landau001, tr, 1.0, eval_rule_landau);
      const double err = rel_l2(sl.E, landau001.at.at(1.0).E);
      if (s == 1 || err < best) best = err;
    }
    checks.push_back({"landau-eps0.01-mm-field-t1", best, 0.2 * B.slack});
  }
  {
    double best = 0.0;
    for (int s = 1; s <= B.seeds; ++s) {
      Trained tr =
          train_case(landau001.ps, Method::vanilla, B, B.it_pinn, 20 + s);
      const FieldSlice sl = eval_slice(landau001, tr, 1.0, eval_rule_landau);
      const double err = rel_l2(sl.E, landau001.at.at(1.0).E);
      if (s == 1 || err < best) best = err;
    }
    checks.push_back(
        {"landau-eps0.01-pinn-field-floor-t1", best, 0.5 / B.slack, true});
  }
  Trained mc001;
  {
    double best = 0.0;
    for (int s = 1; s <= B.seeds; ++s) {
      Trained tr = train_case(landau001.ps, Method::mass_conservation, B,
                              B.it_mc001, 30 + s);
      const FieldSlice sl = eval_slice(landau001, tr, 1.0, eval_rule_landau);
      const double err = rel_l2(sl.rho, landau001.at.at(1.0).rho);
      if (s == 1 || err < best) {
        best = err;
        mc001 = std::move(tr);
      }
    }
    checks.push_back({"landau-eps0.01-mc-density-t1", best, 8e-3 * B.slack});
  }

  // Two-population initial data in the high-field regime.
  {
    double best = 0.0;
    for (int s = 1; s <= B.seeds; ++s) {
      Trained tr =
          train_case(bump.ps, Method::mass_conservation, B, B.it_bump, 40 + s);
      const FieldSlice sl = eval_slice(bump, tr, 1.0, eval_rule_bump);
      const double err = rel_l2(sl.rho, bump.at.at(1.0).rho);
      if (s == 1 || err < best) best = err;
    }
    checks.push_back({"bump-eps0.001-mc-density-t1", best, 3e-2 * B.slack});
  }

  // Initial field energy: E(0, x) = 0.1 sin(x/2), whose L2 norm is
  // 0.1 sqrt(2 pi) = 0.25066. Both trained initial conditions must hit it;
  // the reference-solver value is covered by the property suite.
  {
    const double dx = (landau1.ps.loss.x_hi - landau1.ps.loss.x_lo) /
                      double(landau1.xs.size());
    const FieldSlice a = eval_slice(landau1, mm1, 0.0, eval_rule_landau);
    checks.push_back({"initial-energy-mm",
                      std::abs(electric_energy(a.E, dx) - 0.25066),
                      1e-3 * B.slack});
    const FieldSlice b = eval_slice(landau001, mc001, 0.0, eval_rule_landau);
    checks.push_back({"initial-energy-mc",
                      std::abs(electric_energy(b.E, dx) - 0.25066),
                      1e-3 * B.slack});
  }

  std::size_t passed = 0;
  for (const Check& c : checks) {
    std::printf("%s %-36s %.3e (bound %s %.3e) [%s]\n",
                c.pass() ? "PASS" : "FAIL", c.name.c_str(), c.value,
                c.floor ? ">=" : "<=", c.bound, B.label);
    passed += c.pass() ? 1 : 0;
  }
  std::printf("%s: %zu/%zu training criteria hold [%s]\n",
              passed == checks.size() ? "PASS" : "FAIL", passed, checks.size(),
              B.label);
  return passed == checks.size() ? 0 : 1;
}
