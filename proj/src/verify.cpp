#include "apnn/verify.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <vector>

#include "apnn/experiments.hpp"
#include "apnn/kernels.hpp"
#include "apnn/losses.hpp"
#include "apnn/physics.hpp"
#include "apnn/quadrature.hpp"
#include "apnn/rng.hpp"
#include "apnn/solver.hpp"

namespace apnn {

namespace {

std::string bound_detail(double measured, double bound) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "measured %.3e, bound %.1e", measured, bound);
  return buf;
}

PropertyResult checked(const std::string& name, double measured, double bound) {
  return {name, measured <= bound, bound_detail(measured, bound)};
}

Mlp small_net(std::vector<int> widths, Head head, std::uint64_t seed) {
  Mlp net = make_mlp(std::move(widths), head);
  xavier_init(net, seed);
  return net;
}

constexpr unsigned kAllSlots =
    m_val | m_dt | m_dx | m_dv | m_dxx | m_dvv | m_dtx;

// Degree <= 2n-1 exactness of the velocity rule against closed-form moments.
PropertyResult check_quadrature() {
  const QuadratureRule rule = velocity_rule(32, -6.0, 6.0);
  double worst = 0.0;
  std::vector<double> s(rule.size());
  for (int k = 0; k <= 63; ++k) {
    for (int i = 0; i < rule.size(); ++i) s[i] = std::pow(rule.nodes[i], k);
    const double num = moment(rule, s.data());
    const double exact =
        (k % 2 == 1) ? 0.0 : 2.0 * std::pow(6.0, k + 1) / (k + 1);
    const double scale = 2.0 * std::pow(6.0, k + 1) / (k + 1);
    worst = std::max(worst, std::abs(num - exact) / scale);
  }
  return checked("quadrature-monomial-exactness", worst, 1e-12);
}

// Network jets against central finite differences of the plain evaluation.
PropertyResult check_jets_fd() {
  FourierFeatures ff{0.5, 1};
  const QuadratureRule rule = velocity_rule(12, -6.0, 6.0);
  const Mlp kin_id = small_net({4, 12, 12, 1}, Head::identity, 21);
  const Mlp kin_zm = small_net({4, 12, 12, 1}, Head::zero_mean_v, 22);
  const Mlp sca_sp = small_net({3, 10, 10, 1}, Head::softplus, 23);

  std::mt19937_64 eng(5);
  const double h1 = 1e-5, h2 = 1e-4;
  double worst = 0.0;
  auto score = [&worst](double fd, double an) {
    worst = std::max(worst, std::abs(fd - an) / std::max(1.0, std::abs(fd)));
  };

  for (int it = 0; it < 8; ++it) {
    const double t = uniform(eng, 0.0, 1.0);
    const double x = uniform(eng, 0.0, 4.0 * 3.141592653589793);
    const double v = uniform(eng, -6.0, 6.0);

    for (const Mlp* net : {&kin_id, &kin_zm}) {
      auto V = [&](double tt, double xx, double vv) {
        return eval_velocity_jet(*net, ff, rule, 0, tt, xx, vv, nullptr, m_val)
            .val;
      };
      const Jet j =
          eval_velocity_jet(*net, ff, rule, 0, t, x, v, nullptr, kAllSlots);
      score((V(t + h1, x, v) - V(t - h1, x, v)) / (2 * h1), j.dt);
      score((V(t, x + h1, v) - V(t, x - h1, v)) / (2 * h1), j.dx);
      score((V(t, x, v + h1) - V(t, x, v - h1)) / (2 * h1), j.dv);
      score((V(t, x + h2, v) - 2 * V(t, x, v) + V(t, x - h2, v)) / (h2 * h2),
            j.dxx);
      score((V(t, x, v + h2) - 2 * V(t, x, v) + V(t, x, v - h2)) / (h2 * h2),
            j.dvv);
      score((V(t + h2, x + h2, v) - V(t + h2, x - h2, v) -
             V(t - h2, x + h2, v) + V(t - h2, x - h2, v)) /
                (4 * h2 * h2),
            j.dtx);
    }

    auto S = [&](double tt, double xx) {
      return eval_scalar_jet(sca_sp, ff, 0, tt, xx, nullptr, m_val).val;
    };
    const Jet j = eval_scalar_jet(sca_sp, ff, 0, t, x, nullptr,
                                  m_val | m_dt | m_dx | m_dxx | m_dtx);
    score((S(t + h1, x) - S(t - h1, x)) / (2 * h1), j.dt);
    score((S(t, x + h1) - S(t, x - h1)) / (2 * h1), j.dx);
    score((S(t, x + h2) - 2 * S(t, x) + S(t, x - h2)) / (h2 * h2), j.dxx);
    score((S(t + h2, x + h2) - S(t + h2, x - h2) - S(t - h2, x + h2) +
           S(t - h2, x - h2)) /
              (4 * h2 * h2),
          j.dtx);
  }
  return checked("network-jets-vs-finite-differences", worst, 1e-5);
}

// Batched kernel: bit-stable across worker counts, and in agreement with the
// per-sample reference up to reassociation-level roundoff.
void check_batched_kernel(std::vector<PropertyResult>& results) {
  FourierFeatures ff{0.5, 1};
  const Mlp net = small_net({4, 16, 16, 1}, Head::identity, 31);
  const SlotLayout lay = SlotLayout::make(kAllSlots);
  const int n = 64;

  std::mt19937_64 eng(9);
  std::vector<double> t(n), x(n), v(n);
  for (int i = 0; i < n; ++i) {
    t[i] = uniform(eng, 0.0, 1.0);
    x[i] = uniform(eng, 0.0, 12.0);
    v[i] = uniform(eng, -6.0, 6.0);
  }

  std::vector<double> in(std::size_t(n) * lay.count * net.in_width());
  seed_rows(ff, true, 0, lay, t.data(), x.data(), v.data(), nullptr, n,
            in.data());

  const int saved = worker_count();
  double worst_threads = 0.0, worst_ref = 0.0;
  std::vector<double> first;
  for (int workers : {1, 3}) {
    set_worker_count(workers);
    EvalRecord rec;
    forward_batch(net, lay, in.data(), n, rec);
    if (workers == 1) {
      first.assign(rec.out(), rec.out() + rec.rows());
    } else {
      for (int r = 0; r < rec.rows(); ++r)
        worst_threads = std::max(worst_threads,
                                 std::abs(rec.out()[r] - first[r]));
    }
    for (int i = 0; i < n; ++i) {
      std::vector<Jet> inj(net.in_width());
      build_input_jets(ff, true, 0, t[i], x[i], v[i], nullptr, inj.data());
      const Jet ref = refk::forward_jet(net, lay, inj.data());
      for (int s = 0; s < n_slot_ids; ++s) {
        const double b = rec.out()[i * lay.count + lay.at(SlotId(s))];
        worst_ref = std::max(worst_ref, std::abs(b - ref.by_id(s)));
      }
    }
  }
  set_worker_count(saved);
  results.push_back(
      checked("batched-kernel-thread-invariance", worst_threads, 0.0));
  results.push_back(
      checked("batched-kernel-matches-reference", worst_ref, 1e-13));
}

struct MethodRig {
  LossSetup setup;
  Mlp rho, gf, phi;
  NetSet nets() const {
    return {setup.method == Method::vanilla ? nullptr : &rho, &gf, &phi};
  }
};

MethodRig make_rig(Method m, ProblemId pid, double eps0, std::uint64_t seed) {
  MethodRig rig;
  ProblemSetup ps = make_problem(pid, eps0);
  rig.setup.method = m;
  rig.setup.ff = ps.ff;
  rig.setup.rule = velocity_rule(12, ps.loss.v_lo, ps.loss.v_hi);
  rig.setup.problem = ps.loss;
  rig.setup.penalties = default_penalties(pid, m, eps0);
  rig.setup.penalties.bc_rho = 0.25;
  rig.setup.penalties.bc_gf = 0.25;
  rig.setup.penalties.bc_phi = 0.25;
  rig.rho = small_net({3, 10, 10, 1}, Head::softplus, seed);
  rig.gf = small_net({4, 12, 12, 1},
                     m == Method::micro_macro ? Head::zero_mean_v
                                              : Head::softplus,
                     seed + 1);
  rig.phi = small_net({3, 10, 10, 1}, Head::identity, seed + 2);
  return rig;
}

// Parameter gradients of the empirical loss against central differences.
PropertyResult check_loss_gradients() {
  double worst = 0.0;
  for (Method m : {Method::micro_macro, Method::mass_conservation,
                   Method::vanilla}) {
    MethodRig rig = make_rig(m, ProblemId::landau, 0.5, 41);
    BatchConfig bc{16, 8, 4, m == Method::mass_conservation ? 8 : 0};
    std::mt19937_64 eng(7);
    const SampleBatch batch = sample_batch(bc, rig.setup.problem, eng);

    std::vector<double> gr(rig.rho.n_params()), gg(rig.gf.n_params()),
        gp(rig.phi.n_params());
    empirical_loss_grad(rig.setup, rig.nets(), batch,
                        m == Method::vanilla ? nullptr : gr.data(), gg.data(),
                        gp.data());

    std::mt19937_64 pick(11);
    Mlp* nets3[] = {&rig.rho, &rig.gf, &rig.phi};
    std::vector<double>* grads3[] = {&gr, &gg, &gp};
    for (int q = 0; q < 3; ++q) {
      if (q == 0 && m == Method::vanilla) continue;
      Mlp& net = *nets3[q];
      for (int rep = 0; rep < 12; ++rep) {
        const std::size_t idx = pick() % net.n_params();
        const double p0 = net.params[idx];
        const double h = 1e-6 * std::max(1.0, std::abs(p0));
        net.params[idx] = p0 + h;
        const double lp = empirical_loss(rig.setup, rig.nets(), batch).total;
        net.params[idx] = p0 - h;
        const double lm = empirical_loss(rig.setup, rig.nets(), batch).total;
        net.params[idx] = p0;
        const double fd = (lp - lm) / (2 * h);
        const double an = (*grads3[q])[idx];
        worst = std::max(worst,
                         std::abs(fd - an) / std::max(1.0, std::abs(fd)));
      }
    }
  }
  return checked("loss-gradient-vs-finite-differences", worst, 1e-4);
}

// At eps = 0 the pointwise residuals must equal the independently coded
// limit-system residuals, value for value.
PropertyResult check_limit_residuals() {
  MethodRig mm = make_rig(Method::micro_macro, ProblemId::landau, 0.5, 51);
  MethodRig mc =
      make_rig(Method::mass_conservation, ProblemId::landau, 0.5, 61);
  MethodRig pn = make_rig(Method::vanilla, ProblemId::landau, 0.5, 71);
  const MmNets mmn{&mm.rho, &mm.gf, &mm.phi};
  const McNets mcn{&mc.rho, &mc.gf, &mc.phi};
  const PinnNets pnn{&pn.gf, &pn.phi};
  const QuadratureRule& rule = mm.setup.rule;
  const FourierFeatures ff = mm.setup.ff;

  std::mt19937_64 eng(13);
  double worst = 0.0;
  auto same = [&worst](double a, double b) {
    if (!(a == b)) worst = std::max(worst, std::abs(a - b));
  };
  for (int it = 0; it < 20; ++it) {
    Point p;
    p.t = uniform(eng, 0.0, 1.0);
    p.x = uniform(eng, 0.0, 4.0 * 3.141592653589793);
    p.v = uniform(eng, -6.0, 6.0);
    const MmResidual a1 = residual_micro_macro(mmn, ff, rule, p, 0.0, 1.0);
    const MmResidual b1 = limit_residual_mm(mmn, ff, rule, p, 1.0);
    same(a1.macro_res, b1.macro_res);
    same(a1.micro_res, b1.micro_res);
    same(a1.poisson_res, b1.poisson_res);
    const McResidual a2 =
        residual_mass_conservation(mcn, ff, rule, p, 0.0, 1.0);
    const McResidual b2 = limit_residual_mc(mcn, ff, rule, p, 1.0);
    same(a2.macro_res, b2.macro_res);
    same(a2.kinetic_res, b2.kinetic_res);
    same(a2.poisson_res, b2.poisson_res);
    same(a2.conservation_res, b2.conservation_res);
    const PinnResidual a3 = residual_vanilla(pnn, ff, rule, p, 0.0, 1.0);
    const PinnResidual b3 = limit_residual_pinn(pnn, ff, rule, p, 1.0);
    same(a3.vlasov_res, b3.vlasov_res);
    same(a3.poisson_res, b3.poisson_res);
  }
  return checked("limit-residual-identity-at-eps-zero", worst, 0.0);
}

// At eps = 0 the batched empirical loss must agree with the loss assembled
// from the limit residuals through the per-point path, term by term.
PropertyResult check_limit_loss() {
  double worst = 0.0;
  for (Method m : {Method::micro_macro, Method::mass_conservation,
                   Method::vanilla}) {
    MethodRig rig = make_rig(m, ProblemId::riemann, 1.0, 81);
    rig.setup.problem.eps = ScaleField{0.0, false, {}};
    BatchConfig bc{32, 16, 8, m == Method::mass_conservation ? 16 : 0};
    std::mt19937_64 eng(17);
    const SampleBatch batch = sample_batch(bc, rig.setup.problem, eng);
    const LossReport a = empirical_loss(rig.setup, rig.nets(), batch);
    const LossReport b = limit_loss(rig.setup, rig.nets(), batch);
    worst = std::max(worst, std::abs(a.total - b.total) /
                                std::max(1.0, std::abs(b.total)));
    for (const auto& term : b.terms)
      worst = std::max(worst, std::abs(a.term(term.first) - term.second) /
                                  std::max(1.0, std::abs(term.second)));
  }
  return checked("limit-loss-identity-at-eps-zero", worst, 1e-12);
}

// The collision operator annihilates every multiple of the local Maxwellian.
PropertyResult check_annihilation() {
  double worst = 0.0;
  for (double p : {-1.0, -0.5, 0.0, 0.5, 1.0})
    for (double c : {0.7, 1.3})
      for (int i = 0; i <= 24; ++i) {
        const double v = -6.0 + 0.5 * i;
        const double w = v + p;
        const double M = maxwellian(v, p);
        Jet f;
        f.val = c * M;
        f.dv = -w * c * M;
        f.dvv = c * M * (w * w - 1.0);
        worst = std::max(worst, std::abs(fokker_planck_L(f, v, p)));
      }
  return checked("collision-annihilates-maxwellian", worst, 1e-12);
}

// The zero-mean output head keeps the velocity average of g at zero.
PropertyResult check_zero_mean_head() {
  FourierFeatures ff{0.5, 1};
  const QuadratureRule rule = velocity_rule(32, -6.0, 6.0);
  const Mlp g = small_net({4, 16, 16, 1}, Head::zero_mean_v, 91);
  std::mt19937_64 eng(19);
  std::vector<Jet> col(rule.size());
  std::vector<double> vals(rule.size());
  double worst = 0.0;
  for (int it = 0; it < 1000; ++it) {
    const double t = uniform(eng, 0.0, 1.0);
    const double x = uniform(eng, 0.0, 4.0 * 3.141592653589793);
    eval_column_jets(g, ff, rule, 0, t, x, nullptr, m_val, col.data());
    for (int j = 0; j < rule.size(); ++j) vals[j] = col[j].val;
    worst = std::max(worst, std::abs(moment(rule, vals.data())));
  }
  return checked("zero-mean-velocity-head", worst, 1e-12);
}

SolverProblem wrap_solver_problem(const ProblemSetup& ps) {
  SolverProblem sp;
  sp.f0 = [f0 = ps.loss.f0](double x, double v) { return f0(x, v, nullptr); };
  sp.rho0 = [r0 = ps.loss.rho0](double x) { return r0(x, nullptr); };
  sp.h = [h = ps.loss.source](double x) { return h(x, nullptr); };
  sp.eps = ps.loss.eps;
  sp.field_gradient = ps.loss.field_gradient;
  return sp;
}

double grid_mass(const GridSolution& s) {
  double m = 0.0;
  for (double r : s.rho) m += r;
  return m * s.grid.dx();
}

// Mass conservation and positivity of the kinetic scheme.
void check_solver_invariants(std::vector<PropertyResult>& out) {
  const ProblemSetup ps = make_problem(ProblemId::landau, 1.0);
  const Grid grid{64, 64, ps.loss.x_lo, ps.loss.x_hi, ps.loss.v_lo,
                  ps.loss.v_hi};
  const SolverRun run =
      solve_kinetic(wrap_solver_problem(ps), grid, {0.0, 0.1});
  const double m0 = grid_mass(run.snaps[0]);
  const double m1 = grid_mass(run.snaps[1]);
  out.push_back(checked("kinetic-solver-mass-conservation",
                        std::abs(m1 - m0) / std::abs(m0), 1e-10));
  double fmin = 0.0;
  for (const GridSolution& s : run.snaps)
    for (double f : s.f) fmin = std::min(fmin, f);
  out.push_back(checked("kinetic-solver-positivity", -fmin, 0.0));
}

// The field at t = 0 has E = 0.1 sin(x/2), whose discrete L2 norm is
// 0.1 sqrt(2 pi) at any even resolution.
PropertyResult check_initial_energy() {
  const ProblemSetup ps = make_problem(ProblemId::landau, 1.0);
  const Grid grid{128, 16, ps.loss.x_lo, ps.loss.x_hi, ps.loss.v_lo,
                  ps.loss.v_hi};
  const SolverRun run =
      solve_kinetic(wrap_solver_problem(ps), grid, {0.0});
  const GridSolution& s = run.snaps[0];
  const double measured = electric_energy(s.E, s.grid.dx());
  return checked("initial-electric-energy",
                 std::abs(measured - 0.25066), 1e-3);
}

// Small eps: the kinetic density must land on the drift-limit density.
PropertyResult check_kinetic_vs_limit() {
  const ProblemSetup ps = make_problem(ProblemId::landau, 1e-3);
  const Grid grid{128, 96, ps.loss.x_lo, ps.loss.x_hi, ps.loss.v_lo,
                  ps.loss.v_hi};
  const SolverProblem sp = wrap_solver_problem(ps);
  const SolverRun kin = solve_kinetic(sp, grid, {0.1});
  const SolverRun lim = solve_limit(sp, grid, {0.1});
  return checked("kinetic-matches-drift-limit",
                 rel_l2(kin.snaps[0].rho, lim.snaps[0].rho), 1e-2);
}

// First-order self-convergence of the drift-limit scheme.
PropertyResult check_limit_convergence() {
  const ProblemSetup ps = make_problem(ProblemId::landau, 1e-3);
  const SolverProblem sp = wrap_solver_problem(ps);
  std::vector<std::vector<double>> rho;
  for (int nx : {64, 128, 256}) {
    const Grid grid{nx, 8, ps.loss.x_lo, ps.loss.x_hi, ps.loss.v_lo,
                    ps.loss.v_hi};
    rho.push_back(solve_limit(sp, grid, {0.1}).snaps[0].rho);
  }
  auto down_err = [](const std::vector<double>& coarse,
                     const std::vector<double>& fine) {
    const int stride = int(fine.size() / coarse.size());
    double e = 0.0;
    for (std::size_t i = 0; i < coarse.size(); ++i) {
      const double d = coarse[i] - fine[i * stride];
      e += d * d;
    }
    return std::sqrt(e / double(coarse.size()));
  };
  const double e1 = down_err(rho[0], rho[1]);
  const double e2 = down_err(rho[1], rho[2]);
  const double ratio = e2 > 0.0 ? e1 / e2 : 0.0;
  PropertyResult r;
  r.name = "drift-limit-first-order-convergence";
  r.pass = ratio >= 1.5 && e2 > 0.0;
  char buf[96];
  std::snprintf(buf, sizeof buf,
                "refinement error ratio %.2f, bound >= 1.5", ratio);
  r.detail = buf;
  return r;
}

}  // namespace

std::vector<PropertyResult> run_property_suite() {
  std::vector<PropertyResult> out;
  out.push_back(check_quadrature());
  out.push_back(check_jets_fd());
  check_batched_kernel(out);
  out.push_back(check_loss_gradients());
  out.push_back(check_limit_residuals());
  out.push_back(check_limit_loss());
  out.push_back(check_annihilation());
  out.push_back(check_zero_mean_head());
  check_solver_invariants(out);
  out.push_back(check_initial_energy());
  out.push_back(check_kinetic_vs_limit());
  out.push_back(check_limit_convergence());
  return out;
}

bool all_pass(const std::vector<PropertyResult>& results) {
  for (const PropertyResult& r : results)
    if (!r.pass) return false;
  return true;
}

}  // namespace apnn
