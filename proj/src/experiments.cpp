#include "apnn/experiments.hpp"

#include <cmath>
#include <cstddef>
#include <fstream>
#include <random>

#include "apnn/errors.hpp"
#include "apnn/kernels.hpp"
#include "apnn/rng.hpp"

namespace apnn {

namespace {

constexpr double pi = 3.14159265358979323846;

}  // namespace

const char* problem_name(ProblemId id) {
  switch (id) {
    case ProblemId::landau: return "landau";
    case ProblemId::bump_on_tail: return "bump_on_tail";
    case ProblemId::riemann: return "riemann";
    case ProblemId::mixing: return "mixing";
    case ProblemId::gravitational: return "gravitational";
    case ProblemId::uq: return "uq";
  }
  return "landau";
}

ProblemId parse_problem(const std::string& name) {
  if (name == "landau") return ProblemId::landau;
  if (name == "bump_on_tail" || name == "bump") return ProblemId::bump_on_tail;
  if (name == "riemann") return ProblemId::riemann;
  if (name == "mixing") return ProblemId::mixing;
  if (name == "gravitational" || name == "gravity")
    return ProblemId::gravitational;
  if (name == "uq") return ProblemId::uq;
  throw config_error("unknown problem: " + name);
}

double default_eps(ProblemId id) {
  switch (id) {
    case ProblemId::riemann:
    case ProblemId::mixing:
    case ProblemId::gravitational:
      return 1e-3;
    default:
      return 1.0;
  }
}

ProblemSetup make_problem(ProblemId id, double eps0) {
  if (!(eps0 > 0.0))
    throw config_error("scale parameter eps must be positive");

  ProblemSetup ps;
  ps.id = id;
  ps.eps0 = eps0;
  ps.loss.eps = ScaleField{eps0, false, {}};
  ps.ff.n = 1;

  const double sq2pi = std::sqrt(2.0 * pi);

  // dxphi0 is needed twice (equilibrium data and the micro closure), so each
  // case defines it once as a plain function of x.
  std::function<double(double)> dxphi0;

  switch (id) {
    case ProblemId::landau:
    case ProblemId::bump_on_tail:
    case ProblemId::gravitational: {
      const double alpha = 0.05, k = 0.5;
      ps.alpha = alpha;
      ps.k = k;
      ps.loss.x_lo = 0.0;
      ps.loss.x_hi = 4.0 * pi;
      ps.loss.v_lo = id == ProblemId::bump_on_tail ? -8.0 : -6.0;
      ps.loss.v_hi = -ps.loss.v_lo;
      ps.loss.t_final = id == ProblemId::gravitational ? 0.5 : 1.0;
      ps.loss.source = [](double, const double*) { return 1.0; };
      ps.loss.rho0 = [=](double x, const double*) {
        return 1.0 + alpha * std::cos(k * x);
      };
      if (id == ProblemId::gravitational) {
        // Attractive field: dx(phi) = rho - h, so phi0 is a sine.
        ps.loss.field_gradient = true;
        ps.loss.phi0 = [=](double x, const double*) {
          return alpha / k * std::sin(k * x);
        };
        dxphi0 = [=](double x) { return alpha * std::cos(k * x); };
        ps.eval_times = {0.2, 0.5};
      } else {
        ps.loss.phi0 = [=](double x, const double*) {
          return alpha / (k * k) * std::cos(k * x);
        };
        dxphi0 = [=](double x) { return -alpha / k * std::sin(k * x); };
        ps.eval_times = {0.5, 1.0};
      }
      if (id == ProblemId::bump_on_tail) {
        ps.loss.f0 = [=](double x, double v, const double*) {
          double bump = 0.9 * std::exp(-0.5 * v * v) +
                        0.2 * std::exp(-4.0 * (v - 4.5) * (v - 4.5));
          return bump * (1.0 + alpha * std::cos(k * x)) / sq2pi;
        };
      } else {
        // Maxwellian centered at v = 0, not at the shifted mean.
        ps.loss.f0 = [=](double x, double v, const double*) {
          return (1.0 + alpha * std::cos(k * x)) * std::exp(-0.5 * v * v) /
                 sq2pi;
        };
      }
      break;
    }
    case ProblemId::riemann: {
      ps.k = 2.0 * pi;
      ps.loss.x_lo = 0.0;
      ps.loss.x_hi = 1.0;
      ps.loss.t_final = 0.2;
      ps.equilibrium_ic = true;
      ps.loss.rho0 = [](double x, const double*) {
        return (x < 0.25 || x >= 0.75) ? 0.125 : 0.5;
      };
      ps.loss.source = [](double x, const double*) {
        return (x < 0.25 || x >= 0.75) ? 0.5 : 0.125;
      };
      // Piecewise parabolas, C^1 across the jumps, zero mean.
      ps.loss.phi0 = [](double x, const double*) {
        if (x < 0.25) return 3.0 / 16.0 * x * x - 3.0 / 256.0;
        if (x < 0.75)
          return -3.0 / 16.0 * (x - 0.5) * (x - 0.5) + 3.0 / 256.0;
        return 3.0 / 16.0 * (x - 1.0) * (x - 1.0) - 3.0 / 256.0;
      };
      dxphi0 = [](double x) {
        if (x < 0.25) return 3.0 / 8.0 * x;
        if (x < 0.75) return -3.0 / 8.0 * (x - 0.5);
        return 3.0 / 8.0 * (x - 1.0);
      };
      ps.eval_times = {0.0, 0.2};
      break;
    }
    case ProblemId::mixing: {
      ps.k = pi;
      ps.loss.x_lo = -1.0;
      ps.loss.x_hi = 1.0;
      ps.loss.t_final = 0.2;
      ps.equilibrium_ic = true;
      // Scale profile: order one in the bulk, eps0 at the left edge and on
      // the whole right part, with a jump at x = 0.3.
      ps.loss.eps.variable = true;
      ps.loss.eps.fn = [e0 = eps0](double x) {
        if (x > 0.3) return e0;
        return e0 + 0.5 * (std::tanh(5.0 - 10.0 * x) + std::tanh(5.0 + 10.0 * x));
      };
      ps.loss.rho0 = [=](double x, const double*) {
        return sq2pi / 6.0 * (2.0 + std::sin(pi * x));
      };
      ps.loss.source = [=](double, const double*) { return sq2pi / 3.0; };
      ps.loss.phi0 = [=](double x, const double*) {
        return sq2pi / (6.0 * pi * pi) * std::sin(pi * x);
      };
      dxphi0 = [=](double x) { return sq2pi / (6.0 * pi) * std::cos(pi * x); };
      ps.eval_times = {0.0, 0.1, 0.2};
      break;
    }
    case ProblemId::uq: {
      ps.k = 2.0 * pi;
      ps.loss.x_lo = 0.0;
      ps.loss.x_hi = 1.0;
      ps.loss.t_final = 0.1;
      ps.loss.nz = 10;
      ps.equilibrium_ic = true;
      // The random perturbation is shared by rho0 and h, so the field and the
      // equilibrium shift stay deterministic.
      auto pz = [](const double* z) {
        if (!z) return 0.0;
        double p = 0.1;
        for (int i = 0; i < 10; ++i) p *= std::sin(pi * z[i]);
        return p;
      };
      ps.loss.rho0 = [=](double x, const double* z) {
        return sq2pi / 2.0 * (2.0 + std::cos(2.0 * pi * x)) + pz(z);
      };
      ps.loss.source = [=](double, const double* z) { return sq2pi + pz(z); };
      ps.loss.phi0 = [=](double x, const double*) {
        return sq2pi / (8.0 * pi * pi) * std::cos(2.0 * pi * x);
      };
      dxphi0 = [=](double x) {
        return -sq2pi / (4.0 * pi) * std::sin(2.0 * pi * x);
      };
      ps.eval_times = {0.05, 0.1};
      break;
    }
  }

  ps.ff.k = ps.k == 0.0 ? 2.0 * pi / (ps.loss.x_hi - ps.loss.x_lo) : ps.k;

  if (ps.equilibrium_ic) {
    ps.loss.f0 = [rho0 = ps.loss.rho0, dxphi0](double x, double v,
                                               const double* z) {
      return rho0(x, z) * maxwellian(v, dxphi0(x));
    };
    ps.loss.g0 = [](double, double, const double*) { return 0.0; };
  } else {
    ps.loss.g0 = [f0 = ps.loss.f0, rho0 = ps.loss.rho0, dxphi0,
                  eps0](double x, double v, const double* z) {
      return (f0(x, v, z) - rho0(x, z) * maxwellian(v, dxphi0(x))) / eps0;
    };
  }

  return ps;
}

PenaltyConfig default_penalties(ProblemId id, Method m, double eps0) {
  PenaltyConfig p;
  auto domain = [&p](double w) {
    p.domain_macro = p.domain_kinetic = p.domain_poisson = w;
  };
  auto ic = [&p](double w) { p.ic_rho = p.ic_gf = p.ic_phi = w; };
  switch (id) {
    case ProblemId::landau:
      if (m == Method::micro_macro) {
        domain(eps0 >= 1.0 ? 300.0 : 0.5);
      } else if (m == Method::mass_conservation) {
        domain(eps0 >= 1.0 ? 120.0 : eps0 >= 0.1 ? 150.0 : 500.0);
      } else {
        domain(eps0 >= 1.0 ? 30.0 : eps0 >= 0.1 ? 50.0 : 100.0);
      }
      break;
    case ProblemId::bump_on_tail:
      if (m == Method::micro_macro && eps0 < 1.0) {
        domain(1.0);
        ic(1000.0);
      } else {
        domain(50.0);
      }
      break;
    case ProblemId::riemann:
      if (m == Method::micro_macro) {
        p.domain_macro = p.domain_kinetic = 5.0;  // field term stays at 1
        ic(5.0);
      } else if (m == Method::mass_conservation) {
        p.ic_rho = 3.0;
        p.ic_gf = 1000.0;
      }
      break;
    case ProblemId::mixing:
      if (m == Method::micro_macro) domain(0.1);
      break;
    case ProblemId::gravitational:
      if (m == Method::mass_conservation) domain(50.0);
      break;
    case ProblemId::uq:
      if (m == Method::mass_conservation)
        domain(100.0);
      else if (eps0 >= 1.0)
        domain(50.0);
      break;
  }
  return p;
}

BatchConfig default_batches(ProblemId id, Method m) {
  BatchConfig b;
  if (id == ProblemId::riemann) b.n_ic = 512;
  if (m == Method::mass_conservation) b.n_conservation = 256;
  return b;
}

std::vector<int> default_scalar_widths(ProblemId id) {
  (void)id;
  return {128, 128, 128, 128, 128};
}

std::vector<int> default_kinetic_widths(ProblemId id) {
  (void)id;
  return {256, 256, 256, 256, 256};
}

double rel_l2(const std::vector<double>& pred, const std::vector<double>& ref) {
  if (pred.size() != ref.size() || ref.empty())
    throw config_error("metric inputs must have equal nonzero length");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    double d = pred[i] - ref[i];
    num += d * d;
    den += ref[i] * ref[i];
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

double rmse(const std::vector<double>& pred, const std::vector<double>& ref) {
  if (pred.size() != ref.size() || ref.empty())
    throw config_error("metric inputs must have equal nonzero length");
  double num = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    double d = pred[i] - ref[i];
    num += d * d;
  }
  return std::sqrt(num / double(ref.size()));
}

namespace {

void check_eval_net(const Mlp* net, bool has_v, Head head,
                    const FourierFeatures& ff, int nz, const char* what) {
  if (!net) throw config_error(std::string("missing network: ") + what);
  if (net->in_width() != input_width(ff, has_v, nz))
    throw config_error(std::string("network input width mismatch: ") + what);
  if (net->out_width() != 1)
    throw config_error(std::string("network must have one output: ") + what);
  if (net->head != head)
    throw config_error(std::string("unexpected output head: ") + what);
}

}  // namespace

FieldSlice evaluate_fields(const ProblemSetup& prob, const EvalNets& nets,
                           const QuadratureRule& rule, double t,
                           const std::vector<double>& xs, int n_z_draws,
                           std::uint64_t z_seed) {
  const int nx = int(xs.size());
  const int nq = rule.size();
  const int nz = prob.loss.nz;
  if (nx < 1) throw config_error("evaluation mesh is empty");
  if (nq < 1) throw config_error("quadrature rule is empty");
  const FourierFeatures& ff = prob.ff;

  check_eval_net(nets.phi, false, Head::identity, ff, nz, "phi");
  if (nets.method == Method::micro_macro) {
    check_eval_net(nets.rho, false, Head::softplus, ff, nz, "rho");
    check_eval_net(nets.gf, true, Head::zero_mean_v, ff, nz, "g");
  } else if (nets.method == Method::mass_conservation) {
    check_eval_net(nets.rho, false, Head::softplus, ff, nz, "rho");
    check_eval_net(nets.gf, true, Head::softplus, ff, nz, "f");
  } else {
    check_eval_net(nets.gf, true, Head::softplus, ff, nz, "f");
  }

  const int n_draws = nz > 0 ? n_z_draws : 1;
  if (n_draws < 1) throw config_error("z draw count must be >= 1");
  std::vector<double> zdraws(std::size_t(n_draws) * nz);
  std::mt19937_64 eng(z_seed);
  for (double& zi : zdraws) zi = uniform(eng, -1.0, 1.0);

  const SlotLayout lay_s = SlotLayout::make(m_val);
  const SlotLayout lay_phi = SlotLayout::make(m_val | m_dx);
  const SlotLayout lay_c = SlotLayout::make(m_val);

  // Scalar inputs: one row per x. Column inputs: nq rows per x.
  std::vector<double> ts(nx, t), zrow(std::size_t(nx) * nz);
  const int ncol = nx * nq;
  std::vector<double> tc(ncol, t), xc(ncol), vc(ncol),
      zc(std::size_t(ncol) * nz);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < nq; ++j) {
      xc[std::size_t(i) * nq + j] = xs[i];
      vc[std::size_t(i) * nq + j] = rule.nodes[j];
    }

  EvalRecord rec_rho, rec_phi, rec_col;
  std::vector<double> in_s(std::size_t(nx) * lay_s.count * nets.phi->in_width());
  std::vector<double> in_phi(std::size_t(nx) * lay_phi.count *
                             nets.phi->in_width());
  std::vector<double> in_c(std::size_t(ncol) * lay_c.count *
                           nets.gf->in_width());

  FieldSlice out;
  out.rho.assign(nx, 0.0);
  out.phi.assign(nx, 0.0);
  out.E.assign(nx, 0.0);
  out.flux.assign(nx, 0.0);

  const double vlen = rule.length();
  const bool mm = nets.method == Method::micro_macro;
  const bool mc = nets.method == Method::mass_conservation;

  for (int d = 0; d < n_draws; ++d) {
    const double* z = nz > 0 ? zdraws.data() + std::size_t(d) * nz : nullptr;
    if (nz > 0) {
      for (int i = 0; i < nx; ++i)
        for (int q = 0; q < nz; ++q) zrow[std::size_t(i) * nz + q] = z[q];
      for (int i = 0; i < ncol; ++i)
        for (int q = 0; q < nz; ++q) zc[std::size_t(i) * nz + q] = z[q];
    }

    seed_rows(ff, false, nz, lay_phi, ts.data(), xs.data(), nullptr,
              zrow.data(), nx, in_phi.data());
    forward_batch(*nets.phi, lay_phi, in_phi.data(), nx, rec_phi);
    if (nets.rho) {
      seed_rows(ff, false, nz, lay_s, ts.data(), xs.data(), nullptr,
                zrow.data(), nx, in_s.data());
      forward_batch(*nets.rho, lay_s, in_s.data(), nx, rec_rho);
    }
    seed_rows(ff, true, nz, lay_c, tc.data(), xc.data(), vc.data(), zc.data(),
              ncol, in_c.data());
    forward_batch(*nets.gf, lay_c, in_c.data(), ncol, rec_col);

    for (int i = 0; i < nx; ++i) {
      double phiv = rec_phi.out()[i * lay_phi.count + lay_phi.at(slot_val)];
      double phx = rec_phi.out()[i * lay_phi.count + lay_phi.at(slot_dx)];
      const double* col = rec_col.out() + std::size_t(i) * nq;
      double rho = 0.0, flux = 0.0;
      if (mm) {
        rho = softplus(rec_rho.out()[i]);
        double mean = 0.0;
        for (int j = 0; j < nq; ++j) mean += rule.weights[j] * col[j];
        mean /= vlen;
        double epsx = prob.loss.eps(xs[i]);
        for (int j = 0; j < nq; ++j) {
          double fj = rho * maxwellian(rule.nodes[j], phx) +
                      epsx * (col[j] - mean);
          flux += rule.weights[j] * rule.nodes[j] * fj;
        }
      } else {
        double mass = 0.0;
        for (int j = 0; j < nq; ++j) {
          double fj = softplus(col[j]);
          mass += rule.weights[j] * fj;
          flux += rule.weights[j] * rule.nodes[j] * fj;
        }
        rho = mc ? softplus(rec_rho.out()[i]) : mass;
      }
      out.rho[i] += rho;
      out.phi[i] += phiv;
      out.E[i] += -phx;
      out.flux[i] += flux;
    }
  }

  if (n_draws > 1) {
    double inv = 1.0 / n_draws;
    for (int i = 0; i < nx; ++i) {
      out.rho[i] *= inv;
      out.phi[i] *= inv;
      out.E[i] *= inv;
      out.flux[i] *= inv;
    }
  }
  return out;
}

void write_metrics_csv(const std::string& path,
                       const std::vector<MetricRow>& rows) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open metrics file: " + path);
  out.precision(17);
  out << "problem,method,epsilon,metric,quantity,time,value\n";
  for (const MetricRow& r : rows)
    out << r.problem << ',' << r.method << ',' << r.epsilon << ',' << r.metric
        << ',' << r.quantity << ',' << r.time << ',' << r.value << '\n';
  if (!out) throw io_error("failed writing metrics file: " + path);
}

}  // namespace apnn
