#include "apnn/physics.hpp"

#include <cassert>
#include <cmath>

#include "apnn/errors.hpp"
#include "apnn/kernels.hpp"

namespace apnn {

double maxwellian(double v, double dxphi) {
  const double w = v + dxphi;
  return inv_sqrt_2pi * std::exp(-0.5 * w * w);
}

Jet maxwellian_jet(double v, const Jet& phi) {
  const double w = v + phi.dx;
  const double M = inv_sqrt_2pi * std::exp(-0.5 * w * w);
  Jet out;
  out.val = M;
  out.dt = -w * M * phi.dtx;
  out.dx = -w * M * phi.dxx;
  out.dv = -w * M;
  return out;
}

double fokker_planck_L(const Jet& f, double v, double dxphi) {
  return f.val + (v + dxphi) * f.dv + f.dvv;
}

void project_pi(const QuadratureRule& rule, const double* samples, double dxphi,
                double* out) {
  const double mean = moment(rule, samples);
  for (int i = 0; i < rule.size(); ++i)
    out[i] = mean * maxwellian(rule.nodes[i], dxphi);
}

double electric_field(const Jet& phi) { return -phi.dx; }

void FourierFeatures::seed(double x, Jet* out) const {
  for (int m = 1; m <= n; ++m) {
    const double km = m * k;
    const double s = std::sin(km * x);
    const double c = std::cos(km * x);
    Jet js, jc;
    js.val = s;
    js.dx = km * c;
    js.dxx = -km * km * s;
    jc.val = c;
    jc.dx = -km * s;
    jc.dxx = -km * km * c;
    out[2 * (m - 1)] = js;
    out[2 * (m - 1) + 1] = jc;
  }
}

int input_width(const FourierFeatures& ff, bool has_v, int nz) {
  return 1 + ff.count() + (has_v ? 1 : 0) + nz;
}

void build_input_jets(const FourierFeatures& ff, bool has_v, int nz, double t,
                      double x, double v, const double* z, Jet* out) {
  Jet jt;
  jt.val = t;
  jt.dt = 1.0;
  out[0] = jt;
  ff.seed(x, out + 1);
  int off = 1 + ff.count();
  if (has_v) {
    Jet jv;
    jv.val = v;
    jv.dv = 1.0;
    out[off++] = jv;
  }
  for (int i = 0; i < nz; ++i) {
    Jet jz;
    jz.val = z[i];
    out[off++] = jz;
  }
}

void seed_rows(const FourierFeatures& ff, bool has_v, int nz,
               const SlotLayout& lay, const double* t, const double* x,
               const double* v, const double* z, int n, double* rows) {
  const int w0 = input_width(ff, has_v, nz);
  const int S = lay.count;
  std::vector<Jet> jets(w0);
  for (int i = 0; i < n; ++i) {
    build_input_jets(ff, has_v, nz, t[i], x[i], has_v ? v[i] : 0.0,
                     nz ? z + std::size_t(i) * nz : nullptr, jets.data());
    for (int s = 0; s < n_slot_ids; ++s) {
      const int p = lay.pos[s];
      if (p < 0) continue;
      double* row = rows + (std::size_t(i) * S + p) * w0;
      for (int j = 0; j < w0; ++j) row[j] = jets[j].by_id(s);
    }
  }
}

Jet softplus_jet(const Jet& raw) {
  const double s0 = softplus(raw.val);
  const double s1 = sigmoid(raw.val);
  const double s2 = s1 * (1.0 - s1);
  Jet out;
  out.val = s0;
  out.dt = s1 * raw.dt;
  out.dx = s1 * raw.dx;
  out.dv = s1 * raw.dv;
  out.dxx = s1 * raw.dxx + s2 * raw.dx * raw.dx;
  out.dvv = s1 * raw.dvv + s2 * raw.dv * raw.dv;
  out.dtx = s1 * raw.dtx + s2 * raw.dt * raw.dx;
  return out;
}

namespace {

Jet raw_jet(const Mlp& net, const FourierFeatures& ff, bool has_v, int nz,
            double t, double x, double v, const double* z, unsigned mask) {
  const SlotLayout lay = SlotLayout::make(mask);
  std::vector<Jet> in(input_width(ff, has_v, nz));
  build_input_jets(ff, has_v, nz, t, x, v, z, in.data());
  return refk::forward_jet(net, lay, in.data());
}

}  // namespace

Jet eval_scalar_jet(const Mlp& net, const FourierFeatures& ff, int nz, double t,
                    double x, const double* z, unsigned mask) {
  Jet raw = raw_jet(net, ff, false, nz, t, x, 0.0, z, mask);
  switch (net.head) {
    case Head::identity:
      return raw;
    case Head::softplus:
      return softplus_jet(raw);
    default:
      throw numeric_error("zero-mean head needs a velocity column");
  }
}

void eval_column_jets(const Mlp& net, const FourierFeatures& ff,
                      const QuadratureRule& rule, int nz, double t, double x,
                      const double* z, unsigned mask, Jet* out) {
  const int nq = rule.size();
  for (int j = 0; j < nq; ++j)
    out[j] = raw_jet(net, ff, true, nz, t, x, rule.nodes[j], z, mask);
  if (net.head == Head::softplus) {
    for (int j = 0; j < nq; ++j) out[j] = softplus_jet(out[j]);
  } else if (net.head == Head::zero_mean_v) {
    // subtract the velocity average; v-derivatives of the average vanish,
    // every other slot of the average has to go
    double m = 0, mt = 0, mx = 0, mxx = 0, mtx = 0;
    for (int j = 0; j < nq; ++j) {
      m += rule.weights[j] * out[j].val;
      mt += rule.weights[j] * out[j].dt;
      mx += rule.weights[j] * out[j].dx;
      mxx += rule.weights[j] * out[j].dxx;
      mtx += rule.weights[j] * out[j].dtx;
    }
    const double inv_len = 1.0 / rule.length();
    m *= inv_len;
    mt *= inv_len;
    mx *= inv_len;
    mxx *= inv_len;
    mtx *= inv_len;
    for (int j = 0; j < nq; ++j) {
      out[j].val -= m;
      out[j].dt -= mt;
      out[j].dx -= mx;
      out[j].dxx -= mxx;
      out[j].dtx -= mtx;
    }
  }
}

Jet eval_velocity_jet(const Mlp& net, const FourierFeatures& ff,
                      const QuadratureRule& rule, int nz, double t, double x,
                      double v, const double* z, unsigned mask) {
  Jet raw = raw_jet(net, ff, true, nz, t, x, v, z, mask);
  switch (net.head) {
    case Head::identity:
      return raw;
    case Head::softplus:
      return softplus_jet(raw);
    default:
      break;
  }
  std::vector<Jet> col(rule.size());
  for (int j = 0; j < rule.size(); ++j)
    col[j] = raw_jet(net, ff, true, nz, t, x, rule.nodes[j], z, mask);
  double m = 0, mt = 0, mx = 0, mxx = 0, mtx = 0;
  for (int j = 0; j < rule.size(); ++j) {
    m += rule.weights[j] * col[j].val;
    mt += rule.weights[j] * col[j].dt;
    mx += rule.weights[j] * col[j].dx;
    mxx += rule.weights[j] * col[j].dxx;
    mtx += rule.weights[j] * col[j].dtx;
  }
  const double inv_len = 1.0 / rule.length();
  raw.val -= m * inv_len;
  raw.dt -= mt * inv_len;
  raw.dx -= mx * inv_len;
  raw.dxx -= mxx * inv_len;
  raw.dtx -= mtx * inv_len;
  return raw;
}

namespace {

constexpr unsigned mask_rho_mm = m_val | m_dt | m_dx;
constexpr unsigned mask_phi_mm = m_dx | m_dxx | m_dtx;
constexpr unsigned mask_g = m_val | m_dt | m_dx | m_dv | m_dvv;
constexpr unsigned mask_rho_mc = m_val | m_dt;
constexpr unsigned mask_phi_mc = m_dx | m_dxx;

// d/dx <v rho M> at the nodes of the rule: integrand jets differentiated.
double dx_flux_rho_maxwellian(const QuadratureRule& rule, const Jet& rho,
                              const Jet& phi) {
  double acc = 0.0;
  for (int j = 0; j < rule.size(); ++j) {
    const Jet M = maxwellian_jet(rule.nodes[j], phi);
    acc += rule.weights[j] * rule.nodes[j] * (rho.dx * M.val + rho.val * M.dx);
  }
  return acc;
}

}  // namespace

MmResidual residual_micro_macro(const MmNets& nets, const FourierFeatures& ff,
                                const QuadratureRule& rule, const Point& p,
                                double eps, double h) {
  const Jet rho = eval_scalar_jet(*nets.rho, ff, p.nz, p.t, p.x, p.z, mask_rho_mm);
  const Jet phi = eval_scalar_jet(*nets.phi, ff, p.nz, p.t, p.x, p.z, mask_phi_mm);
  std::vector<Jet> g_col(rule.size());
  eval_column_jets(*nets.g, ff, rule, p.nz, p.t, p.x, p.z, mask_g, g_col.data());
  double dxflux_g = 0.0;
  for (int j = 0; j < rule.size(); ++j)
    dxflux_g += rule.weights[j] * rule.nodes[j] * g_col[j].dx;
  const double dxflux_rhoM = dx_flux_rho_maxwellian(rule, rho, phi);

  const Jet g = eval_velocity_jet(*nets.g, ff, rule, p.nz, p.t, p.x, p.v, p.z, mask_g);
  const Jet M = maxwellian_jet(p.v, phi);
  const double Lg = fokker_planck_L(g, p.v, phi.dx);
  const double dx_rhoM = rho.dx * M.val + rho.val * M.dx;
  const double brace =
      Lg - (p.v * dx_rhoM - dxflux_rhoM * M.val) - rho.val * M.dt;

  MmResidual r;
  r.macro_res = rho.dt + dxflux_rhoM + eps * dxflux_g;
  r.micro_res = (eps * g.dt + eps * (p.v * g.dx - dxflux_g * M.val)) - brace;
  r.poisson_res = -phi.dxx - (rho.val - h);
  return r;
}

MmResidual limit_residual_mm(const MmNets& nets, const FourierFeatures& ff,
                             const QuadratureRule& rule, const Point& p,
                             double h) {
  const Jet rho = eval_scalar_jet(*nets.rho, ff, p.nz, p.t, p.x, p.z, mask_rho_mm);
  const Jet phi = eval_scalar_jet(*nets.phi, ff, p.nz, p.t, p.x, p.z, mask_phi_mm);
  const double dxflux_rhoM = dx_flux_rho_maxwellian(rule, rho, phi);

  const Jet g = eval_velocity_jet(*nets.g, ff, rule, p.nz, p.t, p.x, p.v, p.z, mask_g);
  const Jet M = maxwellian_jet(p.v, phi);
  const double Lg = fokker_planck_L(g, p.v, phi.dx);
  const double dx_rhoM = rho.dx * M.val + rho.val * M.dx;
  // the balance L g = (I - Pi)(v dx(rho M)) + rho dt M, written as a residual
  const double brace =
      Lg - (p.v * dx_rhoM - dxflux_rhoM * M.val) - rho.val * M.dt;

  MmResidual r;
  r.macro_res = rho.dt + dxflux_rhoM;
  r.micro_res = -brace;
  r.poisson_res = -phi.dxx - (rho.val - h);
  return r;
}

McResidual residual_mass_conservation(const McNets& nets,
                                      const FourierFeatures& ff,
                                      const QuadratureRule& rule,
                                      const Point& p, double eps, double h) {
  const Jet rho = eval_scalar_jet(*nets.rho, ff, p.nz, p.t, p.x, p.z, mask_rho_mc);
  const Jet phi = eval_scalar_jet(*nets.phi, ff, p.nz, p.t, p.x, p.z, mask_phi_mc);
  std::vector<Jet> f_col(rule.size());
  eval_column_jets(*nets.f, ff, rule, p.nz, p.t, p.x, p.z, mask_g, f_col.data());
  double dxflux_f = 0.0, mass_f = 0.0;
  for (int j = 0; j < rule.size(); ++j) {
    dxflux_f += rule.weights[j] * rule.nodes[j] * f_col[j].dx;
    mass_f += rule.weights[j] * f_col[j].val;
  }
  const Jet f = eval_velocity_jet(*nets.f, ff, rule, p.nz, p.t, p.x, p.v, p.z, mask_g);
  const double Lf = fokker_planck_L(f, p.v, phi.dx);

  McResidual r;
  r.macro_res = rho.dt + dxflux_f;
  r.kinetic_res = (eps * f.dt + eps * p.v * f.dx) - Lf;
  r.poisson_res = -phi.dxx - (rho.val - h);
  r.conservation_res = mass_f - rho.val;
  return r;
}

McResidual limit_residual_mc(const McNets& nets, const FourierFeatures& ff,
                             const QuadratureRule& rule, const Point& p,
                             double h) {
  const Jet rho = eval_scalar_jet(*nets.rho, ff, p.nz, p.t, p.x, p.z, mask_rho_mc);
  const Jet phi = eval_scalar_jet(*nets.phi, ff, p.nz, p.t, p.x, p.z, mask_phi_mc);
  std::vector<Jet> f_col(rule.size());
  eval_column_jets(*nets.f, ff, rule, p.nz, p.t, p.x, p.z, mask_g, f_col.data());
  double dxflux_f = 0.0, mass_f = 0.0;
  for (int j = 0; j < rule.size(); ++j) {
    dxflux_f += rule.weights[j] * rule.nodes[j] * f_col[j].dx;
    mass_f += rule.weights[j] * f_col[j].val;
  }
  const Jet f = eval_velocity_jet(*nets.f, ff, rule, p.nz, p.t, p.x, p.v, p.z, mask_g);
  const double Lf = fokker_planck_L(f, p.v, phi.dx);

  McResidual r;
  r.macro_res = rho.dt + dxflux_f;
  r.kinetic_res = -Lf;
  r.poisson_res = -phi.dxx - (rho.val - h);
  r.conservation_res = mass_f - rho.val;
  return r;
}

PinnResidual residual_vanilla(const PinnNets& nets, const FourierFeatures& ff,
                              const QuadratureRule& rule, const Point& p,
                              double eps, double h) {
  const Jet phi = eval_scalar_jet(*nets.phi, ff, p.nz, p.t, p.x, p.z, mask_phi_mc);
  std::vector<Jet> f_col(rule.size());
  eval_column_jets(*nets.f, ff, rule, p.nz, p.t, p.x, p.z, mask_g, f_col.data());
  double mass_f = 0.0;
  for (int j = 0; j < rule.size(); ++j)
    mass_f += rule.weights[j] * f_col[j].val;
  const Jet f = eval_velocity_jet(*nets.f, ff, rule, p.nz, p.t, p.x, p.v, p.z, mask_g);
  const double Lf = fokker_planck_L(f, p.v, phi.dx);

  PinnResidual r;
  r.vlasov_res = (eps * f.dt + eps * p.v * f.dx) - Lf;
  r.poisson_res = -phi.dxx - (mass_f - h);
  return r;
}

PinnResidual limit_residual_pinn(const PinnNets& nets,
                                 const FourierFeatures& ff,
                                 const QuadratureRule& rule, const Point& p,
                                 double h) {
  const Jet phi = eval_scalar_jet(*nets.phi, ff, p.nz, p.t, p.x, p.z, mask_phi_mc);
  std::vector<Jet> f_col(rule.size());
  eval_column_jets(*nets.f, ff, rule, p.nz, p.t, p.x, p.z, mask_g, f_col.data());
  double mass_f = 0.0;
  for (int j = 0; j < rule.size(); ++j)
    mass_f += rule.weights[j] * f_col[j].val;
  const Jet f = eval_velocity_jet(*nets.f, ff, rule, p.nz, p.t, p.x, p.v, p.z, mask_g);
  const double Lf = fokker_planck_L(f, p.v, phi.dx);

  PinnResidual r;
  r.vlasov_res = -Lf;
  r.poisson_res = -phi.dxx - (mass_f - h);
  return r;
}

}
