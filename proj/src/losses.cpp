#include "apnn/losses.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "apnn/errors.hpp"
#include "apnn/kernels.hpp"
#include "apnn/rng.hpp"
#include "apnn/tape.hpp"

namespace apnn {

const char* method_name(Method m) {
  switch (m) {
    case Method::micro_macro:
      return "mm";
    case Method::mass_conservation:
      return "mc";
    default:
      return "pinn";
  }
}

Method parse_method(const std::string& name) {
  if (name == "mm" || name == "micro_macro") return Method::micro_macro;
  if (name == "mc" || name == "mass_conservation")
    return Method::mass_conservation;
  if (name == "pinn" || name == "vanilla") return Method::vanilla;
  throw config_error("unknown method '" + name + "' (want mm, mc, or pinn)");
}

void PenaltyConfig::validate() const {
  const double ws[] = {domain_macro, domain_kinetic, domain_poisson,
                       bc_rho,       bc_gf,          bc_phi,
                       ic_rho,       ic_gf,          ic_phi,
                       conservation};
  for (double w : ws)
    if (!(w >= 0.0)) throw config_error("penalty weights must be >= 0");
}

void BatchConfig::validate() const {
  if (n_domain < 1) throw config_error("n_domain must be >= 1");
  if (n_ic < 0 || n_bc < 0 || n_conservation < 0)
    throw config_error("batch counts must be >= 0");
}

SampleBatch sample_batch(const BatchConfig& cfg, const LossProblem& prob,
                         std::mt19937_64& eng) {
  cfg.validate();
  if (!(prob.x_hi > prob.x_lo) || !(prob.t_final > 0.0) ||
      !(prob.v_hi > prob.v_lo))
    throw config_error("sampling domain is empty");

  SampleBatch b;
  b.n_domain = cfg.n_domain;
  b.n_ic = cfg.n_ic;
  b.n_bc = cfg.n_bc;
  b.n_conservation = cfg.n_conservation;
  b.nz = prob.nz;

  auto draw_z = [&](std::vector<double>& dst) {
    for (int k = 0; k < prob.nz; ++k) dst.push_back(uniform(eng, -1.0, 1.0));
  };
  for (int i = 0; i < cfg.n_domain; ++i) {
    b.dom_t.push_back(uniform(eng, 0.0, prob.t_final));
    b.dom_x.push_back(uniform(eng, prob.x_lo, prob.x_hi));
    b.dom_v.push_back(uniform(eng, prob.v_lo, prob.v_hi));
    draw_z(b.dom_z);
  }
  for (int i = 0; i < cfg.n_ic; ++i) {
    b.ic_x.push_back(uniform(eng, prob.x_lo, prob.x_hi));
    b.ic_v.push_back(uniform(eng, prob.v_lo, prob.v_hi));
    draw_z(b.ic_z);
  }
  for (int i = 0; i < cfg.n_bc; ++i) {
    b.bc_t.push_back(uniform(eng, 0.0, prob.t_final));
    b.bc_v.push_back(uniform(eng, prob.v_lo, prob.v_hi));
    draw_z(b.bc_z);
  }
  for (int i = 0; i < cfg.n_conservation; ++i) {
    b.cons_t.push_back(uniform(eng, 0.0, prob.t_final));
    b.cons_x.push_back(uniform(eng, prob.x_lo, prob.x_hi));
    draw_z(b.cons_z);
  }
  return b;
}

double LossReport::term(const std::string& name) const {
  for (const auto& kv : terms)
    if (kv.first == name) return kv.second;
  throw std::out_of_range("unknown loss term: " + name);
}

namespace {

using rev::Tape;
using rev::Var;

// Points per evaluation segment. Fixed so that record shapes, summation
// order, and therefore every result bit are independent of the worker count.
constexpr int kSegment = 32;

struct Bundle {
  const Mlp* net = nullptr;
  SlotLayout lay;
  bool has_v = false;
  EvalRecord rec;
  std::vector<double> adj;

  void run(const FourierFeatures& ff, int nz, const double* t, const double* x,
           const double* v, const double* z, int n) {
    const int w0 = input_width(ff, has_v, nz);
    std::vector<double> rows(std::size_t(n) * lay.count * w0);
    seed_rows(ff, has_v, nz, lay, t, x, v, z, n, rows.data());
    forward_batch(*net, lay, rows.data(), n, rec);
    adj.assign(std::size_t(n) * lay.count, 0.0);
  }
};

struct LeafJet {
  Var val, dt, dx, dv, dxx, dvv, dtx;
};

LeafJet grab(Tape& tp, const Bundle& b, int e) {
  LeafJet j;
  const double* out = b.rec.out() + std::size_t(e) * b.lay.count;
  auto put = [&](SlotId s, Var& dst) {
    if (b.lay.has(s)) dst = rev::make_leaf(tp, out[b.lay.at(s)]);
  };
  put(slot_val, j.val);
  put(slot_dt, j.dt);
  put(slot_dx, j.dx);
  put(slot_dv, j.dv);
  put(slot_dxx, j.dxx);
  put(slot_dvv, j.dvv);
  put(slot_dtx, j.dtx);
  return j;
}

void scatter(const Tape& tp, Bundle& b, int e, const LeafJet& j) {
  double* adj = b.adj.data() + std::size_t(e) * b.lay.count;
  auto put = [&](SlotId s, const Var& src) {
    if (src.tape) adj[b.lay.at(s)] = tp.adj(src.i);
  };
  put(slot_val, j.val);
  put(slot_dt, j.dt);
  put(slot_dx, j.dx);
  put(slot_dv, j.dv);
  put(slot_dxx, j.dxx);
  put(slot_dvv, j.dvv);
  put(slot_dtx, j.dtx);
}

// Maxwellian and its derivative chain through phi as tape nodes; mirrors
// maxwellian_jet.
struct TapeMax {
  Var M, Mx, Mt;
};

TapeMax tape_maxwellian(double v, Var phi_dx, Var phi_dxx, const Var* phi_dtx) {
  Var w = phi_dx + v;
  Var M = rev::exp((w * w) * (-0.5)) * inv_sqrt_2pi;
  Var neg_wM = -(w * M);
  TapeMax r;
  r.M = M;
  r.Mx = neg_wM * phi_dxx;
  if (phi_dtx) r.Mt = neg_wM * (*phi_dtx);
  return r;
}

// Per-eval coordinate expansion for quadrature columns: nq evals per point.
struct ColCoords {
  std::vector<double> t, x, v, z;
};

void expand_column(const double* t, const double* x, const double* z,
                   int pcount, int nz, const QuadratureRule& rule,
                   ColCoords& c) {
  const int nq = rule.size();
  c.t.resize(std::size_t(pcount) * nq);
  c.x.resize(c.t.size());
  c.v.resize(c.t.size());
  c.z.resize(c.t.size() * nz);
  for (int p = 0; p < pcount; ++p)
    for (int j = 0; j < nq; ++j) {
      const std::size_t e = std::size_t(p) * nq + j;
      c.t[e] = t[p];
      c.x[e] = x[p];
      c.v[e] = rule.nodes[j];
      for (int k = 0; k < nz; ++k) c.z[e * nz + k] = z[std::size_t(p) * nz + k];
    }
}

// Boundary pairs: eval 2p is (t_p, x_lo), eval 2p+1 is (t_p, x_hi).
struct PairCoords {
  std::vector<double> t, x, v, z;
};

void expand_pairs(const double* t, const double* v, const double* z,
                  int pcount, int nz, double x_lo, double x_hi,
                  PairCoords& c) {
  c.t.resize(std::size_t(pcount) * 2);
  c.x.resize(c.t.size());
  c.v.resize(c.t.size());
  c.z.resize(c.t.size() * nz);
  for (int p = 0; p < pcount; ++p)
    for (int s = 0; s < 2; ++s) {
      const std::size_t e = std::size_t(p) * 2 + s;
      c.t[e] = t[p];
      c.x[e] = s == 0 ? x_lo : x_hi;
      c.v[e] = v ? v[p] : 0.0;
      for (int k = 0; k < nz; ++k) c.z[e * nz + k] = z[std::size_t(p) * nz + k];
    }
}

void expand_pair_columns(const double* t, const double* z, int pcount, int nz,
                         double x_lo, double x_hi, const QuadratureRule& rule,
                         ColCoords& c) {
  const int nq = rule.size();
  c.t.resize(std::size_t(pcount) * 2 * nq);
  c.x.resize(c.t.size());
  c.v.resize(c.t.size());
  c.z.resize(c.t.size() * nz);
  for (int p = 0; p < pcount; ++p)
    for (int s = 0; s < 2; ++s)
      for (int j = 0; j < nq; ++j) {
        const std::size_t e = (std::size_t(p) * 2 + s) * nq + j;
        c.t[e] = t[p];
        c.x[e] = s == 0 ? x_lo : x_hi;
        c.v[e] = rule.nodes[j];
        for (int k = 0; k < nz; ++k)
          c.z[e * nz + k] = z[std::size_t(p) * nz + k];
      }
}

// Zero-mean head at column level: raw column means of val, dt, dx weighted
// by w_j / |Omega|.
struct ColMeans {
  Var m, mt, mx;
};

ColMeans column_means(const QuadratureRule& rule, const LeafJet* col,
                      bool with_derivs) {
  const double inv_len = 1.0 / rule.length();
  ColMeans r;
  r.m = col[0].val * (rule.weights[0] * inv_len);
  if (with_derivs) {
    r.mt = col[0].dt * (rule.weights[0] * inv_len);
    r.mx = col[0].dx * (rule.weights[0] * inv_len);
  }
  for (int j = 1; j < rule.size(); ++j) {
    const double c = rule.weights[j] * inv_len;
    r.m = r.m + col[j].val * c;
    if (with_derivs) {
      r.mt = r.mt + col[j].dt * c;
      r.mx = r.mx + col[j].dx * c;
    }
  }
  return r;
}

double term_value(double weight, double sum_sq, int count) {
  return count > 0 ? (weight / count) * sum_sq : 0.0;
}

struct GradSet {
  double* rho = nullptr;
  double* gf = nullptr;
  double* phi = nullptr;
  bool any() const { return rho || gf || phi; }
};

void check_sizes(const LossSetup& S, const NetSet& nets,
                 const SampleBatch& B) {
  const auto& P = S.problem;
  if (B.nz != P.nz) throw config_error("batch nz does not match problem nz");
  if (int(B.dom_t.size()) != B.n_domain ||
      int(B.dom_x.size()) != B.n_domain ||
      int(B.dom_v.size()) != B.n_domain ||
      int(B.dom_z.size()) != B.n_domain * B.nz ||
      int(B.ic_x.size()) != B.n_ic || int(B.ic_v.size()) != B.n_ic ||
      int(B.ic_z.size()) != B.n_ic * B.nz || int(B.bc_t.size()) != B.n_bc ||
      int(B.bc_v.size()) != B.n_bc || int(B.bc_z.size()) != B.n_bc * B.nz ||
      int(B.cons_t.size()) != B.n_conservation ||
      int(B.cons_x.size()) != B.n_conservation ||
      int(B.cons_z.size()) != B.n_conservation * B.nz)
    throw config_error("sample batch arrays do not match its counts");
  if (B.n_domain < 1) throw config_error("loss needs a nonempty domain batch");
  if (S.rule.size() < 1) throw config_error("velocity rule is empty");
  S.penalties.validate();

  const bool mm = S.method == Method::micro_macro;
  const bool needs_rho = S.method != Method::vanilla;
  if ((needs_rho && !nets.rho) || !nets.gf || !nets.phi)
    throw config_error("loss is missing a network");
  const int w_scalar = input_width(S.ff, false, P.nz);
  const int w_kinetic = input_width(S.ff, true, P.nz);
  if (needs_rho && nets.rho->in_width() != w_scalar)
    throw config_error("rho network input width does not match the problem");
  if (nets.phi->in_width() != w_scalar)
    throw config_error("phi network input width does not match the problem");
  if (nets.gf->in_width() != w_kinetic)
    throw config_error("kinetic network input width does not match the problem");
  if (needs_rho && nets.rho->head != Head::softplus)
    throw config_error("rho network must use the softplus head");
  if (nets.phi->head != Head::identity)
    throw config_error("phi network must use the identity head");
  if (mm && nets.gf->head != Head::zero_mean_v)
    throw config_error("g network must use the zero-mean head");
  if (!mm && nets.gf->head != Head::softplus)
    throw config_error("f network must use the softplus head");
}

void finish_report(LossReport& rep) {
  rep.total = 0.0;
  for (const auto& kv : rep.terms) {
    if (!std::isfinite(kv.second))
      throw numeric_error("non-finite value in loss term " + kv.first);
    rep.total += kv.second;
  }
}

// ------------------------------ micro-macro -------------------------------

LossReport loss_mm(const LossSetup& S, const NetSet& nets,
                   const SampleBatch& B, const GradSet& g) {
  const QuadratureRule& rule = S.rule;
  const int nq = rule.size();
  const int nz = B.nz;
  const auto& P = S.problem;
  const PenaltyConfig& pen = S.penalties;
  const bool wg = g.any();

  double s_macro = 0, s_micro = 0, s_pois = 0;
  double s_bc_rho = 0, s_bc_g = 0, s_bc_phi = 0;
  double s_ic_rho = 0, s_ic_g = 0, s_ic_phi = 0;

  const unsigned mask_rho = m_val | m_dt | m_dx;
  const unsigned mask_phi = m_dx | m_dxx | m_dtx;
  const unsigned mask_col = m_val | m_dt | m_dx;
  const unsigned mask_pt = m_val | m_dt | m_dx | m_dv | m_dvv;

  // domain
  {
    const double cm = 2.0 * pen.domain_macro / B.n_domain;
    const double ck = 2.0 * pen.domain_kinetic / B.n_domain;
    const double cp = 2.0 * pen.domain_poisson / B.n_domain;
    for (int seg = 0; seg < B.n_domain; seg += kSegment) {
      const int pc = std::min(kSegment, B.n_domain - seg);
      const double* t = B.dom_t.data() + seg;
      const double* x = B.dom_x.data() + seg;
      const double* v = B.dom_v.data() + seg;
      const double* z = B.dom_z.data() + std::size_t(seg) * nz;

      Bundle rho_b{nets.rho, SlotLayout::make(mask_rho), false, {}, {}};
      Bundle phi_b{nets.phi, SlotLayout::make(mask_phi), false, {}, {}};
      Bundle col_b{nets.gf, SlotLayout::make(mask_col), true, {}, {}};
      Bundle pt_b{nets.gf, SlotLayout::make(mask_pt), true, {}, {}};
      rho_b.run(S.ff, nz, t, x, nullptr, z, pc);
      phi_b.run(S.ff, nz, t, x, nullptr, z, pc);
      ColCoords cc;
      expand_column(t, x, z, pc, nz, rule, cc);
      col_b.run(S.ff, nz, cc.t.data(), cc.x.data(), cc.v.data(), cc.z.data(),
                pc * nq);
      pt_b.run(S.ff, nz, t, x, v, z, pc);

      std::vector<double> q_macro(pc), q_micro(pc), q_pois(pc);
#pragma omp parallel for num_threads(worker_count()) schedule(static)
      for (int p = 0; p < pc; ++p) {
        Tape tp;
        const double eps = P.eps(x[p]);
        const double h = P.source(x[p], nz ? z + std::size_t(p) * nz : nullptr);

        LeafJet R = grab(tp, rho_b, p);
        LeafJet F = grab(tp, phi_b, p);
        std::vector<LeafJet> C(nq);
        for (int j = 0; j < nq; ++j) C[j] = grab(tp, col_b, p * nq + j);
        LeafJet Q = grab(tp, pt_b, p);

        Var s1 = rev::softplus1(R.val);
        Var rv = rev::softplus0(R.val);
        Var rt = s1 * R.dt;
        Var rx = s1 * R.dx;

        ColMeans cm_g = column_means(rule, C.data(), true);

        // d/dx <v g> with the head correction applied to each integrand
        Var dxflux_g = (C[0].dx - cm_g.mx) * (rule.weights[0] * rule.nodes[0]);
        for (int j = 1; j < nq; ++j)
          dxflux_g =
              dxflux_g + (C[j].dx - cm_g.mx) * (rule.weights[j] * rule.nodes[j]);

        // d/dx <v rho M> from integrand jets
        TapeMax M0 = tape_maxwellian(rule.nodes[0], F.dx, F.dxx, nullptr);
        Var dxflux_rhoM =
            (rx * M0.M + rv * M0.Mx) * (rule.weights[0] * rule.nodes[0]);
        for (int j = 1; j < nq; ++j) {
          TapeMax Mj = tape_maxwellian(rule.nodes[j], F.dx, F.dxx, nullptr);
          dxflux_rhoM = dxflux_rhoM + (rx * Mj.M + rv * Mj.Mx) *
                                          (rule.weights[j] * rule.nodes[j]);
        }

        Var macro = (rt + dxflux_rhoM) + dxflux_g * eps;

        // micro residual at the sampled velocity
        Var gv = Q.val - cm_g.m;
        Var gt = Q.dt - cm_g.mt;
        Var gx = Q.dx - cm_g.mx;
        TapeMax Mp = tape_maxwellian(v[p], F.dx, F.dxx, &F.dtx);
        Var wp = F.dx + v[p];
        Var Lg = (gv + wp * Q.dv) + Q.dvv;
        Var dx_rhoM = rx * Mp.M + rv * Mp.Mx;
        Var brace = (Lg - (dx_rhoM * v[p] - dxflux_rhoM * Mp.M)) - rv * Mp.Mt;
        Var micro = (gt * eps + (gx * v[p] - dxflux_g * Mp.M) * eps) - brace;

        Var pois = P.field_gradient ? F.dx - (rv - h) : (-F.dxx) - (rv - h);

        q_macro[p] = macro.v() * macro.v();
        q_micro[p] = micro.v() * micro.v();
        q_pois[p] = pois.v() * pois.v();

        if (wg) {
          tp.seed(macro.i, cm * macro.v());
          tp.seed(micro.i, ck * micro.v());
          tp.seed(pois.i, cp * pois.v());
          tp.backward();
          scatter(tp, rho_b, p, R);
          scatter(tp, phi_b, p, F);
          for (int j = 0; j < nq; ++j) scatter(tp, col_b, p * nq + j, C[j]);
          scatter(tp, pt_b, p, Q);
        }
      }
      for (int p = 0; p < pc; ++p) {
        s_macro += q_macro[p];
        s_micro += q_micro[p];
        s_pois += q_pois[p];
      }
      if (wg) {
        if (g.rho) backward_batch(rho_b.rec, rho_b.adj.data(), g.rho);
        if (g.phi) backward_batch(phi_b.rec, phi_b.adj.data(), g.phi);
        if (g.gf) {
          backward_batch(col_b.rec, col_b.adj.data(), g.gf);
          backward_batch(pt_b.rec, pt_b.adj.data(), g.gf);
        }
      }
    }
  }

  // boundary pairs
  if (B.n_bc > 0) {
    const double cr = 2.0 * pen.bc_rho / B.n_bc;
    const double cg = 2.0 * pen.bc_gf / B.n_bc;
    const double cf = 2.0 * pen.bc_phi / B.n_bc;
    for (int seg = 0; seg < B.n_bc; seg += kSegment) {
      const int pc = std::min(kSegment, B.n_bc - seg);
      const double* t = B.bc_t.data() + seg;
      const double* v = B.bc_v.data() + seg;
      const double* z = B.bc_z.data() + std::size_t(seg) * nz;

      Bundle rho_b{nets.rho, SlotLayout::make(m_val), false, {}, {}};
      Bundle phi_b{nets.phi, SlotLayout::make(m_val), false, {}, {}};
      Bundle col_b{nets.gf, SlotLayout::make(m_val), true, {}, {}};
      Bundle pt_b{nets.gf, SlotLayout::make(m_val), true, {}, {}};
      PairCoords ps;
      expand_pairs(t, nullptr, z, pc, nz, P.x_lo, P.x_hi, ps);
      rho_b.run(S.ff, nz, ps.t.data(), ps.x.data(), nullptr, ps.z.data(),
                pc * 2);
      phi_b.run(S.ff, nz, ps.t.data(), ps.x.data(), nullptr, ps.z.data(),
                pc * 2);
      PairCoords pv;
      expand_pairs(t, v, z, pc, nz, P.x_lo, P.x_hi, pv);
      pt_b.run(S.ff, nz, pv.t.data(), pv.x.data(), pv.v.data(), pv.z.data(),
               pc * 2);
      ColCoords cc;
      expand_pair_columns(t, z, pc, nz, P.x_lo, P.x_hi, rule, cc);
      col_b.run(S.ff, nz, cc.t.data(), cc.x.data(), cc.v.data(), cc.z.data(),
                pc * 2 * nq);

      std::vector<double> q_r(pc), q_g(pc), q_f(pc);
#pragma omp parallel for num_threads(worker_count()) schedule(static)
      for (int p = 0; p < pc; ++p) {
        Tape tp;
        LeafJet Rl = grab(tp, rho_b, 2 * p), Rh = grab(tp, rho_b, 2 * p + 1);
        LeafJet Fl = grab(tp, phi_b, 2 * p), Fh = grab(tp, phi_b, 2 * p + 1);
        LeafJet Ql = grab(tp, pt_b, 2 * p), Qh = grab(tp, pt_b, 2 * p + 1);
        std::vector<LeafJet> Cl(nq), Ch(nq);
        for (int j = 0; j < nq; ++j) {
          Cl[j] = grab(tp, col_b, (2 * p) * nq + j);
          Ch[j] = grab(tp, col_b, (2 * p + 1) * nq + j);
        }
        Var r_bc = rev::softplus0(Rl.val) - rev::softplus0(Rh.val);
        ColMeans ml = column_means(rule, Cl.data(), false);
        ColMeans mh = column_means(rule, Ch.data(), false);
        Var g_bc = (Ql.val - ml.m) - (Qh.val - mh.m);
        Var f_bc = Fl.val - Fh.val;

        q_r[p] = r_bc.v() * r_bc.v();
        q_g[p] = g_bc.v() * g_bc.v();
        q_f[p] = f_bc.v() * f_bc.v();
        if (wg) {
          tp.seed(r_bc.i, cr * r_bc.v());
          tp.seed(g_bc.i, cg * g_bc.v());
          tp.seed(f_bc.i, cf * f_bc.v());
          tp.backward();
          scatter(tp, rho_b, 2 * p, Rl);
          scatter(tp, rho_b, 2 * p + 1, Rh);
          scatter(tp, phi_b, 2 * p, Fl);
          scatter(tp, phi_b, 2 * p + 1, Fh);
          scatter(tp, pt_b, 2 * p, Ql);
          scatter(tp, pt_b, 2 * p + 1, Qh);
          for (int j = 0; j < nq; ++j) {
            scatter(tp, col_b, (2 * p) * nq + j, Cl[j]);
            scatter(tp, col_b, (2 * p + 1) * nq + j, Ch[j]);
          }
        }
      }
      for (int p = 0; p < pc; ++p) {
        s_bc_rho += q_r[p];
        s_bc_g += q_g[p];
        s_bc_phi += q_f[p];
      }
      if (wg) {
        if (g.rho) backward_batch(rho_b.rec, rho_b.adj.data(), g.rho);
        if (g.phi) backward_batch(phi_b.rec, phi_b.adj.data(), g.phi);
        if (g.gf) {
          backward_batch(col_b.rec, col_b.adj.data(), g.gf);
          backward_batch(pt_b.rec, pt_b.adj.data(), g.gf);
        }
      }
    }
  }

  // initial data
  if (B.n_ic > 0) {
    const double cr = 2.0 * pen.ic_rho / B.n_ic;
    const double cg = 2.0 * pen.ic_gf / B.n_ic;
    const double cf = 2.0 * pen.ic_phi / B.n_ic;
    for (int seg = 0; seg < B.n_ic; seg += kSegment) {
      const int pc = std::min(kSegment, B.n_ic - seg);
      const double* x = B.ic_x.data() + seg;
      const double* v = B.ic_v.data() + seg;
      const double* z = B.ic_z.data() + std::size_t(seg) * nz;
      std::vector<double> t0(pc, 0.0);

      Bundle rho_b{nets.rho, SlotLayout::make(m_val), false, {}, {}};
      Bundle phi_b{nets.phi, SlotLayout::make(m_val), false, {}, {}};
      Bundle col_b{nets.gf, SlotLayout::make(m_val), true, {}, {}};
      Bundle pt_b{nets.gf, SlotLayout::make(m_val), true, {}, {}};
      rho_b.run(S.ff, nz, t0.data(), x, nullptr, z, pc);
      phi_b.run(S.ff, nz, t0.data(), x, nullptr, z, pc);
      ColCoords cc;
      expand_column(t0.data(), x, z, pc, nz, rule, cc);
      col_b.run(S.ff, nz, cc.t.data(), cc.x.data(), cc.v.data(), cc.z.data(),
                pc * nq);
      pt_b.run(S.ff, nz, t0.data(), x, v, z, pc);

      std::vector<double> q_r(pc), q_g(pc), q_f(pc);
#pragma omp parallel for num_threads(worker_count()) schedule(static)
      for (int p = 0; p < pc; ++p) {
        Tape tp;
        const double* zp = nz ? z + std::size_t(p) * nz : nullptr;
        LeafJet R = grab(tp, rho_b, p);
        LeafJet F = grab(tp, phi_b, p);
        LeafJet Q = grab(tp, pt_b, p);
        std::vector<LeafJet> C(nq);
        for (int j = 0; j < nq; ++j) C[j] = grab(tp, col_b, p * nq + j);

        Var r_ic = rev::softplus0(R.val) - P.rho0(x[p], zp);
        ColMeans mg = column_means(rule, C.data(), false);
        Var g_ic = (Q.val - mg.m) - P.g0(x[p], v[p], zp);
        Var f_ic = F.val - P.phi0(x[p], zp);

        q_r[p] = r_ic.v() * r_ic.v();
        q_g[p] = g_ic.v() * g_ic.v();
        q_f[p] = f_ic.v() * f_ic.v();
        if (wg) {
          tp.seed(r_ic.i, cr * r_ic.v());
          tp.seed(g_ic.i, cg * g_ic.v());
          tp.seed(f_ic.i, cf * f_ic.v());
          tp.backward();
          scatter(tp, rho_b, p, R);
          scatter(tp, phi_b, p, F);
          scatter(tp, pt_b, p, Q);
          for (int j = 0; j < nq; ++j) scatter(tp, col_b, p * nq + j, C[j]);
        }
      }
      for (int p = 0; p < pc; ++p) {
        s_ic_rho += q_r[p];
        s_ic_g += q_g[p];
        s_ic_phi += q_f[p];
      }
      if (wg) {
        if (g.rho) backward_batch(rho_b.rec, rho_b.adj.data(), g.rho);
        if (g.phi) backward_batch(phi_b.rec, phi_b.adj.data(), g.phi);
        if (g.gf) {
          backward_batch(col_b.rec, col_b.adj.data(), g.gf);
          backward_batch(pt_b.rec, pt_b.adj.data(), g.gf);
        }
      }
    }
  }

  LossReport rep;
  rep.terms = {
      {"domain/macro", term_value(pen.domain_macro, s_macro, B.n_domain)},
      {"domain/micro", term_value(pen.domain_kinetic, s_micro, B.n_domain)},
      {"domain/poisson", term_value(pen.domain_poisson, s_pois, B.n_domain)},
      {"bc/rho", term_value(pen.bc_rho, s_bc_rho, B.n_bc)},
      {"bc/g", term_value(pen.bc_gf, s_bc_g, B.n_bc)},
      {"bc/phi", term_value(pen.bc_phi, s_bc_phi, B.n_bc)},
      {"ic/rho", term_value(pen.ic_rho, s_ic_rho, B.n_ic)},
      {"ic/g", term_value(pen.ic_gf, s_ic_g, B.n_ic)},
      {"ic/phi", term_value(pen.ic_phi, s_ic_phi, B.n_ic)},
  };
  finish_report(rep);
  return rep;
}

// ---------------------------- mass conservation ---------------------------

LossReport loss_mc(const LossSetup& S, const NetSet& nets,
                   const SampleBatch& B, const GradSet& g) {
  const QuadratureRule& rule = S.rule;
  const int nq = rule.size();
  const int nz = B.nz;
  const auto& P = S.problem;
  const PenaltyConfig& pen = S.penalties;
  const bool wg = g.any();

  double s_macro = 0, s_kin = 0, s_pois = 0, s_cons = 0;
  double s_bc_rho = 0, s_bc_f = 0, s_bc_phi = 0;
  double s_ic_rho = 0, s_ic_f = 0, s_ic_phi = 0;

  // domain
  {
    const double cm = 2.0 * pen.domain_macro / B.n_domain;
    const double ck = 2.0 * pen.domain_kinetic / B.n_domain;
    const double cp = 2.0 * pen.domain_poisson / B.n_domain;
    for (int seg = 0; seg < B.n_domain; seg += kSegment) {
      const int pc = std::min(kSegment, B.n_domain - seg);
      const double* t = B.dom_t.data() + seg;
      const double* x = B.dom_x.data() + seg;
      const double* v = B.dom_v.data() + seg;
      const double* z = B.dom_z.data() + std::size_t(seg) * nz;

      Bundle rho_b{nets.rho, SlotLayout::make(m_val | m_dt), false, {}, {}};
      Bundle phi_b{nets.phi, SlotLayout::make(m_dx | m_dxx), false, {}, {}};
      Bundle col_b{nets.gf, SlotLayout::make(m_val | m_dx), true, {}, {}};
      Bundle pt_b{nets.gf,
                  SlotLayout::make(m_val | m_dt | m_dx | m_dv | m_dvv),
                  true,
                  {},
                  {}};
      rho_b.run(S.ff, nz, t, x, nullptr, z, pc);
      phi_b.run(S.ff, nz, t, x, nullptr, z, pc);
      ColCoords cc;
      expand_column(t, x, z, pc, nz, rule, cc);
      col_b.run(S.ff, nz, cc.t.data(), cc.x.data(), cc.v.data(), cc.z.data(),
                pc * nq);
      pt_b.run(S.ff, nz, t, x, v, z, pc);

      std::vector<double> q_macro(pc), q_kin(pc), q_pois(pc);
#pragma omp parallel for num_threads(worker_count()) schedule(static)
      for (int p = 0; p < pc; ++p) {
        Tape tp;
        const double eps = P.eps(x[p]);
        const double h = P.source(x[p], nz ? z + std::size_t(p) * nz : nullptr);

        LeafJet R = grab(tp, rho_b, p);
        LeafJet F = grab(tp, phi_b, p);
        LeafJet Q = grab(tp, pt_b, p);
        std::vector<LeafJet> C(nq);
        for (int j = 0; j < nq; ++j) C[j] = grab(tp, col_b, p * nq + j);

        Var rv = rev::softplus0(R.val);
        Var rt = rev::softplus1(R.val) * R.dt;

        // d/dx <v f> with the softplus chain on each node
        Var fx0 = rev::softplus1(C[0].val) * C[0].dx;
        Var dxflux_f = fx0 * (rule.weights[0] * rule.nodes[0]);
        for (int j = 1; j < nq; ++j) {
          Var fxj = rev::softplus1(C[j].val) * C[j].dx;
          dxflux_f = dxflux_f + fxj * (rule.weights[j] * rule.nodes[j]);
        }
        Var macro = rt + dxflux_f;

        Var sp1 = rev::softplus1(Q.val);
        Var fv = rev::softplus0(Q.val);
        Var ft = sp1 * Q.dt;
        Var fx = sp1 * Q.dx;
        Var fdv = sp1 * Q.dv;
        Var fdvv = sp1 * Q.dvv + rev::softplus2(Q.val) * (Q.dv * Q.dv);
        Var wp = F.dx + v[p];
        Var Lf = (fv + wp * fdv) + fdvv;
        Var kin = (ft * eps + (fx * v[p]) * eps) - Lf;

        Var pois = P.field_gradient ? F.dx - (rv - h) : (-F.dxx) - (rv - h);

        q_macro[p] = macro.v() * macro.v();
        q_kin[p] = kin.v() * kin.v();
        q_pois[p] = pois.v() * pois.v();
        if (wg) {
          tp.seed(macro.i, cm * macro.v());
          tp.seed(kin.i, ck * kin.v());
          tp.seed(pois.i, cp * pois.v());
          tp.backward();
          scatter(tp, rho_b, p, R);
          scatter(tp, phi_b, p, F);
          scatter(tp, pt_b, p, Q);
          for (int j = 0; j < nq; ++j) scatter(tp, col_b, p * nq + j, C[j]);
        }
      }
      for (int p = 0; p < pc; ++p) {
        s_macro += q_macro[p];
        s_kin += q_kin[p];
        s_pois += q_pois[p];
      }
      if (wg) {
        if (g.rho) backward_batch(rho_b.rec, rho_b.adj.data(), g.rho);
        if (g.phi) backward_batch(phi_b.rec, phi_b.adj.data(), g.phi);
        if (g.gf) {
          backward_batch(col_b.rec, col_b.adj.data(), g.gf);
          backward_batch(pt_b.rec, pt_b.adj.data(), g.gf);
        }
      }
    }
  }

  // conservation points: <f> = rho as a soft constraint
  if (B.n_conservation > 0) {
    const double cc4 = 2.0 * pen.conservation / B.n_conservation;
    for (int seg = 0; seg < B.n_conservation; seg += kSegment) {
      const int pc = std::min(kSegment, B.n_conservation - seg);
      const double* t = B.cons_t.data() + seg;
      const double* x = B.cons_x.data() + seg;
      const double* z = B.cons_z.data() + std::size_t(seg) * nz;

      Bundle rho_b{nets.rho, SlotLayout::make(m_val), false, {}, {}};
      Bundle col_b{nets.gf, SlotLayout::make(m_val), true, {}, {}};
      rho_b.run(S.ff, nz, t, x, nullptr, z, pc);
      ColCoords cc;
      expand_column(t, x, z, pc, nz, rule, cc);
      col_b.run(S.ff, nz, cc.t.data(), cc.x.data(), cc.v.data(), cc.z.data(),
                pc * nq);

      std::vector<double> q_c(pc);
#pragma omp parallel for num_threads(worker_count()) schedule(static)
      for (int p = 0; p < pc; ++p) {
        Tape tp;
        LeafJet R = grab(tp, rho_b, p);
        std::vector<LeafJet> C(nq);
        for (int j = 0; j < nq; ++j) C[j] = grab(tp, col_b, p * nq + j);
        Var mass = rev::softplus0(C[0].val) * rule.weights[0];
        for (int j = 1; j < nq; ++j)
          mass = mass + rev::softplus0(C[j].val) * rule.weights[j];
        Var r = mass - rev::softplus0(R.val);
        q_c[p] = r.v() * r.v();
        if (wg) {
          tp.seed(r.i, cc4 * r.v());
          tp.backward();
          scatter(tp, rho_b, p, R);
          for (int j = 0; j < nq; ++j) scatter(tp, col_b, p * nq + j, C[j]);
        }
      }
      for (int p = 0; p < pc; ++p) s_cons += q_c[p];
      if (wg) {
        if (g.rho) backward_batch(rho_b.rec, rho_b.adj.data(), g.rho);
        if (g.gf) backward_batch(col_b.rec, col_b.adj.data(), g.gf);
      }
    }
  }

  // boundary pairs
  if (B.n_bc > 0) {
    const double cr = 2.0 * pen.bc_rho / B.n_bc;
    const double cfk = 2.0 * pen.bc_gf / B.n_bc;
    const double cf = 2.0 * pen.bc_phi / B.n_bc;
    for (int seg = 0; seg < B.n_bc; seg += kSegment) {
      const int pc = std::min(kSegment, B.n_bc - seg);
      const double* t = B.bc_t.data() + seg;
      const double* v = B.bc_v.data() + seg;
      const double* z = B.bc_z.data() + std::size_t(seg) * nz;

      Bundle rho_b{nets.rho, SlotLayout::make(m_val), false, {}, {}};
      Bundle phi_b{nets.phi, SlotLayout::make(m_val), false, {}, {}};
      Bundle pt_b{nets.gf, SlotLayout::make(m_val), true, {}, {}};
      PairCoords ps;
      expand_pairs(t, nullptr, z, pc, nz, P.x_lo, P.x_hi, ps);
      rho_b.run(S.ff, nz, ps.t.data(), ps.x.data(), nullptr, ps.z.data(),
                pc * 2);
      phi_b.run(S.ff, nz, ps.t.data(), ps.x.data(), nullptr, ps.z.data(),
                pc * 2);
      PairCoords pv;
      expand_pairs(t, v, z, pc, nz, P.x_lo, P.x_hi, pv);
      pt_b.run(S.ff, nz, pv.t.data(), pv.x.data(), pv.v.data(), pv.z.data(),
               pc * 2);

      std::vector<double> q_r(pc), q_fk(pc), q_f(pc);
#pragma omp parallel for num_threads(worker_count()) schedule(static)
      for (int p = 0; p < pc; ++p) {
        Tape tp;
        LeafJet Rl = grab(tp, rho_b, 2 * p), Rh = grab(tp, rho_b, 2 * p + 1);
        LeafJet Fl = grab(tp, phi_b, 2 * p), Fh = grab(tp, phi_b, 2 * p + 1);
        LeafJet Ql = grab(tp, pt_b, 2 * p), Qh = grab(tp, pt_b, 2 * p + 1);
        Var r_bc = rev::softplus0(Rl.val) - rev::softplus0(Rh.val);
        Var f_bc = rev::softplus0(Ql.val) - rev::softplus0(Qh.val);
        Var p_bc = Fl.val - Fh.val;
        q_r[p] = r_bc.v() * r_bc.v();
        q_fk[p] = f_bc.v() * f_bc.v();
        q_f[p] = p_bc.v() * p_bc.v();
        if (wg) {
          tp.seed(r_bc.i, cr * r_bc.v());
          tp.seed(f_bc.i, cfk * f_bc.v());
          tp.seed(p_bc.i, cf * p_bc.v());
          tp.backward();
          scatter(tp, rho_b, 2 * p, Rl);
          scatter(tp, rho_b, 2 * p + 1, Rh);
          scatter(tp, phi_b, 2 * p, Fl);
          scatter(tp, phi_b, 2 * p + 1, Fh);
          scatter(tp, pt_b, 2 * p, Ql);
          scatter(tp, pt_b, 2 * p + 1, Qh);
        }
      }
      for (int p = 0; p < pc; ++p) {
        s_bc_rho += q_r[p];
        s_bc_f += q_fk[p];
        s_bc_phi += q_f[p];
      }
      if (wg) {
        if (g.rho) backward_batch(rho_b.rec, rho_b.adj.data(), g.rho);
        if (g.phi) backward_batch(phi_b.rec, phi_b.adj.data(), g.phi);
        if (g.gf) backward_batch(pt_b.rec, pt_b.adj.data(), g.gf);
      }
    }
  }

  // initial data
  if (B.n_ic > 0) {
    const double cr = 2.0 * pen.ic_rho / B.n_ic;
    const double cfk = 2.0 * pen.ic_gf / B.n_ic;
    const double cf = 2.0 * pen.ic_phi / B.n_ic;
    for (int seg = 0; seg < B.n_ic; seg += kSegment) {
      const int pc = std::min(kSegment, B.n_ic - seg);
      const double* x = B.ic_x.data() + seg;
      const double* v = B.ic_v.data() + seg;
      const double* z = B.ic_z.data() + std::size_t(seg) * nz;
      std::vector<double> t0(pc, 0.0);

      Bundle rho_b{nets.rho, SlotLayout::make(m_val), false, {}, {}};
      Bundle phi_b{nets.phi, SlotLayout::make(m_val), false, {}, {}};
      Bundle pt_b{nets.gf, SlotLayout::make(m_val), true, {}, {}};
      rho_b.run(S.ff, nz, t0.data(), x, nullptr, z, pc);
      phi_b.run(S.ff, nz, t0.data(), x, nullptr, z, pc);
      pt_b.run(S.ff, nz, t0.data(), x, v, z, pc);

      std::vector<double> q_r(pc), q_fk(pc), q_f(pc);
#pragma omp parallel for num_threads(worker_count()) schedule(static)
      for (int p = 0; p < pc; ++p) {
        Tape tp;
        const double* zp = nz ? z + std::size_t(p) * nz : nullptr;
        LeafJet R = grab(tp, rho_b, p);
        LeafJet F = grab(tp, phi_b, p);
        LeafJet Q = grab(tp, pt_b, p);
        Var r_ic = rev::softplus0(R.val) - P.rho0(x[p], zp);
        Var f_ic = rev::softplus0(Q.val) - P.f0(x[p], v[p], zp);
        Var p_ic = F.val - P.phi0(x[p], zp);
        q_r[p] = r_ic.v() * r_ic.v();
        q_fk[p] = f_ic.v() * f_ic.v();
        q_f[p] = p_ic.v() * p_ic.v();
        if (wg) {
          tp.seed(r_ic.i, cr * r_ic.v());
          tp.seed(f_ic.i, cfk * f_ic.v());
          tp.seed(p_ic.i, cf * p_ic.v());
          tp.backward();
          scatter(tp, rho_b, p, R);
          scatter(tp, phi_b, p, F);
          scatter(tp, pt_b, p, Q);
        }
      }
      for (int p = 0; p < pc; ++p) {
        s_ic_rho += q_r[p];
        s_ic_f += q_fk[p];
        s_ic_phi += q_f[p];
      }
      if (wg) {
        if (g.rho) backward_batch(rho_b.rec, rho_b.adj.data(), g.rho);
        if (g.phi) backward_batch(phi_b.rec, phi_b.adj.data(), g.phi);
        if (g.gf) backward_batch(pt_b.rec, pt_b.adj.data(), g.gf);
      }
    }
  }

  LossReport rep;
  rep.terms = {
      {"domain/macro", term_value(pen.domain_macro, s_macro, B.n_domain)},
      {"domain/kinetic", term_value(pen.domain_kinetic, s_kin, B.n_domain)},
      {"domain/poisson", term_value(pen.domain_poisson, s_pois, B.n_domain)},
      {"conservation",
       term_value(pen.conservation, s_cons, B.n_conservation)},
      {"bc/rho", term_value(pen.bc_rho, s_bc_rho, B.n_bc)},
      {"bc/f", term_value(pen.bc_gf, s_bc_f, B.n_bc)},
      {"bc/phi", term_value(pen.bc_phi, s_bc_phi, B.n_bc)},
      {"ic/rho", term_value(pen.ic_rho, s_ic_rho, B.n_ic)},
      {"ic/f", term_value(pen.ic_gf, s_ic_f, B.n_ic)},
      {"ic/phi", term_value(pen.ic_phi, s_ic_phi, B.n_ic)},
  };
  finish_report(rep);
  return rep;
}

// ------------------------------- vanilla ----------------------------------

LossReport loss_pinn(const LossSetup& S, const NetSet& nets,
                     const SampleBatch& B, const GradSet& g) {
  const QuadratureRule& rule = S.rule;
  const int nq = rule.size();
  const int nz = B.nz;
  const auto& P = S.problem;
  const PenaltyConfig& pen = S.penalties;
  const bool wg = g.any();

  double s_vla = 0, s_pois = 0;
  double s_bc_f = 0, s_bc_phi = 0;
  double s_ic_f = 0, s_ic_phi = 0;

  // domain
  {
    const double ck = 2.0 * pen.domain_kinetic / B.n_domain;
    const double cp = 2.0 * pen.domain_poisson / B.n_domain;
    for (int seg = 0; seg < B.n_domain; seg += kSegment) {
      const int pc = std::min(kSegment, B.n_domain - seg);
      const double* t = B.dom_t.data() + seg;
      const double* x = B.dom_x.data() + seg;
      const double* v = B.dom_v.data() + seg;
      const double* z = B.dom_z.data() + std::size_t(seg) * nz;

      Bundle phi_b{nets.phi, SlotLayout::make(m_dx | m_dxx), false, {}, {}};
      Bundle col_b{nets.gf, SlotLayout::make(m_val), true, {}, {}};
      Bundle pt_b{nets.gf,
                  SlotLayout::make(m_val | m_dt | m_dx | m_dv | m_dvv),
                  true,
                  {},
                  {}};
      phi_b.run(S.ff, nz, t, x, nullptr, z, pc);
      ColCoords cc;
      expand_column(t, x, z, pc, nz, rule, cc);
      col_b.run(S.ff, nz, cc.t.data(), cc.x.data(), cc.v.data(), cc.z.data(),
                pc * nq);
      pt_b.run(S.ff, nz, t, x, v, z, pc);

      std::vector<double> q_v(pc), q_p(pc);
#pragma omp parallel for num_threads(worker_count()) schedule(static)
      for (int p = 0; p < pc; ++p) {
        Tape tp;
        const double eps = P.eps(x[p]);
        const double h = P.source(x[p], nz ? z + std::size_t(p) * nz : nullptr);

        LeafJet F = grab(tp, phi_b, p);
        LeafJet Q = grab(tp, pt_b, p);
        std::vector<LeafJet> C(nq);
        for (int j = 0; j < nq; ++j) C[j] = grab(tp, col_b, p * nq + j);

        Var mass = rev::softplus0(C[0].val) * rule.weights[0];
        for (int j = 1; j < nq; ++j)
          mass = mass + rev::softplus0(C[j].val) * rule.weights[j];

        Var sp1 = rev::softplus1(Q.val);
        Var fv = rev::softplus0(Q.val);
        Var ft = sp1 * Q.dt;
        Var fx = sp1 * Q.dx;
        Var fdv = sp1 * Q.dv;
        Var fdvv = sp1 * Q.dvv + rev::softplus2(Q.val) * (Q.dv * Q.dv);
        Var wp = F.dx + v[p];
        Var Lf = (fv + wp * fdv) + fdvv;
        Var vla = (ft * eps + (fx * v[p]) * eps) - Lf;

        Var pois =
            P.field_gradient ? F.dx - (mass - h) : (-F.dxx) - (mass - h);

        q_v[p] = vla.v() * vla.v();
        q_p[p] = pois.v() * pois.v();
        if (wg) {
          tp.seed(vla.i, ck * vla.v());
          tp.seed(pois.i, cp * pois.v());
          tp.backward();
          scatter(tp, phi_b, p, F);
          scatter(tp, pt_b, p, Q);
          for (int j = 0; j < nq; ++j) scatter(tp, col_b, p * nq + j, C[j]);
        }
      }
      for (int p = 0; p < pc; ++p) {
        s_vla += q_v[p];
        s_pois += q_p[p];
      }
      if (wg) {
        if (g.phi) backward_batch(phi_b.rec, phi_b.adj.data(), g.phi);
        if (g.gf) {
          backward_batch(col_b.rec, col_b.adj.data(), g.gf);
          backward_batch(pt_b.rec, pt_b.adj.data(), g.gf);
        }
      }
    }
  }

  // boundary pairs
  if (B.n_bc > 0) {
    const double cfk = 2.0 * pen.bc_gf / B.n_bc;
    const double cf = 2.0 * pen.bc_phi / B.n_bc;
    for (int seg = 0; seg < B.n_bc; seg += kSegment) {
      const int pc = std::min(kSegment, B.n_bc - seg);
      const double* t = B.bc_t.data() + seg;
      const double* v = B.bc_v.data() + seg;
      const double* z = B.bc_z.data() + std::size_t(seg) * nz;

      Bundle phi_b{nets.phi, SlotLayout::make(m_val), false, {}, {}};
      Bundle pt_b{nets.gf, SlotLayout::make(m_val), true, {}, {}};
      PairCoords ps;
      expand_pairs(t, nullptr, z, pc, nz, P.x_lo, P.x_hi, ps);
      phi_b.run(S.ff, nz, ps.t.data(), ps.x.data(), nullptr, ps.z.data(),
                pc * 2);
      PairCoords pv;
      expand_pairs(t, v, z, pc, nz, P.x_lo, P.x_hi, pv);
      pt_b.run(S.ff, nz, pv.t.data(), pv.x.data(), pv.v.data(), pv.z.data(),
               pc * 2);

      std::vector<double> q_fk(pc), q_f(pc);
#pragma omp parallel for num_threads(worker_count()) schedule(static)
      for (int p = 0; p < pc; ++p) {
        Tape tp;
        LeafJet Fl = grab(tp, phi_b, 2 * p), Fh = grab(tp, phi_b, 2 * p + 1);
        LeafJet Ql = grab(tp, pt_b, 2 * p), Qh = grab(tp, pt_b, 2 * p + 1);
        Var f_bc = rev::softplus0(Ql.val) - rev::softplus0(Qh.val);
        Var p_bc = Fl.val - Fh.val;
        q_fk[p] = f_bc.v() * f_bc.v();
        q_f[p] = p_bc.v() * p_bc.v();
        if (wg) {
          tp.seed(f_bc.i, cfk * f_bc.v());
          tp.seed(p_bc.i, cf * p_bc.v());
          tp.backward();
          scatter(tp, phi_b, 2 * p, Fl);
          scatter(tp, phi_b, 2 * p + 1, Fh);
          scatter(tp, pt_b, 2 * p, Ql);
          scatter(tp, pt_b, 2 * p + 1, Qh);
        }
      }
      for (int p = 0; p < pc; ++p) {
        s_bc_f += q_fk[p];
        s_bc_phi += q_f[p];
      }
      if (wg) {
        if (g.phi) backward_batch(phi_b.rec, phi_b.adj.data(), g.phi);
        if (g.gf) backward_batch(pt_b.rec, pt_b.adj.data(), g.gf);
      }
    }
  }

  // initial data
  if (B.n_ic > 0) {
    const double cfk = 2.0 * pen.ic_gf / B.n_ic;
    const double cf = 2.0 * pen.ic_phi / B.n_ic;
    for (int seg = 0; seg < B.n_ic; seg += kSegment) {
      const int pc = std::min(kSegment, B.n_ic - seg);
      const double* x = B.ic_x.data() + seg;
      const double* v = B.ic_v.data() + seg;
      const double* z = B.ic_z.data() + std::size_t(seg) * nz;
      std::vector<double> t0(pc, 0.0);

      Bundle phi_b{nets.phi, SlotLayout::make(m_val), false, {}, {}};
      Bundle pt_b{nets.gf, SlotLayout::make(m_val), true, {}, {}};
      phi_b.run(S.ff, nz, t0.data(), x, nullptr, z, pc);
      pt_b.run(S.ff, nz, t0.data(), x, v, z, pc);

      std::vector<double> q_fk(pc), q_f(pc);
#pragma omp parallel for num_threads(worker_count()) schedule(static)
      for (int p = 0; p < pc; ++p) {
        Tape tp;
        const double* zp = nz ? z + std::size_t(p) * nz : nullptr;
        LeafJet F = grab(tp, phi_b, p);
        LeafJet Q = grab(tp, pt_b, p);
        Var f_ic = rev::softplus0(Q.val) - P.f0(x[p], v[p], zp);
        Var p_ic = F.val - P.phi0(x[p], zp);
        q_fk[p] = f_ic.v() * f_ic.v();
        q_f[p] = p_ic.v() * p_ic.v();
        if (wg) {
          tp.seed(f_ic.i, cfk * f_ic.v());
          tp.seed(p_ic.i, cf * p_ic.v());
          tp.backward();
          scatter(tp, phi_b, p, F);
          scatter(tp, pt_b, p, Q);
        }
      }
      for (int p = 0; p < pc; ++p) {
        s_ic_f += q_fk[p];
        s_ic_phi += q_f[p];
      }
      if (wg) {
        if (g.phi) backward_batch(phi_b.rec, phi_b.adj.data(), g.phi);
        if (g.gf) backward_batch(pt_b.rec, pt_b.adj.data(), g.gf);
      }
    }
  }

  LossReport rep;
  rep.terms = {
      {"domain/vlasov", term_value(pen.domain_kinetic, s_vla, B.n_domain)},
      {"domain/poisson", term_value(pen.domain_poisson, s_pois, B.n_domain)},
      {"bc/f", term_value(pen.bc_gf, s_bc_f, B.n_bc)},
      {"bc/phi", term_value(pen.bc_phi, s_bc_phi, B.n_bc)},
      {"ic/f", term_value(pen.ic_gf, s_ic_f, B.n_ic)},
      {"ic/phi", term_value(pen.ic_phi, s_ic_phi, B.n_ic)},
  };
  finish_report(rep);
  return rep;
}

LossReport loss_impl(const LossSetup& S, const NetSet& nets,
                     const SampleBatch& B, const GradSet& g) {
  check_sizes(S, nets, B);
  if (g.rho && nets.rho)
    std::memset(g.rho, 0, nets.rho->n_params() * sizeof(double));
  if (g.gf) std::memset(g.gf, 0, nets.gf->n_params() * sizeof(double));
  if (g.phi) std::memset(g.phi, 0, nets.phi->n_params() * sizeof(double));
  switch (S.method) {
    case Method::micro_macro:
      return loss_mm(S, nets, B, g);
    case Method::mass_conservation:
      return loss_mc(S, nets, B, g);
    default:
      return loss_pinn(S, nets, B, g);
  }
}

}  // namespace

LossReport empirical_loss(const LossSetup& setup, const NetSet& nets,
                          const SampleBatch& batch) {
  return loss_impl(setup, nets, batch, GradSet{});
}

LossReport empirical_loss_grad(const LossSetup& setup, const NetSet& nets,
                               const SampleBatch& batch, double* grad_rho,
                               double* grad_gf, double* grad_phi) {
  return loss_impl(setup, nets, batch, GradSet{grad_rho, grad_gf, grad_phi});
}

// --------------------------- limit-system loss ----------------------------

LossReport limit_loss(const LossSetup& S, const NetSet& nets,
                      const SampleBatch& B) {
  check_sizes(S, nets, B);
  const QuadratureRule& rule = S.rule;
  const auto& P = S.problem;
  const PenaltyConfig& pen = S.penalties;
  const int nz = B.nz;

  auto zp = [&](const std::vector<double>& zs, int i) -> const double* {
    return nz ? zs.data() + std::size_t(i) * nz : nullptr;
  };

  const unsigned mask_val = m_val;

  LossReport rep;
  if (S.method == Method::micro_macro) {
    MmNets mm{nets.rho, nets.gf, nets.phi};
    double s1 = 0, s2 = 0, s3 = 0;
    for (int i = 0; i < B.n_domain; ++i) {
      Point pt{B.dom_t[i], B.dom_x[i], B.dom_v[i], zp(B.dom_z, i), nz};
      const double h = P.source(pt.x, pt.z);
      MmResidual r = limit_residual_mm(mm, S.ff, rule, pt, h);
      if (P.field_gradient) {
        const Jet phi =
            eval_scalar_jet(*nets.phi, S.ff, nz, pt.t, pt.x, pt.z, m_dx);
        const Jet rho =
            eval_scalar_jet(*nets.rho, S.ff, nz, pt.t, pt.x, pt.z, m_val);
        r.poisson_res = phi.dx - (rho.val - h);
      }
      s1 += r.macro_res * r.macro_res;
      s2 += r.micro_res * r.micro_res;
      s3 += r.poisson_res * r.poisson_res;
    }
    double b1 = 0, b2 = 0, b3 = 0;
    for (int i = 0; i < B.n_bc; ++i) {
      const double t = B.bc_t[i];
      const double* z = zp(B.bc_z, i);
      const Jet rl = eval_scalar_jet(*nets.rho, S.ff, nz, t, P.x_lo, z, mask_val);
      const Jet rh = eval_scalar_jet(*nets.rho, S.ff, nz, t, P.x_hi, z, mask_val);
      const Jet gl = eval_velocity_jet(*nets.gf, S.ff, rule, nz, t, P.x_lo,
                                       B.bc_v[i], z, mask_val);
      const Jet gh = eval_velocity_jet(*nets.gf, S.ff, rule, nz, t, P.x_hi,
                                       B.bc_v[i], z, mask_val);
      const Jet fl = eval_scalar_jet(*nets.phi, S.ff, nz, t, P.x_lo, z, mask_val);
      const Jet fh = eval_scalar_jet(*nets.phi, S.ff, nz, t, P.x_hi, z, mask_val);
      b1 += (rl.val - rh.val) * (rl.val - rh.val);
      b2 += (gl.val - gh.val) * (gl.val - gh.val);
      b3 += (fl.val - fh.val) * (fl.val - fh.val);
    }
    double i1 = 0, i2 = 0, i3 = 0;
    for (int i = 0; i < B.n_ic; ++i) {
      const double x = B.ic_x[i];
      const double* z = zp(B.ic_z, i);
      const Jet r0 = eval_scalar_jet(*nets.rho, S.ff, nz, 0.0, x, z, mask_val);
      const Jet g0 = eval_velocity_jet(*nets.gf, S.ff, rule, nz, 0.0, x,
                                       B.ic_v[i], z, mask_val);
      const Jet p0 = eval_scalar_jet(*nets.phi, S.ff, nz, 0.0, x, z, mask_val);
      const double dr = r0.val - P.rho0(x, z);
      const double dg = g0.val - P.g0(x, B.ic_v[i], z);
      const double dp = p0.val - P.phi0(x, z);
      i1 += dr * dr;
      i2 += dg * dg;
      i3 += dp * dp;
    }
    rep.terms = {
        {"domain/macro", term_value(pen.domain_macro, s1, B.n_domain)},
        {"domain/micro", term_value(pen.domain_kinetic, s2, B.n_domain)},
        {"domain/poisson", term_value(pen.domain_poisson, s3, B.n_domain)},
        {"bc/rho", term_value(pen.bc_rho, b1, B.n_bc)},
        {"bc/g", term_value(pen.bc_gf, b2, B.n_bc)},
        {"bc/phi", term_value(pen.bc_phi, b3, B.n_bc)},
        {"ic/rho", term_value(pen.ic_rho, i1, B.n_ic)},
        {"ic/g", term_value(pen.ic_gf, i2, B.n_ic)},
        {"ic/phi", term_value(pen.ic_phi, i3, B.n_ic)},
    };
  } else if (S.method == Method::mass_conservation) {
    McNets mc{nets.rho, nets.gf, nets.phi};
    double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
    for (int i = 0; i < B.n_domain; ++i) {
      Point pt{B.dom_t[i], B.dom_x[i], B.dom_v[i], zp(B.dom_z, i), nz};
      const double h = P.source(pt.x, pt.z);
      McResidual r = limit_residual_mc(mc, S.ff, rule, pt, h);
      if (P.field_gradient) {
        const Jet phi =
            eval_scalar_jet(*nets.phi, S.ff, nz, pt.t, pt.x, pt.z, m_dx);
        const Jet rho =
            eval_scalar_jet(*nets.rho, S.ff, nz, pt.t, pt.x, pt.z, m_val);
        r.poisson_res = phi.dx - (rho.val - h);
      }
      s1 += r.macro_res * r.macro_res;
      s2 += r.kinetic_res * r.kinetic_res;
      s3 += r.poisson_res * r.poisson_res;
    }
    std::vector<Jet> col(rule.size());
    for (int i = 0; i < B.n_conservation; ++i) {
      const double t = B.cons_t[i], x = B.cons_x[i];
      const double* z = zp(B.cons_z, i);
      eval_column_jets(*nets.gf, S.ff, rule, nz, t, x, z, mask_val, col.data());
      double mass = 0;
      for (int j = 0; j < rule.size(); ++j)
        mass += rule.weights[j] * col[j].val;
      const Jet r = eval_scalar_jet(*nets.rho, S.ff, nz, t, x, z, mask_val);
      const double d = mass - r.val;
      s4 += d * d;
    }
    double b1 = 0, b2 = 0, b3 = 0;
    for (int i = 0; i < B.n_bc; ++i) {
      const double t = B.bc_t[i];
      const double* z = zp(B.bc_z, i);
      const Jet rl = eval_scalar_jet(*nets.rho, S.ff, nz, t, P.x_lo, z, mask_val);
      const Jet rh = eval_scalar_jet(*nets.rho, S.ff, nz, t, P.x_hi, z, mask_val);
      const Jet fl = eval_velocity_jet(*nets.gf, S.ff, rule, nz, t, P.x_lo,
                                       B.bc_v[i], z, mask_val);
      const Jet fh = eval_velocity_jet(*nets.gf, S.ff, rule, nz, t, P.x_hi,
                                       B.bc_v[i], z, mask_val);
      const Jet pl = eval_scalar_jet(*nets.phi, S.ff, nz, t, P.x_lo, z, mask_val);
      const Jet ph = eval_scalar_jet(*nets.phi, S.ff, nz, t, P.x_hi, z, mask_val);
      b1 += (rl.val - rh.val) * (rl.val - rh.val);
      b2 += (fl.val - fh.val) * (fl.val - fh.val);
      b3 += (pl.val - ph.val) * (pl.val - ph.val);
    }
    double i1 = 0, i2 = 0, i3 = 0;
    for (int i = 0; i < B.n_ic; ++i) {
      const double x = B.ic_x[i];
      const double* z = zp(B.ic_z, i);
      const Jet r0 = eval_scalar_jet(*nets.rho, S.ff, nz, 0.0, x, z, mask_val);
      const Jet f0 = eval_velocity_jet(*nets.gf, S.ff, rule, nz, 0.0, x,
                                       B.ic_v[i], z, mask_val);
      const Jet p0 = eval_scalar_jet(*nets.phi, S.ff, nz, 0.0, x, z, mask_val);
      const double dr = r0.val - P.rho0(x, z);
      const double df = f0.val - P.f0(x, B.ic_v[i], z);
      const double dp = p0.val - P.phi0(x, z);
      i1 += dr * dr;
      i2 += df * df;
      i3 += dp * dp;
    }
    rep.terms = {
        {"domain/macro", term_value(pen.domain_macro, s1, B.n_domain)},
        {"domain/kinetic", term_value(pen.domain_kinetic, s2, B.n_domain)},
        {"domain/poisson", term_value(pen.domain_poisson, s3, B.n_domain)},
        {"conservation",
         term_value(pen.conservation, s4, B.n_conservation)},
        {"bc/rho", term_value(pen.bc_rho, b1, B.n_bc)},
        {"bc/f", term_value(pen.bc_gf, b2, B.n_bc)},
        {"bc/phi", term_value(pen.bc_phi, b3, B.n_bc)},
        {"ic/rho", term_value(pen.ic_rho, i1, B.n_ic)},
        {"ic/f", term_value(pen.ic_gf, i2, B.n_ic)},
        {"ic/phi", term_value(pen.ic_phi, i3, B.n_ic)},
    };
  } else {
    PinnNets pn{nets.gf, nets.phi};
    double s1 = 0, s2 = 0;
    for (int i = 0; i < B.n_domain; ++i) {
      Point pt{B.dom_t[i], B.dom_x[i], B.dom_v[i], zp(B.dom_z, i), nz};
      const double h = P.source(pt.x, pt.z);
      PinnResidual r = limit_residual_pinn(pn, S.ff, rule, pt, h);
      if (P.field_gradient) {
        const Jet phi =
            eval_scalar_jet(*nets.phi, S.ff, nz, pt.t, pt.x, pt.z, m_dx);
        std::vector<Jet> col(rule.size());
        eval_column_jets(*nets.gf, S.ff, rule, nz, pt.t, pt.x, pt.z, mask_val,
                         col.data());
        double mass = 0;
        for (int j = 0; j < rule.size(); ++j)
          mass += rule.weights[j] * col[j].val;
        r.poisson_res = phi.dx - (mass - h);
      }
      s1 += r.vlasov_res * r.vlasov_res;
      s2 += r.poisson_res * r.poisson_res;
    }
    double b1 = 0, b2 = 0;
    for (int i = 0; i < B.n_bc; ++i) {
      const double t = B.bc_t[i];
      const double* z = zp(B.bc_z, i);
      const Jet fl = eval_velocity_jet(*nets.gf, S.ff, rule, nz, t, P.x_lo,
                                       B.bc_v[i], z, mask_val);
      const Jet fh = eval_velocity_jet(*nets.gf, S.ff, rule, nz, t, P.x_hi,
                                       B.bc_v[i], z, mask_val);
      const Jet pl = eval_scalar_jet(*nets.phi, S.ff, nz, t, P.x_lo, z, mask_val);
      const Jet ph = eval_scalar_jet(*nets.phi, S.ff, nz, t, P.x_hi, z, mask_val);
      b1 += (fl.val - fh.val) * (fl.val - fh.val);
      b2 += (pl.val - ph.val) * (pl.val - ph.val);
    }
    double i1 = 0, i2 = 0;
    for (int i = 0; i < B.n_ic; ++i) {
      const double x = B.ic_x[i];
      const double* z = zp(B.ic_z, i);
      const Jet f0 = eval_velocity_jet(*nets.gf, S.ff, rule, nz, 0.0, x,
                                       B.ic_v[i], z, mask_val);
      const Jet p0 = eval_scalar_jet(*nets.phi, S.ff, nz, 0.0, x, z, mask_val);
      const double df = f0.val - P.f0(x, B.ic_v[i], z);
      const double dp = p0.val - P.phi0(x, z);
      i1 += df * df;
      i2 += dp * dp;
    }
    rep.terms = {
        {"domain/vlasov", term_value(pen.domain_kinetic, s1, B.n_domain)},
        {"domain/poisson", term_value(pen.domain_poisson, s2, B.n_domain)},
        {"bc/f", term_value(pen.bc_gf, b1, B.n_bc)},
        {"bc/phi", term_value(pen.bc_phi, b2, B.n_bc)},
        {"ic/f", term_value(pen.ic_gf, i1, B.n_ic)},
        {"ic/phi", term_value(pen.ic_phi, i2, B.n_ic)},
    };
  }
  rep.total = 0.0;
  for (const auto& kv : rep.terms) rep.total += kv.second;
  return rep;
}

}
