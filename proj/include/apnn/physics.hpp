#pragma once

#include <functional>
#include <vector>

#include "apnn/jet.hpp"
#include "apnn/mlp.hpp"
#include "apnn/quadrature.hpp"

namespace apnn {

inline constexpr double inv_sqrt_2pi = 0.3989422804014326779399461;

// Shifted Maxwellian exp(-(v+dxphi)^2/2)/sqrt(2pi).
double maxwellian(double v, double dxphi);

// Maxwellian with the derivative chain through phi: with w = v + dxphi,
// dt M = -w M dtx(phi), dx M = -w M dxx(phi), dv M = -w M.
Jet maxwellian_jet(double v, const Jet& phi);

// L f = f + (v + dxphi) dv f + dvv f, the divergence-form collision operator
// acting on a jet.
double fokker_planck_L(const Jet& f, double v, double dxphi);

// Pi phi = <phi> M: projection onto the span of the shifted Maxwellian.
void project_pi(const QuadratureRule& rule, const double* samples, double dxphi,
                double* out);

double electric_field(const Jet& phi);

// Hard periodic embedding: x enters the network only through sin/cos of
// multiples of k, so every output is exactly L-periodic with k = 2pi/L.
struct FourierFeatures {
  double k = 1.0;
  int n = 1;
  int count() const { return 2 * n; }
  void seed(double x, Jet* out) const;  // out[2n]
};

// epsilon(x): constant in most problems, a profile for the mixed-regime one.
struct ScaleField {
  double eps0 = 1.0;
  bool variable = false;
  std::function<double(double)> fn;
  double operator()(double x) const { return variable ? fn(x) : eps0; }
};

// Network input block: t, Fourier features of x, optionally v, then z.
int input_width(const FourierFeatures& ff, bool has_v, int nz);
void build_input_jets(const FourierFeatures& ff, bool has_v, int nz, double t,
                      double x, double v, const double* z, Jet* out);

// Row-major input seeding for the batched kernels: rows[(i*S+s)*w0 + j].
void seed_rows(const FourierFeatures& ff, bool has_v, int nz,
               const SlotLayout& lay, const double* t, const double* x,
               const double* v, const double* z, int n, double* rows);

Jet softplus_jet(const Jet& raw);

// Single-point network evaluations through the plain per-sample kernel.
// These are the reference path: simple, head-aware, and independent of the
// batched training machinery.
Jet eval_scalar_jet(const Mlp& net, const FourierFeatures& ff, int nz, double t,
                    double x, const double* z, unsigned mask);
void eval_column_jets(const Mlp& net, const FourierFeatures& ff,
                      const QuadratureRule& rule, int nz, double t, double x,
                      const double* z, unsigned mask, Jet* out);
Jet eval_velocity_jet(const Mlp& net, const FourierFeatures& ff,
                      const QuadratureRule& rule, int nz, double t, double x,
                      double v, const double* z, unsigned mask);

struct MmNets {
  const Mlp* rho;
  const Mlp* g;
  const Mlp* phi;
};
struct McNets {
  const Mlp* rho;
  const Mlp* f;
  const Mlp* phi;
};
struct PinnNets {
  const Mlp* f;
  const Mlp* phi;
};

struct Point {
  double t = 0, x = 0, v = 0;
  const double* z = nullptr;
  int nz = 0;
};

struct MmResidual {
  double macro_res, micro_res, poisson_res;
};
struct McResidual {
  double macro_res, kinetic_res, poisson_res, conservation_res;
};
struct PinnResidual {
  double vlasov_res, poisson_res;
};

// Pointwise residuals of the three formulations. eps and h are the resolved
// values at the point's x. Velocity moments use the supplied rule, and the
// x-derivative of a moment is the moment of the integrand's x-derivative.
MmResidual residual_micro_macro(const MmNets& nets, const FourierFeatures& ff,
                                const QuadratureRule& rule, const Point& p,
                                double eps, double h);
McResidual residual_mass_conservation(const McNets& nets,
                                      const FourierFeatures& ff,
                                      const QuadratureRule& rule,
                                      const Point& p, double eps, double h);
PinnResidual residual_vanilla(const PinnNets& nets, const FourierFeatures& ff,
                              const QuadratureRule& rule, const Point& p,
                              double eps, double h);

// Residuals of the formal scale-free limit systems, coded on their own so the
// eps = 0 behavior of the functions above can be checked against them.
MmResidual limit_residual_mm(const MmNets& nets, const FourierFeatures& ff,
                             const QuadratureRule& rule, const Point& p,
                             double h);
McResidual limit_residual_mc(const McNets& nets, const FourierFeatures& ff,
                             const QuadratureRule& rule, const Point& p,
                             double h);
PinnResidual limit_residual_pinn(const PinnNets& nets,
                                 const FourierFeatures& ff,
                                 const QuadratureRule& rule, const Point& p,
                                 double h);

}
