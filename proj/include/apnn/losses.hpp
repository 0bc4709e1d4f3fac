#pragma once

#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "apnn/mlp.hpp"
#include "apnn/physics.hpp"
#include "apnn/quadrature.hpp"

namespace apnn {

enum class Method { micro_macro, mass_conservation, vanilla };

const char* method_name(Method m);
Method parse_method(const std::string& name);  // config_error on unknown name

// Weights of the loss terms. domain_kinetic multiplies the micro residual in
// the micro-macro form, the scaled kinetic residual otherwise. The bc weights
// default to zero because the Fourier feature map makes every network exactly
// periodic; they stay implemented for non-periodic use.
struct PenaltyConfig {
  double domain_macro = 1.0;
  double domain_kinetic = 1.0;
  double domain_poisson = 1.0;
  double bc_rho = 0.0;
  double bc_gf = 0.0;
  double bc_phi = 0.0;
  double ic_rho = 1.0;
  double ic_gf = 1.0;
  double ic_phi = 1.0;
  double conservation = 1.0;
  void validate() const;  // weights must be >= 0
};

struct BatchConfig {
  int n_domain = 512;
  int n_ic = 256;
  int n_bc = 0;
  int n_conservation = 0;
  void validate() const;  // n_domain >= 1, the rest >= 0
};

// Geometry, scaling, and closures of one problem, as the losses consume them.
// Closures must be pure; they are called from parallel loops. The z pointer
// is null when nz = 0.
struct LossProblem {
  double t_final = 1.0;
  double x_lo = 0.0, x_hi = 1.0;
  double v_lo = -6.0, v_hi = 6.0;
  int nz = 0;
  ScaleField eps;
  // Attractive-force variant: the field residual is dx(phi) - (rho - h)
  // instead of -dxx(phi) - (rho - h).
  bool field_gradient = false;
  std::function<double(double x, const double* z)> source;  // h
  std::function<double(double x, const double* z)> rho0;
  std::function<double(double x, const double* z)> phi0;
  std::function<double(double x, double v, const double* z)> f0;
  std::function<double(double x, double v, const double* z)> g0;
};

// One draw of training points. Domain, bc, and ic points carry a sampled
// velocity for the pointwise kinetic residuals; velocity moments use the
// quadrature rule instead. z blocks are row-major [count x nz].
struct SampleBatch {
  int n_domain = 0, n_ic = 0, n_bc = 0, n_conservation = 0;
  int nz = 0;
  std::vector<double> dom_t, dom_x, dom_v, dom_z;
  std::vector<double> ic_x, ic_v, ic_z;
  std::vector<double> bc_t, bc_v, bc_z;
  std::vector<double> cons_t, cons_x, cons_z;
};

// Uniform i.i.d. points over each region; ic points sit at t = 0 exactly.
SampleBatch sample_batch(const BatchConfig& cfg, const LossProblem& prob,
                         std::mt19937_64& eng);

// Weighted term values in a fixed order; total is their exact sum.
struct LossReport {
  double total = 0.0;
  std::vector<std::pair<std::string, double>> terms;
  double term(const std::string& name) const;  // throws on unknown name
};

// rho is unused (may be null) for the vanilla method; gf is g for the
// micro-macro method and f otherwise.
struct NetSet {
  const Mlp* rho = nullptr;
  const Mlp* gf = nullptr;
  const Mlp* phi = nullptr;
};

// Everything fixed across iterations of one training run.
struct LossSetup {
  Method method = Method::micro_macro;
  FourierFeatures ff;
  QuadratureRule rule;  // velocity rule on [v_lo, v_hi]
  LossProblem problem;
  PenaltyConfig penalties;
};

// Loss of the batch. Throws numeric_error naming the term when a term value
// is not finite.
LossReport empirical_loss(const LossSetup& setup, const NetSet& nets,
                          const SampleBatch& batch);

// Loss plus d(loss)/d(params) written into the provided buffers (sized
// n_params of the matching net, overwritten). A null buffer skips that
// network's gradient. Results are bit-stable across worker counts.
LossReport empirical_loss_grad(const LossSetup& setup, const NetSet& nets,
                               const SampleBatch& batch, double* grad_rho,
                               double* grad_gf, double* grad_phi);

// Loss assembled from the scale-free limit residuals through the per-point
// evaluation path. Kept independent of the batched pipeline so the eps -> 0
// behavior of empirical_loss can be checked against a second implementation.
LossReport limit_loss(const LossSetup& setup, const NetSet& nets,
                      const SampleBatch& batch);

}
