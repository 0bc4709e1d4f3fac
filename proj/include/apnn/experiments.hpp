#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "apnn/losses.hpp"

namespace apnn {

enum class ProblemId {
  landau,
  bump_on_tail,
  riemann,
  mixing,
  gravitational,
  uq
};

const char* problem_name(ProblemId id);
ProblemId parse_problem(const std::string& name);  // config_error on unknown

// One benchmark case at one scale value, ready for the losses and solvers.
struct ProblemSetup {
  ProblemId id = ProblemId::landau;
  double eps0 = 1.0;
  double alpha = 0.0, k = 0.0;
  bool equilibrium_ic = false;  // f0 = rho0 M0 exactly, so g0 is zero
  LossProblem loss;
  FourierFeatures ff;               // one sin/cos pair at the domain period
  std::vector<double> eval_times;   // reporting times of the case
};

// eps0 must be > 0 for the cases with non-equilibrium initial data when the
// micro-macro split is wanted; otherwise g0 stays unset.
ProblemSetup make_problem(ProblemId id, double eps0);

// Defaults from the run settings used for each case and method. The width
// functions return hidden layers only; input and output widths follow from
// the problem and the feature map.
double default_eps(ProblemId id);
PenaltyConfig default_penalties(ProblemId id, Method m, double eps0);
BatchConfig default_batches(ProblemId id, Method m);
std::vector<int> default_scalar_widths(ProblemId id);
std::vector<int> default_kinetic_widths(ProblemId id);

// sqrt(sum |pred-ref|^2 / sum |ref|^2)
double rel_l2(const std::vector<double>& pred, const std::vector<double>& ref);
// sqrt(mean |pred-ref|^2)
double rmse(const std::vector<double>& pred, const std::vector<double>& ref);

// Trained-network field slices on an x-mesh at one time. For the micro-macro
// method the distribution is reconstructed as rho M + eps g; the other
// methods take quadrature moments of f. When the problem carries random
// inputs, fields are averaged over n_z_draws uniform draws.
struct FieldSlice {
  std::vector<double> rho, phi, E, flux;
};

struct EvalNets {
  Method method = Method::micro_macro;
  const Mlp* rho = nullptr;  // null for vanilla
  const Mlp* gf = nullptr;
  const Mlp* phi = nullptr;
};

FieldSlice evaluate_fields(const ProblemSetup& prob, const EvalNets& nets,
                           const QuadratureRule& rule, double t,
                           const std::vector<double>& xs, int n_z_draws,
                           std::uint64_t z_seed);

struct MetricRow {
  std::string problem, method, metric, quantity;
  double epsilon = 0.0, time = 0.0, value = 0.0;
};

void write_metrics_csv(const std::string& path,
                       const std::vector<MetricRow>& rows);

}
