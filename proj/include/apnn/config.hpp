#pragma once

#include <string>
#include <vector>

#include "apnn/experiments.hpp"
#include "apnn/training.hpp"

namespace apnn {

// Fully resolved run settings: problem and method defaults filled in first,
// file overrides applied on top.
struct RunConfig {
  ProblemId problem = ProblemId::landau;
  double eps0 = 1.0;
  double t_final = 0.0;  // 0 keeps the problem's own horizon
  Method method = Method::micro_macro;
  std::vector<int> scalar_hidden, kinetic_hidden;
  int fourier_terms = 1;
  BatchConfig batches;
  PenaltyConfig penalties;
  TrainingConfig training;
  int quad_points = 32;
  int ref_nx = 256, ref_nv = 128;
  double cfl = 0.9;
  std::string ref_kind = "kinetic";  // kinetic | limit | both
  std::vector<double> times;         // snapshot and evaluation times
  int z_draws = 10000;

  void validate() const;
  ProblemSetup setup() const;  // make_problem plus the overrides above
};

RunConfig default_config(ProblemId id, Method m, double eps0);

// INI-style file: [section] headers, key = value lines, # or ; comments.
// Sections: problem, method, nets, batches, penalties, training, quadrature,
// reference. Unknown sections or keys raise config_error with the line
// number; a missing file raises io_error.
RunConfig load_config(const std::string& path);

// Resolved values as a JSON object string, for run manifests.
std::string config_json(const RunConfig& cfg);

}
