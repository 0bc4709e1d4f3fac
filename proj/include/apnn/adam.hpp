#pragma once

#include <cstddef>
#include <vector>

namespace apnn {

struct AdamConfig {
  double lr = 1e-3;  // base rate; any schedule lives in the caller
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_hat = 1e-8;
  void validate() const;  // 0 < beta < 1, lr > 0, eps_hat > 0
};

// Bias-corrected Adam over one flat parameter vector.
class Adam {
 public:
  Adam(std::size_t n, const AdamConfig& cfg);

  // One update at the given rate. Throws numeric_error when the gradient
  // holds a non-finite entry; parameters are untouched in that case.
  void step(double* params, const double* grad, double lr);

  long steps() const { return step_; }
  std::size_t size() const { return m_.size(); }

 private:
  AdamConfig cfg_;
  std::vector<double> m_, v_;
  long step_ = 0;
};

}
