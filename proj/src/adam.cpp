#include "apnn/adam.hpp"

#include <cmath>

#include "apnn/errors.hpp"

namespace apnn {

void AdamConfig::validate() const {
  if (!(lr > 0.0)) throw config_error("learning rate must be > 0");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
    throw config_error("adam betas must lie in (0, 1)");
  if (!(eps_hat > 0.0)) throw config_error("adam eps_hat must be > 0");
}

Adam::Adam(std::size_t n, const AdamConfig& cfg)
    : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {
  cfg.validate();
}

void Adam::step(double* params, const double* grad, double lr) {
  const std::size_t n = m_.size();
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(grad[i]))
      throw numeric_error("non-finite gradient entry in adam step");

  ++step_;
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  const double c1 = 1.0 - std::pow(b1, double(step_));
  const double c2 = 1.0 - std::pow(b2, double(step_));
  for (std::size_t i = 0; i < n; ++i) {
    m_[i] = b1 * m_[i] + (1.0 - b1) * grad[i];
    v_[i] = b2 * v_[i] + (1.0 - b2) * grad[i] * grad[i];
    const double mhat = m_[i] / c1;
    const double vhat = v_[i] / c2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps_hat);
  }
}

}
