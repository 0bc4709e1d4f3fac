#include "apnn/quadrature.hpp"

#include <cassert>
#include <cmath>

namespace apnn {

// Legendre P_n(x) and P_n'(x) by the three-term recurrence.
static void legendre(int n, double x, double& p, double& dp) {
  double p0 = 1.0, p1 = x;
  for (int k = 2; k <= n; ++k) {
    double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = pk;
  }
  p = (n == 0) ? p0 : p1;
  // derivative identity: (1-x^2) P_n' = n (P_{n-1} - x P_n)
  dp = n * (p0 - x * p1) / (1.0 - x * x);
}

QuadratureRule gauss_legendre(int n) {
  assert(n >= 1);
  QuadratureRule rule;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    // Chebyshev-angle estimate of the i-th root (descending order).
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double p, dp;
    for (int it = 0; it < 100; ++it) {
      legendre(n, x, p, dp);
      double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    legendre(n, x, p, dp);
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    // fill symmetric pair; odd n writes the center point twice, harmlessly
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

QuadratureRule map_to_interval(const QuadratureRule& ref, double lo, double hi) {
  QuadratureRule rule;
  const double c = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  rule.nodes.resize(ref.nodes.size());
  rule.weights.resize(ref.weights.size());
  for (size_t i = 0; i < ref.nodes.size(); ++i) {
    rule.nodes[i] = c + half * ref.nodes[i];
    rule.weights[i] = half * ref.weights[i];
  }
  rule.lo = lo;
  rule.hi = hi;
  return rule;
}

QuadratureRule velocity_rule(int n, double v_lo, double v_hi) {
  return map_to_interval(gauss_legendre(n), v_lo, v_hi);
}

double moment(const QuadratureRule& rule, const double* samples) {
  double acc = 0.0;
  for (int i = 0; i < rule.size(); ++i) acc += rule.weights[i] * samples[i];
  return acc;
}

double flux_moment(const QuadratureRule& rule, const double* samples) {
  double acc = 0.0;
  for (int i = 0; i < rule.size(); ++i)
    acc += rule.weights[i] * rule.nodes[i] * samples[i];
  return acc;
}

}
