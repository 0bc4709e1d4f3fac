#pragma once

#include <vector>

namespace apnn {

// Gauss-Legendre rule. Nodes ascend; on [lo,hi] the weights sum to hi-lo and
// the rule integrates polynomials of degree <= 2n-1 exactly.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  int size() const { return int(nodes.size()); }
  double lo = -1.0;
  double hi = 1.0;
  double length() const { return hi - lo; }
};

// Rule on the reference interval [-1,1]. Nodes are the Legendre roots found by
// Newton iteration seeded with the Chebyshev-angle estimates.
QuadratureRule gauss_legendre(int n);

// Affine image of a reference rule on [lo,hi]; weights scale by (hi-lo)/2.
QuadratureRule map_to_interval(const QuadratureRule& ref, double lo, double hi);

QuadratureRule velocity_rule(int n, double v_lo, double v_hi);

// <s> = sum_i w_i s_i
double moment(const QuadratureRule& rule, const double* samples);
// <v s> = sum_i w_i v_i s_i
double flux_moment(const QuadratureRule& rule, const double* samples);

}
