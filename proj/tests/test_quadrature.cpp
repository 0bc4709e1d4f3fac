#include "doctest.h"

#include <cmath>
#include <vector>

#include "apnn/quadrature.hpp"

using namespace apnn;

TEST_CASE("two point rule has the closed-form nodes") {
  auto r = gauss_legendre(2);
  CHECK(r.nodes[0] == doctest::Approx(-1.0 / std::sqrt(3.0)).epsilon(1e-15));
  CHECK(r.nodes[1] == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-15));
  CHECK(r.weights[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.weights[1] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("single point rule is the midpoint rule") {
  auto r = gauss_legendre(1);
  CHECK(r.nodes[0] == 0.0);
  CHECK(r.weights[0] == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("nodes are symmetric, ascending, weights positive") {
  for (int n : {3, 8, 32, 33}) {
    auto r = gauss_legendre(n);
    for (int i = 0; i < n; ++i) {
      CHECK(r.weights[i] > 0.0);
      CHECK(std::abs(r.nodes[i] + r.nodes[n - 1 - i]) < 1e-15);
      CHECK(std::abs(r.weights[i] - r.weights[n - 1 - i]) < 1e-15);
      if (i) CHECK(r.nodes[i] > r.nodes[i - 1]);
    }
  }
}

TEST_CASE("weights sum to the interval length") {
  auto r = velocity_rule(32, -6.0, 6.0);
  double s = 0.0;
  for (double w : r.weights) s += w;
  CHECK(s == doctest::Approx(12.0).epsilon(1e-14));
  CHECK(r.length() == doctest::Approx(12.0));
}

// n=32 integrates v^k exactly for k <= 63. Odd powers vanish; compare against
// the scale of the absolute-moment integral so the relative test is meaningful.
TEST_CASE("monomial exactness up to degree 2n-1 on [-6,6]") {
  auto r = velocity_rule(32, -6.0, 6.0);
  std::vector<double> samples(32);
  for (int k = 0; k <= 63; ++k) {
    for (int i = 0; i < 32; ++i) samples[i] = std::pow(r.nodes[i], k);
    double got = moment(r, samples.data());
    double exact = (k % 2 == 1) ? 0.0 : 2.0 * std::pow(6.0, k + 1) / (k + 1);
    double scale = 2.0 * std::pow(6.0, k + 1) / (k + 1);
    CHECK(std::abs(got - exact) <= 1e-12 * scale);
  }
}

TEST_CASE("gaussian mass on [-6,6] is 1 to truncation error") {
  auto r = velocity_rule(32, -6.0, 6.0);
  std::vector<double> samples(32);
  for (int i = 0; i < 32; ++i)
    samples[i] = std::exp(-0.5 * r.nodes[i] * r.nodes[i]) / std::sqrt(2.0 * M_PI);
  CHECK(moment(r, samples.data()) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("flux moment of a shifted gaussian is minus the shift") {
  auto r = velocity_rule(32, -6.0, 6.0);
  std::vector<double> samples(32);
  const double c = 0.3;
  for (int i = 0; i < 32; ++i) {
    double w = r.nodes[i] + c;
    samples[i] = std::exp(-0.5 * w * w) / std::sqrt(2.0 * M_PI);
  }
  CHECK(flux_moment(r, samples.data()) == doctest::Approx(-c).epsilon(1e-6));
}

TEST_CASE("affine map reproduces integrals on shifted intervals") {
  auto r = velocity_rule(16, 2.0, 5.0);
  std::vector<double> samples(16);
  for (int i = 0; i < 16; ++i) samples[i] = r.nodes[i] * r.nodes[i];
  CHECK(moment(r, samples.data()) ==
        doctest::Approx((125.0 - 8.0) / 3.0).epsilon(1e-14));
}
