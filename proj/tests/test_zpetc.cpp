#include <doctest.h>

#include <cmath>

#include "pgnn/error.hpp"
#include "pgnn/zpetc.hpp"
#include "support.hpp"

using namespace pgnn;
using Eigen::Index;
using Eigen::VectorXd;
using cd = std::complex<double>;

namespace {

VectorXd coeffs(std::initializer_list<double> v) {
  VectorXd out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

}  // namespace

TEST_CASE("polynomial roots and reconstruction") {
  const auto roots = polynomial_roots(coeffs({1.0, -3.0, 2.0}));
  REQUIRE(roots.size() == 2);
  std::vector<double> re{roots[0].real(), roots[1].real()};
  std::sort(re.begin(), re.end());
  CHECK(re[0] == doctest::Approx(1.0));
  CHECK(re[1] == doctest::Approx(2.0));
  const VectorXd back = polynomial_from_roots({cd(0.5, 0.5), cd(0.5, -0.5), cd(-0.2, 0.0)});
  CHECK(back.size() == 4);
  CHECK(back(0) == 1.0);
  CHECK(back(1) == doctest::Approx(-0.8));
  CHECK_THROWS_AS(polynomial_from_roots({cd(0.5, 0.5)}), InvalidArgument);
  CHECK_THROWS_AS(polynomial_roots(coeffs({0.0, 1.0})), InvalidArgument);
}

TEST_CASE("inverse model coefficients map to a forward model") {
  // u(k) = 2 r(k+1) - 1.8 r(k) + 0.4 u(k-1)  <=>  y(k+1) (2 - 1.8 q^-1) = (1 - 0.4 q^-1) u(k)
  const LinearForwardModel g = forward_from_inverse(coeffs({2.0, -1.8, 0.4}), {1, 2, 0});
  CHECK(g.a == coeffs({2.0, -1.8}));
  CHECK(g.b == coeffs({1.0, -0.4}));
  CHECK(g.delay == 1);
  CHECK(std::abs(g.response(0.0) - cd(0.6 / 0.2, 0.0)) < 1e-12);
}

TEST_CASE("minimum-phase models are inverted exactly") {
  LinearForwardModel g;
  g.a = coeffs({1.0, -0.9});
  g.b = coeffs({0.5, 0.2});
  g.delay = 1;
  const ZpetcFilter f = zpetc_inverse(g);
  CHECK(f.unstable_count() == 0);
  CHECK(f.preview == 1);
  CHECK(f.gain_correction == 1.0);
  for (int i = 0; i < 10; ++i) {
    const double w = 0.3 * i;
    CHECK(std::abs(g.response(w) * f.response(w) - 1.0) < 1e-12);
  }
}

TEST_CASE("zero outside the unit circle") {
  // Single zero at z = -2.
  LinearForwardModel g;
  g.a = coeffs({1.0, -1.2, 0.35});
  g.b = coeffs({1.0, 2.0});
  g.delay = 1;
  const ZpetcFilter f = zpetc_inverse(g);
  CHECK(f.unstable_count() == 1);
  CHECK(f.preview == 2);
  CHECK(std::abs(g.response(0.0) * f.response(0.0) - 1.0) < 1e-9);
  for (int i = 1; i <= 20; ++i) {
    const double w = M_PI * i / 21.0;
    const cd h = g.response(w) * f.response(w);
    CHECK(std::abs(std::arg(h)) < 1e-6);
    CHECK(h.real() > 0.0);
  }
  CHECK(f.spectral_radius() < 1.0);

  // The lifted inverse-model parameters reproduce the same filter.
  const VectorXd ry = f.theta.head(f.spec.output_terms());
  const VectorXd ru = f.theta.tail(f.spec.input_terms());
  const double w = 0.4;
  const cd zinv = std::polar(1.0, -w);
  cd num = 0.0, den = 1.0;
  for (Index i = 0; i < ry.size(); ++i) num += ry(i) * std::pow(zinv, static_cast<double>(i - f.preview));
  for (Index j = 0; j < ru.size(); ++j) den -= ru(j) * std::pow(zinv, static_cast<double>(j + 1));
  CHECK(std::abs(num / den - f.response(w)) < 1e-10);
}

TEST_CASE("zeros on the unit circle are refused") {
  LinearForwardModel g;
  g.a = coeffs({1.0, -0.5});
  g.b = coeffs({1.0, 1.0});  // zero at z = -1
  g.delay = 1;
  CHECK_THROWS_AS(zpetc_inverse(g), InvalidArgument);
}

TEST_CASE("leading zero coefficients add delay") {
  LinearForwardModel g;
  g.a = coeffs({1.0, -0.5});
  g.b = coeffs({0.0, 1.0, 0.3});
  g.delay = 1;
  const ZpetcFilter f = zpetc_inverse(g);
  CHECK(f.preview == 2);
  CHECK(std::abs(g.response(0.7) * f.response(0.7) - 1.0) < 1e-12);
}
