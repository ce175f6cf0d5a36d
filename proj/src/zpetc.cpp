#include "pgnn/zpetc.hpp"

#include <unsupported/Eigen/Polynomials>

#include <cmath>

#include "pgnn/error.hpp"
#include "pgnn/lyapunov.hpp"
#include "pgnn/stability.hpp"

namespace pgnn {

using Eigen::Index;
using Eigen::VectorXd;
using cd = std::complex<double>;

namespace {

cd eval_poly(const VectorXd& c, cd zinv) {
  cd acc = 0.0;
  for (Index i = c.size(); i-- > 0;) acc = acc * zinv + c(i);
  return acc;
}

VectorXd convolve(const VectorXd& x, const VectorXd& y) {
  VectorXd out = VectorXd::Zero(x.size() + y.size() - 1);
  for (Index i = 0; i < x.size(); ++i) out.segment(i, y.size()) += x(i) * y;
  return out;
}

}  // namespace

cd LinearForwardModel::response(double omega) const {
  const cd zinv = std::polar(1.0, -omega);
  return std::pow(zinv, delay) * eval_poly(b, zinv) / eval_poly(a, zinv);
}

LinearForwardModel forward_from_inverse(const Eigen::Ref<const VectorXd>& theta,
                                        const RegressorSpec& spec) {
  if (theta.size() != spec.size()) {
    throw InvalidArgument("forward_from_inverse: parameter count does not match the spec");
  }
  LinearForwardModel g;
  g.a = theta.head(spec.output_terms());
  g.b.resize(spec.nb);
  g.b(0) = 1.0;
  g.b.tail(spec.input_terms()) = -theta.tail(spec.input_terms());
  g.delay = spec.nk + 1;
  return g;
}

std::vector<cd> polynomial_roots(const Eigen::Ref<const VectorXd>& coeffs) {
  if (coeffs.size() == 0 || coeffs(0) == 0.0) {
    throw InvalidArgument("polynomial_roots: leading coefficient must be nonzero");
  }
  if (coeffs.size() == 1) return {};
  // Roots in z of c_0 z^m + c_1 z^(m-1) + ... + c_m.
  const VectorXd ascending = coeffs.reverse();
  Eigen::PolynomialSolver<double, Eigen::Dynamic> solver(ascending);
  std::vector<cd> roots;
  for (Index i = 0; i < solver.roots().size(); ++i) roots.push_back(solver.roots()(i));
  return roots;
}

VectorXd polynomial_from_roots(const std::vector<cd>& roots) {
  Eigen::VectorXcd poly = Eigen::VectorXcd::Ones(1);
  for (const cd& r : roots) {
    Eigen::VectorXcd next = Eigen::VectorXcd::Zero(poly.size() + 1);
    next.head(poly.size()) += poly;
    next.tail(poly.size()) -= r * poly;
    poly = next;
  }
  if (poly.imag().cwiseAbs().maxCoeff() > 1e-8 * std::max(1.0, poly.real().cwiseAbs().maxCoeff())) {
    throw InvalidArgument("polynomial_from_roots: roots do not form conjugate pairs");
  }
  return poly.real();
}

ZpetcFilter zpetc_inverse(const LinearForwardModel& g) {
  if (g.a.size() == 0 || g.b.size() == 0) throw InvalidArgument("zpetc_inverse: empty model");
  if (g.delay < 0) throw InvalidArgument("zpetc_inverse: delay must be >= 0");
  // Leading zeros of B add to the delay.
  Index lead = 0;
  while (lead < g.b.size() && g.b(lead) == 0.0) ++lead;
  if (lead == g.b.size()) throw InvalidArgument("zpetc_inverse: numerator is identically zero");
  const VectorXd b = g.b.tail(g.b.size() - lead);
  const int delay = g.delay + static_cast<int>(lead);

  ZpetcFilter f;
  for (const cd& z : polynomial_roots(b)) {
    const double mod = std::abs(z);
    if (std::abs(mod - 1.0) < 1e-9) {
      throw InvalidArgument("zpetc_inverse: zero on the unit circle at (" + std::to_string(z.real()) +
                            ", " + std::to_string(z.imag()) + "); not supported");
    }
    (mod >= 1.0 ? f.unstable_zeros : f.stable_zeros).push_back(z);
  }
  const int m = f.unstable_count();
  const VectorXd bu = polynomial_from_roots(f.unstable_zeros);
  const VectorXd bs = b(0) * polynomial_from_roots(f.stable_zeros);
  f.gain_correction = std::pow(bu.sum(), 2);
  f.denominator = bs;
  f.numerator = convolve(g.a, bu.reverse()) / f.gain_correction;
  f.preview = delay + m;

  // Same filter as u(k) = sum theta_y r(k + preview - i) + sum theta_u u(k - j).
  f.spec.na = static_cast<int>(f.numerator.size()) - 1;
  f.spec.nk = f.preview - 1;
  f.spec.nb = static_cast<int>(bs.size());
  if (f.spec.nk < 0) throw InvalidArgument("zpetc_inverse: model without delay cannot be inverted causally");
  f.theta.resize(f.spec.size());
  f.theta.head(f.spec.output_terms()) = f.numerator / bs(0);
  f.theta.tail(f.spec.input_terms()) = -bs.tail(bs.size() - 1) / bs(0);
  return f;
}

cd ZpetcFilter::response(double omega) const {
  const cd zinv = std::polar(1.0, -omega);
  return std::pow(1.0 / zinv, preview) * eval_poly(numerator, zinv) / eval_poly(denominator, zinv);
}

double ZpetcFilter::spectral_radius() const {
  return pgnn::spectral_radius(companion_matrix(theta.tail(spec.input_terms())));
}

nlohmann::json to_json(const ZpetcFilter& f) {
  const auto zeros = [](const std::vector<cd>& zs) {
    nlohmann::json out = nlohmann::json::array();
    for (const cd& z : zs) out.push_back({z.real(), z.imag()});
    return out;
  };
  const auto vec = [](const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  return {{"numerator", vec(f.numerator)},
          {"denominator", vec(f.denominator)},
          {"preview", f.preview},
          {"gain_correction", f.gain_correction},
          {"stable_zeros", zeros(f.stable_zeros)},
          {"unstable_zeros", zeros(f.unstable_zeros)},
          {"spec", to_json(f.spec)},
          {"theta", vec(f.theta)},
          {"spectral_radius", f.spectral_radius()}};
}

}  // namespace pgnn
