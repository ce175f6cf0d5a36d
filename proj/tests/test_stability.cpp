#include <doctest.h>

#include <cmath>

#include "pgnn/error.hpp"
#include "pgnn/lyapunov.hpp"
#include "pgnn/stability.hpp"
#include "support.hpp"

using namespace pgnn;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

/// Linear-physics model with a random network and past-input coefficients
/// whose companion matrix is stable.
PgnnModel random_filter(Rng& rng, const RegressorSpec& spec, double radius, double nn_scale) {
  PgnnModel m = make_model(spec, 1e-3, PhysicsKind::linear, TransformKind::identity, {4});
  m.theta_phy.head(spec.output_terms()) = support::random_vector(rng, spec.output_terms());
  m.theta_phy.tail(spec.input_terms()) = support::stable_companion_coeffs(rng, spec.input_terms(), radius);
  m.nn.unflatten(support::random_vector(rng, m.nn_params(), -nn_scale, nn_scale));
  return m;
}

/// Theorem-style right-hand side written out from its definition.
double rhs_oracle(const MatrixXd& a, const VectorXd& b, const MatrixXd& p, double lam, double beta) {
  const double cb = b.dot(p * b) + (a.transpose() * p * b).squaredNorm() / (beta * lam);
  return (1.0 - beta) * lam / cb;
}

}  // namespace

TEST_CASE("companion form") {
  CHECK(companion_matrix(VectorXd::Constant(1, 0.5)) == MatrixXd::Constant(1, 1, 0.5));
  const Eigen::Vector3d a(0.1, -0.2, 0.3);
  MatrixXd expected(3, 3);
  expected << 0.1, -0.2, 0.3,  //
      1.0, 0.0, 0.0,           //
      0.0, 1.0, 0.0;
  CHECK(companion_matrix(a) == expected);

  auto rng = make_rng(41);
  PgnnModel m = random_filter(rng, {2, 4, 0}, 0.8, 0.5);
  m.theta_phy.tail(3) = a;
  const FeedforwardStateSpace ss = to_state_space(m);
  CHECK(ss.A == expected);
  CHECK(ss.B == Eigen::Vector3d(1.0, 0.0, 0.0));
  CHECK(ss.theta_uff == a);

  PgnnModel scalar = random_filter(rng, {1, 2, 0}, 0.8, 0.5);
  scalar.theta_phy(2) = 0.5;
  const FeedforwardStateSpace s2 = to_state_space(scalar);
  CHECK(s2.A == MatrixXd::Constant(1, 1, 0.5));
  CHECK(s2.B == VectorXd::Ones(1));
}

TEST_CASE("equilibrium shift keeps the filter output and zeroes the network at the origin") {
  auto rng = make_rng(42);
  const PgnnModel m = random_filter(rng, {2, 3, 1}, 0.8, 0.7);
  const FeedforwardStateSpace ss = to_state_space(m);
  CHECK(std::abs(ss.nn.eval(VectorXd::Zero(m.spec.size()))) < 1e-14);
  for (int t = 0; t < 10; ++t) {
    const VectorXd phi = support::random_vector(rng, m.spec.size());
    const double direct = predict(m, phi);
    const double via_ss = ss.output(phi.head(3), phi.tail(2));
    CHECK(via_ss == doctest::Approx(direct).epsilon(1e-12));
  }
  // Zero reference and zero offset: the state follows A exactly.
  FeedforwardStateSpace lin = ss;
  lin.nn = NeuralNet<double>::zeros(m.spec.size(), {4});
  lin.offset = 0.0;
  VectorXd x = support::random_vector(rng, 2);
  for (int k = 0; k < 20; ++k) {
    const VectorXd next = lin.step(x, VectorXd::Zero(3));
    CHECK((next - lin.A * x).cwiseAbs().maxCoeff() == 0.0);
    x = next;
  }
  CHECK_THROWS_AS(to_state_space(make_model({5, 1, 2}, 1e-3, PhysicsKind::clm, TransformKind::identity, {2})),
                  InvalidArgument);
}

TEST_CASE("Lipschitz bound") {
  std::vector<NeuralNet<double>::Layer> one{{(MatrixXd(1, 3) << 1.0, -2.0, 0.5).finished(), VectorXd::Zero(1)}};
  const RegressorSpec spec{1, 2, 0};
  CHECK(lipschitz_bound(NeuralNet<double>(one), spec).k == Eigen::Vector3d(1.0, 2.0, 0.5));

  std::vector<NeuralNet<double>::Layer> two{{(MatrixXd(2, 2) << 2.0, 0.0, 0.0, 3.0).finished(), VectorXd::Zero(2)},
                                            {(MatrixXd(1, 2) << 1.0, 1.0).finished(), VectorXd::Zero(1)}};
  const LipschitzBound lb = lipschitz_bound(NeuralNet<double>(two), {0, 2, 0});
  CHECK(lb.k == Eigen::Vector2d(2.0, 3.0));
  CHECK(lb.k_r == VectorXd::Constant(1, 2.0));
  CHECK(lb.k_uff == VectorXd::Constant(1, 3.0));

  auto rng = make_rng(43);
  const auto nn = support::random_net(rng, 4, {5, 3}, 1.5);
  const VectorXd k = lipschitz_bound(nn, {1, 3, 0}).k;
  for (int t = 0; t < 10000; ++t) {
    const VectorXd g = nn.jacobian_input(support::random_vector(rng, 4, -3.0, 3.0)).transpose().cwiseAbs();
    CHECK_FALSE(((g - k).array() > 1e-12).any());
  }
}

TEST_CASE("Lyapunov pair") {
  CHECK(lyapunov_pair(MatrixXd::Zero(2, 2), MatrixXd::Identity(2, 2)) == MatrixXd::Identity(2, 2));
  CHECK(lyapunov_pair(MatrixXd::Constant(1, 1, 0.5), MatrixXd::Identity(1, 1))(0, 0) ==
        doctest::Approx(4.0 / 3.0).epsilon(1e-14));
  auto rng = make_rng(44);
  for (int t = 0; t < 20; ++t) {
    const MatrixXd a = support::random_stable(rng, 3);
    const MatrixXd q = MatrixXd::Identity(3, 3);
    const MatrixXd p = lyapunov_pair(a, q);
    CHECK((a.transpose() * p * a - p + q).norm() < 1e-10);
    CHECK((p - p.transpose()).norm() < 1e-12);
    CHECK(Eigen::SelfAdjointEigenSolver<MatrixXd>(p).eigenvalues().minCoeff() > 0.0);
  }
  // The doubling iteration used for large systems.
  const MatrixXd big = support::random_stable(rng, 35, 0.9);
  const MatrixXd pb = lyapunov_pair(big, MatrixXd::Identity(35, 35));
  CHECK((big.transpose() * pb * big - pb + MatrixXd::Identity(35, 35)).norm() < 1e-10);
  CHECK_THROWS_AS(lyapunov_pair(MatrixXd::Constant(1, 1, 1.0), MatrixXd::Identity(1, 1)), NotSchur);
}

TEST_CASE("optimal beta") {
  const MatrixXd a = MatrixXd::Constant(1, 1, 0.5);
  const VectorXd b = VectorXd::Ones(1);
  const MatrixXd q = MatrixXd::Identity(1, 1);
  const MatrixXd p = MatrixXd::Constant(1, 1, 4.0 / 3.0);
  const BetaChoice bc = optimal_beta(a, b, p, q);
  double best = -1.0, arg = 0.0;
  for (int i = 1; i < 1000000; ++i) {
    const double beta = i * 1e-6;
    const double r = rhs_oracle(a, b, p, 1.0, beta);
    if (r > best) {
      best = r;
      arg = beta;
    }
  }
  CHECK(std::abs(bc.beta - arg) <= 1e-6);
  CHECK(bc.rhs >= best - 1e-15);
  CHECK(bc.rhs == doctest::Approx(iss_rhs(a, b, p, 1.0, bc.beta)).epsilon(1e-14));
  CHECK(bc.beta > 0.0);
  CHECK(bc.beta < 1.0);

  const BetaChoice zero = optimal_beta(MatrixXd::Zero(2, 2), Eigen::Vector2d(1.0, 0.0), MatrixXd::Identity(2, 2),
                                       MatrixXd::Identity(2, 2));
  CHECK(zero.limit);
  CHECK(zero.beta == 0.0);
  CHECK(zero.rhs == 1.0);
}

TEST_CASE("certificate") {
  auto rng = make_rng(45);
  SUBCASE("zero network is certified with the whole rhs as margin") {
    PgnnModel m = random_filter(rng, {1, 3, 0}, 0.7, 0.0);
    const IssCertificate cert = certify_iss(to_state_space(m));
    CHECK(cert.certified);
    CHECK(cert.lhs == 0.0);
    CHECK(cert.margin == cert.rhs);
    CHECK(cert.rhs > 0.0);
    CHECK(cert.lyapunov_residual < 1e-10);
    CHECK(verdict_summary(cert).rfind("CERTIFIED", 0) == 0);
  }
  SUBCASE("verdict flips where the margin changes sign") {
    PgnnModel m = random_filter(rng, {1, 3, 0}, 0.7, 1.0);
    const FeedforwardStateSpace base = to_state_space(m);
    auto scaled = [&](double s) {
      FeedforwardStateSpace ss = base;
      ss.nn.output_layer().weight *= s;
      return certify_iss(ss);
    };
    const IssCertificate unit = scaled(1.0);
    // lhs scales with s^2, so the crossing sits at sqrt(rhs / lhs).
    const double s_star = std::sqrt(unit.rhs / unit.lhs);
    CHECK(scaled(0.999 * s_star).certified);
    CHECK_FALSE(scaled(1.001 * s_star).certified);
    double lo = 0.0, hi = 10.0 * s_star;
    for (int i = 0; i < 60; ++i) {
      const double mid = 0.5 * (lo + hi);
      (scaled(mid).certified ? lo : hi) = mid;
    }
    CHECK(lo == doctest::Approx(s_star).epsilon(1e-6));
  }
  SUBCASE("static filters are certified without a state") {
    PgnnModel m = make_model({3, 1, 0}, 1e-3, PhysicsKind::linear, TransformKind::identity, {3});
    m.nn.unflatten(support::random_vector(rng, m.nn_params()));
    const IssCertificate cert = certify_iss(to_state_space(m));
    CHECK(cert.static_filter);
    CHECK(cert.certified);
  }
  SUBCASE("unstable physics is rejected") {
    PgnnModel m = random_filter(rng, {1, 2, 0}, 0.7, 0.1);
    m.theta_phy(2) = 1.2;
    CHECK_THROWS_AS(certify_iss(to_state_space(m)), NotSchur);
  }
}

TEST_CASE("Lyapunov function decreases along certified trajectories without reference") {
  auto rng = make_rng(46);
  int checked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    PgnnModel m = random_filter(rng, {1, 4, 0}, 0.8, 0.3);
    FeedforwardStateSpace ss = to_state_space(m);
    IssCertificate cert = certify_iss(ss);
    if (!cert.certified) {
      ss.nn.output_layer().weight *= std::sqrt(0.5 * cert.rhs / cert.lhs);
      cert = certify_iss(ss);
    }
    REQUIRE(cert.certified);
    // Keep the origin an equilibrium after the rescaling.
    ss.nn.output_layer().bias(0) -= ss.nn.eval(VectorXd::Zero(ss.spec.size()));
    ss.offset = 0.0;
    // V(k+1) - V(k) <= -kappa |x|^2 with kappa = (1 - beta) lambda_min(Q) - c_beta lhs.
    const double kappa = (1.0 - cert.beta) * cert.lambda_min_q - cert.c_beta * cert.lhs;
    REQUIRE(kappa > 0.0);
    VectorXd x = support::random_vector(rng, 3, -5.0, 5.0);
    const VectorXd zero_r = VectorXd::Zero(2);
    for (int k = 0; k < 200; ++k) {
      const VectorXd next = ss.step(x, zero_r);
      const double dv = next.dot(cert.P * next) - x.dot(cert.P * x);
      CHECK(dv <= -kappa * x.squaredNorm() + 1e-12 * std::max(1.0, x.squaredNorm()));
      x = next;
    }
    ++checked;
  }
  CHECK(checked == 20);
}

TEST_CASE("stability constraint set") {
  auto rng = make_rng(47);
  PgnnModel m = random_filter(rng, {2, 3, 0}, 0.8, 1.0);
  const ThetaConstraint tc = theta_constraint_for(m);
  PgnnModel zero = m;
  zero.nn.unflatten(VectorXd::Zero(zero.nn_params()));
  CHECK(tc.contains(zero));

  // Membership is monotone in the output-layer scale.
  bool was_member = true;
  for (double s = 0.0; s < 50.0; s += 0.25) {
    PgnnModel p = m;
    p.nn.output_layer().weight *= s;
    const bool member = tc.contains(p);
    if (!was_member) CHECK_FALSE(member);
    was_member = member;
  }
  CHECK_FALSE(was_member);

  PgnnModel big = m;
  big.nn.output_layer().weight *= 100.0;
  const double scale = tc.project(big);
  CHECK(scale < 1.0);
  CHECK(tc.contains(big));
  const IssCertificate cert = certify_iss(to_state_space(big));
  CHECK(cert.certified);
  CHECK(cert.margin > 0.0);
  CHECK(tc.lhs(big) == doctest::Approx(0.99 * tc.rhs).epsilon(1e-9));
}

TEST_CASE("preview extension") {
  CHECK(extend_preview({4, 4, 0}, 0, 0) == RegressorSpec{4, 4, 0});
  const RegressorSpec ext = extend_preview({4, 4, 0}, 20, 1);
  CHECK(ext.output_terms() == 25);
  CHECK(ext.input_terms() == 2);
  CHECK(ext.newest_output_offset() == 21);
  CHECK_THROWS_AS(extend_preview({4, 2, 0}, 1, 2), InvalidArgument);

  // Removing the unstable eigenvalues removes that many state dimensions.
  auto rng = make_rng(48);
  VectorXd coeffs = support::stable_companion_coeffs(rng, 2, 0.6);
  // Multiply in a factor (1 - 1.5 z^-1): char poly gains the root 1.5.
  Eigen::Vector3d poly(1.0, -coeffs(0), -coeffs(1));
  Eigen::Vector4d grown;
  grown << poly(0), poly(1) - 1.5 * poly(0), poly(2) - 1.5 * poly(1), -1.5 * poly(2);
  const VectorXd unstable = -grown.tail(3);
  const int nus = count_unstable(unstable);
  CHECK(nus == 1);
  const RegressorSpec base{4, 4, 0};
  const RegressorSpec reduced = extend_preview(base, 20, nus);
  CHECK(companion_matrix(VectorXd::Zero(reduced.input_terms())).rows() ==
        companion_matrix(unstable).rows() - nus);
  CHECK(count_unstable(coeffs) == 0);
}

TEST_CASE("certificate serialization") {
  auto rng = make_rng(49);
  const IssCertificate cert = certify_iss(to_state_space(random_filter(rng, {1, 3, 0}, 0.7, 0.2)));
  const nlohmann::json j = to_json(cert);
  CHECK(j["P"]["rows"] == 2);
  CHECK(j["P"]["data"].size() == 4);
  CHECK(j["P"]["data"][1].get<double>() == cert.P(0, 1));
  CHECK(j["certified"].get<bool>() == cert.certified);
}
