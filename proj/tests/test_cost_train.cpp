#include <doctest.h>

#include <cmath>

#include "pgnn/closed_loop.hpp"
#include "pgnn/cost.hpp"
#include "pgnn/error.hpp"
#include "pgnn/experiments.hpp"
#include "pgnn/train.hpp"
#include "support.hpp"

using namespace pgnn;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

/// Samples of u = theta^T phi + g(phi) + noise on a linear layout.
DataSet linear_data(Rng& rng, const RegressorSpec& spec, Index n, const VectorXd& theta, double noise,
                    double bump = 0.0) {
  DataSet ds;
  ds.spec = spec;
  ds.ts = 1e-3;
  ds.regressors = support::random_matrix(rng, spec.size(), n);
  ds.targets.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double x = ds.regressors(0, i);
    ds.targets(i) = theta.dot(ds.regressors.col(i)) + bump * std::tanh(3.0 * x * x) + noise * standard_normal(rng);
  }
  return ds;
}

PgnnModel linear_model(const RegressorSpec& spec, const std::vector<Index>& hidden, bool with_nn = true) {
  return make_model(spec, 1e-3, PhysicsKind::linear, TransformKind::identity, hidden, with_nn);
}

}  // namespace

TEST_CASE("data fit cost") {
  auto rng = make_rng(21);
  const RegressorSpec spec{1, 2, 0};
  const VectorXd theta = Eigen::Vector3d(0.5, -1.0, 2.0);
  const DataSet ds = linear_data(rng, spec, 100, theta, 0.0);
  PgnnModel m = linear_model(spec, {}, false);
  m.theta_phy = theta;
  CHECK(cost_mse(m, ds) < 1e-20);

  DataSet signs = ds;
  for (Index i = 0; i < signs.size(); ++i) signs.targets(i) = i % 2 ? 1.0 : -1.0;
  PgnnModel zero = linear_model(spec, {}, false);
  CHECK(cost_mse(zero, signs) == doctest::Approx(1.0));

  DataSet doubled = signs;
  doubled.targets *= 2.0;
  CHECK(cost_mse(zero, doubled) == doctest::Approx(4.0 * cost_mse(zero, signs)));
}

TEST_CASE("parameter penalty") {
  auto rng = make_rng(22);
  const RegressorSpec spec{1, 2, 0};
  PgnnModel m = linear_model(spec, {3});
  const VectorXd star = Eigen::Vector3d(2.0, -4.0, 0.5);
  CostSpec cost;
  cost.variant = CostVariant::pgnn_reg;
  cost.theta_phy_star = star;
  cost.lambda_phy = star.cwiseInverse();
  cost.lambda_nn = VectorXd::Constant(1, 0.3);
  m.theta_phy = star;
  CHECK(cost_reg(m, cost) == 0.0);

  // A relative deviation of one in every physics parameter costs one each.
  m.theta_phy = 2.0 * star;
  cost.lambda_nn = VectorXd();
  CHECK(cost_reg(m, cost) == doctest::Approx(3.0));

  m.theta_phy = star;
  m.nn.unflatten(support::random_vector(rng, m.nn_params()));
  cost.lambda_nn = VectorXd::Constant(1, 0.3);
  const double single = cost_reg(m, cost);
  cost.lambda_nn = VectorXd::Constant(1, 0.6);
  CHECK(cost_reg(m, cost) == doctest::Approx(4.0 * single));
  CHECK(single == doctest::Approx(0.09 * m.nn.flatten().squaredNorm()));
}

TEST_CASE("physics compliance") {
  auto rng = make_rng(23);
  const RegressorSpec spec{1, 2, 0};
  const VectorXd star = Eigen::Vector3d(1.0, 2.0, 3.0);
  PgnnModel m = linear_model(spec, {3});
  m.theta_phy = star;
  const MatrixXd pts = support::random_matrix(rng, 3, 40);
  CHECK(cost_phy_compliance(m, PhysicsKind::linear, star, pts) == 0.0);
  m.nn.output_layer().bias(0) = 0.7;
  CHECK(cost_phy_compliance(m, PhysicsKind::linear, star, pts) == doctest::Approx(0.49));

  DataSet a = linear_data(rng, spec, 40, star, 0.1), b = a;
  b.targets = support::random_vector(rng, 40);
  CostSpec cost;
  cost.variant = CostVariant::pinn;
  cost.c = 0.5;
  cost.theta_phy_star = star;
  CHECK(cost_breakdown(m, a, cost).data_compliance == cost_breakdown(m, b, cost).data_compliance);
}

TEST_CASE("total cost composition") {
  auto rng = make_rng(24);
  const RegressorSpec spec{1, 2, 0};
  const VectorXd star = Eigen::Vector3d(1.0, -2.0, 0.5);
  const DataSet ds = linear_data(rng, spec, 80, star, 0.2, 0.5);
  PgnnModel m = linear_model(spec, {4});
  m.theta_phy = star + 0.1 * support::random_vector(rng, 3);
  m.nn.unflatten(support::random_vector(rng, m.nn_params()));
  const MatrixXd ze = support::random_matrix(rng, 3, 25, -2.0, 2.0);

  CostSpec plain;
  plain.variant = CostVariant::pgnn_reg;
  plain.theta_phy_star = star;
  CHECK(total_cost(m, ds, plain) == cost_mse(m, ds));

  CostSpec extrap;
  extrap.variant = CostVariant::pgnn_extrap;
  extrap.theta_phy_star = star;
  extrap.lambda_phy = VectorXd::Constant(1, 0.2);
  extrap.lambda_nn = VectorXd::Constant(1, 0.01);
  extrap.gamma = 0.1;
  extrap.extrapolation_points = ze;
  const double expected = cost_mse(m, ds) + cost_reg(m, extrap) +
                          0.1 * cost_phy_compliance(m, PhysicsKind::linear, star, ze);
  CHECK(total_cost(m, ds, extrap) == doctest::Approx(expected).epsilon(1e-14));

  CostSpec pinn;
  pinn.variant = CostVariant::pinn;
  pinn.c = 0.5;
  pinn.theta_phy_star = star;
  CHECK(total_cost(m, ds, pinn) ==
        doctest::Approx(cost_mse(m, ds) + 0.5 * cost_phy_compliance(m, PhysicsKind::linear, star, ds.regressors))
            .epsilon(1e-14));

  CostSpec missing = extrap;
  missing.extrapolation_points.resize(3, 0);
  CHECK_THROWS_AS(total_cost(m, ds, missing), InvalidArgument);
  CostSpec no_star = pinn;
  no_star.theta_phy_star = VectorXd();
  CHECK_THROWS_AS(total_cost(m, ds, no_star), InvalidArgument);
}

TEST_CASE("linear block selection reduces to ridge regression when hidden features vanish") {
  auto rng = make_rng(25);
  const RegressorSpec spec{1, 2, 0};
  const VectorXd star = Eigen::Vector3d(1.0, -2.0, 0.5);
  const DataSet ds = linear_data(rng, spec, 200, star, 0.3, 1.0);
  PgnnModel m = linear_model(spec, {4});  // all-zero hidden layer: tanh(0) = 0
  CostSpec cost;
  cost.variant = CostVariant::pgnn_reg;
  cost.theta_phy_star = star;
  cost.lambda_phy = Eigen::Vector3d(0.3, 0.1, 0.2);
  cost.lambda_nn = VectorXd::Constant(1, 0.05);
  const PgnnModel sel = optimized_lip_selection(m, ds, cost);

  // Normal equations of the block [b; theta] with the output weights pinned at zero.
  const double n = static_cast<double>(ds.size());
  MatrixXd f(4, ds.size());
  f.row(0).setOnes();
  f.bottomRows(3) = ds.regressors;
  VectorXd w2(4), centre = VectorXd::Zero(4);
  w2 << 0.05 * 0.05, 0.09, 0.01, 0.04;
  centre.tail(3) = star;
  MatrixXd lhs = f * f.transpose() / n;
  lhs.diagonal() += w2;
  const VectorXd rhs = f * ds.targets / n + w2.cwiseProduct(centre);
  const VectorXd sol = lhs.ldlt().solve(rhs);
  CHECK(support::relative_error(sel.theta_phy, sol.tail(3), 1e-12) < 1e-8);
  CHECK(std::abs(sel.nn.output_layer().bias(0) - sol(0)) < 1e-8 * std::max(1.0, std::abs(sol(0))));
  CHECK(sel.nn.output_layer().weight.isZero(0.0));
}

TEST_CASE("linear block selection never increases the cost") {
  auto rng = make_rng(26);
  for (int trial = 0; trial < 20; ++trial) {
    const RegressorSpec spec{2, 2, 0};
    const VectorXd star = support::random_vector(rng, 4, -2.0, 2.0);
    const DataSet ds = linear_data(rng, spec, 150, star, 0.1, 1.0);
    PgnnModel m = linear_model(spec, {5});
    m.nn.unflatten(support::random_vector(rng, m.nn_params()));
    m.theta_phy = support::random_vector(rng, 4);
    CostSpec cost;
    cost.variant = CostVariant::pgnn_reg;
    cost.theta_phy_star = star;
    cost.lambda_phy = support::random_vector(rng, 4, 0.0, 0.5);
    cost.lambda_nn = VectorXd::Constant(1, pgnn::uniform(rng, 0.0, 0.1));
    const double before = total_cost(m, ds, cost);
    const double after = total_cost(optimized_lip_selection(m, ds, cost), ds, cost);
    CHECK(after <= before + 1e-10 * std::max(1.0, before));
  }
}

TEST_CASE("physics fit") {
  auto rng = make_rng(27);
  const RegressorSpec spec{2, 2, 0};
  const VectorXd truth = Eigen::Vector4d(1.5, -0.5, 2.0, 0.25);
  const PhysicsFit exact = fit_physics(PhysicsKind::linear, linear_data(rng, spec, 60, truth, 0.0));
  CHECK(support::relative_error(exact.theta, truth, 1e-12) < 1e-8);

  const PhysicsFit noisy = fit_physics(PhysicsKind::linear, linear_data(rng, spec, 10000, truth, 0.5));
  for (Index j = 0; j < 4; ++j) CHECK(std::abs(noisy.theta(j) - truth(j)) < 3.0 * noisy.std_error(j));
  CHECK(noisy.mse == doctest::Approx(0.25).epsilon(0.05));
  CHECK(noisy.samples == 10000);

  DataSet degenerate = linear_data(rng, spec, 60, truth, 0.0);
  degenerate.regressors.row(1) = degenerate.regressors.row(0);
  CHECK_THROWS_AS(fit_physics(PhysicsKind::linear, degenerate), IllConditioned);
}

TEST_CASE("physics fit on the synthetic motor finds Coulomb friction") {
  ClmStudyConfig cfg;
  cfg.velocities = {0.05, 0.1};
  cfg.repetitions = 1;
  const auto exp = generate_training_experiment(make_clm_plant(cfg), make_clm_feedback(cfg.ts),
                                                clm_training_references(cfg), cfg.dither);
  const PhysicsFit fit = fit_physics(PhysicsKind::clm, build_regressors(exp.log, clm_regressor_spec()));
  CHECK(fit.theta(2) > 0.0);
  CHECK(fit.theta(0) == doctest::Approx(cfg.plant.m).epsilon(0.3));
}

TEST_CASE("penalty rule") {
  DataSet ds;
  ds.spec = {0, 1, 0};
  ds.ts = 1e-3;
  ds.regressors = MatrixXd::Zero(1, 4);
  ds.targets = Eigen::Vector4d(1.0, -1.0, 1.0, -1.0);  // residual MSE 1 with zero features
  const VectorXd ones = VectorXd::Ones(1);
  CHECK(lambda_phy_rule(PhysicsKind::linear, ds, ones, 1.0)(0) == doctest::Approx(1.0));
  CHECK(lambda_phy_rule(PhysicsKind::linear, ds, 2.0 * ones, 1.0)(0) == doctest::Approx(0.5));
  CHECK(lambda_phy_rule(PhysicsKind::linear, ds, ones, 4.0)(0) == doctest::Approx(0.5));
  CHECK_THROWS_AS(lambda_phy_rule(PhysicsKind::linear, ds, VectorXd::Zero(1), 1.0), InvalidArgument);
}

TEST_CASE("training a linear model solves least squares immediately") {
  auto rng = make_rng(28);
  const RegressorSpec spec{2, 2, 0};
  const DataSet ds = linear_data(rng, spec, 300, Eigen::Vector4d(1.0, 2.0, -1.0, 0.5), 0.2);
  CostSpec cost;
  TrainConfig cfg;
  cfg.restarts = 1;
  const TrainReport rep = train(linear_model(spec, {}, false), ds, DataSet{}, cost, cfg);
  REQUIRE(rep.restarts.size() == 1);
  CHECK(rep.restarts[0].trace.size() <= 4);
  const VectorXd ls = (ds.regressors * ds.regressors.transpose()).ldlt().solve(ds.regressors * ds.targets);
  CHECK(support::relative_error(rep.model.theta_phy, ls, 1e-12) < 1e-10);
  const double oracle = (ds.targets - ds.regressors.transpose() * ls).squaredNorm() / 300.0;
  CHECK(rep.breakdown.mse == doctest::Approx(oracle).epsilon(1e-10));
}

TEST_CASE("physics-guided training starts no worse than the physics model") {
  auto rng = make_rng(29);
  const RegressorSpec spec{1, 2, 0};
  const VectorXd truth = Eigen::Vector3d(1.0, -0.5, 0.8);
  const DataSet all = linear_data(rng, spec, 600, truth, 0.05, 1.0);
  const auto [tr, va] = split_train_val(all, 0.7, 1);
  const PhysicsFit fit = fit_physics(PhysicsKind::linear, tr);
  CostSpec cost;
  cost.variant = CostVariant::pgnn_reg;
  cost.theta_phy_star = fit.theta;
  cost.lambda_phy = lambda_phy_rule(PhysicsKind::linear, tr, fit.theta, 1.0);
  cost.lambda_nn = VectorXd::Constant(1, 1e-4);
  TrainConfig cfg;
  cfg.restarts = 3;
  cfg.max_epochs = 30;
  cfg.seed = 5;
  const TrainReport rep = train(linear_model(spec, {6}), tr, va, cost, cfg);

  PgnnModel physics_only = linear_model(spec, {6});
  physics_only.theta_phy = fit.theta;
  const double v_bar = total_cost(physics_only, tr, cost);
  for (const RestartRecord& r : rep.restarts) {
    CHECK(r.initial_cost <= v_bar + 1e-12);
    for (std::size_t e = 1; e < r.trace.size(); ++e) CHECK(r.trace[e].train_cost < r.trace[e - 1].train_cost);
  }
  CHECK(rep.breakdown.total <= v_bar);
  CHECK(rep.breakdown.mse < fit.mse);

  const TrainReport again = train(linear_model(spec, {6}), tr, va, cost, cfg);
  CHECK(again.model.flatten() == rep.model.flatten());
}

TEST_CASE("penalty sweep") {
  const auto grid = log_grid(1e-18, 1e8, 20);
  REQUIRE(grid.size() == 20);
  CHECK(grid.front() == doctest::Approx(1e-18));
  CHECK(grid.back() == doctest::Approx(1e8));
  for (std::size_t i = 1; i < grid.size(); ++i) CHECK(grid[i] > grid[i - 1]);

  auto rng = make_rng(30);
  const RegressorSpec spec{1, 2, 0};
  const DataSet ds = linear_data(rng, spec, 300, Eigen::Vector3d(1.0, -0.5, 0.8), 0.05, 1.0);
  const PhysicsFit fit = fit_physics(PhysicsKind::linear, ds);
  CostSpec base;
  base.variant = CostVariant::pgnn_reg;
  base.theta_phy_star = fit.theta;
  TrainConfig cfg;
  cfg.restarts = 1;
  cfg.max_epochs = 40;
  const auto points = sweep_lambda(linear_model(spec, {5}), ds, DataSet{}, base, {0.0, 1e-5, 1e8}, cfg);
  REQUIRE(points.size() == 3);
  CHECK(points[0].lambda == 0.0);
  CHECK(points[0].mse <= fit.mse * (1.0 + 1e-9));
  CHECK(points[1].mse <= fit.mse * (1.0 + 1e-9));
  // A dominant penalty removes the network.
  CHECK(points[2].penalty_unit < 1e-10);
  CHECK(points[2].mse == doctest::Approx(fit.mse).epsilon(1e-6));
}
