#include <doctest.h>

#include <cmath>
#include <sstream>

#include "pgnn/data.hpp"
#include "pgnn/error.hpp"
#include "support.hpp"

using namespace pgnn;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("regressor spec layout") {
  const RegressorSpec spec{5, 1, 2};
  CHECK(spec.size() == 6);
  CHECK(spec.output_terms() == 6);
  CHECK(spec.input_terms() == 0);
  CHECK(spec.newest_output_offset() == 3);
  CHECK(spec.oldest_output_offset() == -2);
  CHECK(spec.output_index(3).value() == 0);
  CHECK(spec.output_index(-2).value() == 5);
  CHECK_FALSE(spec.output_index(4).has_value());
  CHECK_FALSE(spec.input_index(1).has_value());

  const RegressorSpec s2{4, 4, 0};
  CHECK(s2.size() == 8);
  CHECK(s2.output_terms() + s2.input_terms() == s2.na + 1 + s2.nb - 1);
  CHECK(s2.input_index(1).value() == 5);
  CHECK(s2.input_index(3).value() == 7);
  CHECK_THROWS_AS((RegressorSpec{-1, 1, 0}.validate()), InvalidArgument);
  CHECK_THROWS_AS((RegressorSpec{1, 0, 0}.validate()), InvalidArgument);
}

TEST_CASE("build_regressors on an all-zero log") {
  const auto log = support::make_log(VectorXd::Zero(30), VectorXd::Zero(30), 1e-3);
  const DataSet ds = build_regressors(log, {2, 3, 1});
  REQUIRE(ds.size() > 0);
  CHECK(ds.regressors.isZero(0.0));
  CHECK(ds.targets.isZero(0.0));
}

TEST_CASE("build_regressors with the motor layout uses y(k+3) to y(k-2)") {
  VectorXd y(20), u(20);
  for (Index k = 0; k < 20; ++k) {
    y(k) = 100.0 + k;
    u(k) = -static_cast<double>(k);
  }
  const DataSet ds = build_regressors(support::make_log(u, y, 1e-3), {5, 1, 2});
  CHECK(ds.regressors.rows() == 6);
  // k runs from 2 to 16 so that y(k-2) and y(k+3) exist.
  REQUIRE(ds.size() == 15);
  for (Index i = 0; i < ds.size(); ++i) {
    const Index k = i + 2;
    for (Index j = 0; j < 6; ++j) CHECK(ds.regressors(j, i) == y(k + 3 - j));
    CHECK(ds.targets(i) == u(k));
  }
}

TEST_CASE("build_regressors matches a hand-unrolled oracle on a ramp") {
  const double ts = 1e-3;
  const Index n = 12;
  VectorXd y(n), u = VectorXd::Ones(n);
  for (Index k = 0; k < n; ++k) y(k) = static_cast<double>(k) * ts;
  const DataSet ds = build_regressors(support::make_log(u, y, ts), {1, 2, 0});
  REQUIRE(ds.size() == n - 2);
  for (Index i = 0; i < ds.size(); ++i) {
    const Index k = i + 1;
    CHECK(ds.regressors(0, i) == y(k + 1));
    CHECK(ds.regressors(1, i) == y(k));
    CHECK(ds.regressors(2, i) == u(k - 1));
    CHECK(ds.targets(i) == u(k));
  }
}

TEST_CASE("regressors of a known difference equation satisfy it exactly") {
  // Inverse of y(k+1) = 0.9 y(k) + 0.5 u(k) - 0.2 u(k-1):
  // u(k) = 2 y(k+1) - 1.8 y(k) + 0.4 u(k-1).
  auto rng = make_rng(3);
  const Index n = 400;
  VectorXd u = support::random_vector(rng, n), y = VectorXd::Zero(n);
  for (Index k = 1; k + 1 < n; ++k) y(k + 1) = 0.9 * y(k) + 0.5 * u(k) - 0.2 * u(k - 1);
  const DataSet ds = build_regressors(support::make_log(u, y, 1e-3), {1, 2, 0});
  Eigen::Vector3d theta(2.0, -1.8, 0.4);
  const VectorXd residual = ds.targets - ds.regressors.transpose() * theta;
  CHECK(residual.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("regressor_at agrees with build_regressors") {
  auto rng = make_rng(5);
  const VectorXd u = support::random_vector(rng, 50), y = support::random_vector(rng, 50);
  const RegressorSpec spec{3, 3, 1};
  const DataSet ds = build_regressors(support::make_log(u, y, 1e-3), spec);
  const Index first = 50 - ds.size() - spec.newest_output_offset();
  for (Index i = 0; i < ds.size(); ++i) {
    CHECK((regressor_at(y, u, spec, first + i) - ds.regressors.col(i)).isZero(0.0));
  }
}

TEST_CASE("central difference operator") {
  const double ts = 1e-3;
  const VectorXd c = VectorXd::Constant(20, 3.5);
  CHECK(apply_delta(c, ts).isZero(0.0));
  CHECK(apply_average(c).isApproxToConstant(3.5, 0.0));

  VectorXd ramp(20);
  for (Index k = 0; k < 20; ++k) ramp(k) = static_cast<double>(k) * ts;
  CHECK((apply_delta(ramp, ts).array() - 1.0).abs().maxCoeff() < 1e-12);

  VectorXd s(200);
  for (Index k = 0; k < 200; ++k) s(k) = std::sin(10.0 * static_cast<double>(k) * ts);
  const VectorXd d = apply_delta(s, ts);
  REQUIRE(d.size() == 198);
  for (Index i = 0; i < d.size(); ++i) {
    const Index k = i + 1;
    CHECK(d(i) == (s(k + 1) - s(k - 1)) / (2.0 * ts));
  }
  const VectorXd d2 = apply_delta(s, ts, 2);
  const VectorXd dd = apply_delta(d, ts);
  REQUIRE(d2.size() == dd.size());
  CHECK((d2 - dd).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("train/validation split") {
  auto make = [](Index n) {
    DataSet ds;
    ds.spec = {0, 1, 0};
    ds.ts = 1e-3;
    ds.regressors = VectorXd::LinSpaced(n, 0.0, static_cast<double>(n - 1)).transpose();
    ds.targets = ds.regressors.row(0).transpose();
    return ds;
  };
  const auto [tr, va] = split_train_val(make(10), 0.7, 1);
  CHECK(tr.size() == 7);
  CHECK(va.size() == 3);
  const auto [tr2, va2] = split_train_val(make(10), 0.7, 1);
  CHECK(tr.targets == tr2.targets);
  CHECK(va.targets == va2.targets);
  // Disjoint and complete.
  std::vector<double> all(tr.targets.data(), tr.targets.data() + tr.size());
  all.insert(all.end(), va.targets.data(), va.targets.data() + va.size());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == static_cast<double>(i));

  const auto [big_tr, big_va] = split_train_val(make(146000), 0.7, 0);
  CHECK(big_tr.size() == 102200);
  CHECK(big_va.size() == 43800);
}

TEST_CASE("input normalization") {
  MatrixXd x(3, 2);
  x << 0.0, 2.0,  //
      5.0, 5.0,   //
      -1.0, 1.0;
  const NormalizationRecord rec = fit_normalization(x);
  CHECK(rec.shift(0) == doctest::Approx(1.0));
  CHECK(rec.scale(0) == doctest::Approx(1.0));
  CHECK(rec.shift(1) == 5.0);
  CHECK(rec.scale(1) == 1.0);
  CHECK(rec.shift(2) == doctest::Approx(0.0));
  CHECK(rec.scale(2) == doctest::Approx(1.0));
  CHECK((rec.apply(x).row(0).array() - Eigen::Array2d(-1.0, 1.0).transpose()).abs().maxCoeff() < 1e-15);

  auto rng = make_rng(9);
  DataSet ds;
  ds.spec = {2, 2, 0};
  ds.regressors = support::random_matrix(rng, 4, 300, -50.0, 80.0);
  ds.targets = support::random_vector(rng, 300);
  const auto [norm, r] = normalize_inputs(ds);
  const VectorXd mean = norm.regressors.rowwise().mean();
  CHECK(mean.cwiseAbs().maxCoeff() < 1e-12);
  const DataSet back = denormalize_inputs(norm, r);
  CHECK(((back.regressors - ds.regressors).array().abs() / ds.regressors.array().abs().max(1e-300)).maxCoeff() <
        1e-12);
  // Already normalized data gives identity maps.
  const auto [again, r2] = normalize_inputs(norm);
  CHECK((r2.shift.cwiseAbs().maxCoeff()) < 1e-12);
  CHECK(((r2.scale.array() - 1.0).abs().maxCoeff()) < 1e-12);
}

TEST_CASE("log CSV round trip") {
  auto rng = make_rng(2);
  const auto log = support::make_log(support::random_vector(rng, 25), support::random_vector(rng, 25), 1e-3);
  std::stringstream buf;
  write_log_csv(buf, log);
  CHECK(buf.str().rfind("t,u,y\n", 0) == 0);
  const SignalLog back = read_log_csv(buf);
  CHECK(back.u == log.u);
  CHECK(back.y == log.y);
  CHECK(back.t == log.t);
  std::stringstream bad("t,u\n0,1\n");
  CHECK_THROWS_AS(read_log_csv(bad), InvalidArgument);
}

TEST_CASE("shortest round-trip decimal text") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 1e300, 0.0}) CHECK(std::stod(format_double(v)) == v);
  CHECK(format_double(0.1) == "0.1");
}
