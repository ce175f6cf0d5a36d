#include "pgnn/cost.hpp"

#include "pgnn/error.hpp"

namespace pgnn {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string to_string(CostVariant v) {
  switch (v) {
    case CostVariant::mse: return "mse";
    case CostVariant::pinn: return "pinn";
    case CostVariant::pgnn_reg: return "pgnn_reg";
    case CostVariant::pgnn_extrap: return "pgnn_extrap";
  }
  return "mse";
}

CostVariant cost_variant_from_string(const std::string& name) {
  if (name == "mse") return CostVariant::mse;
  if (name == "pinn") return CostVariant::pinn;
  if (name == "pgnn_reg") return CostVariant::pgnn_reg;
  if (name == "pgnn_extrap") return CostVariant::pgnn_extrap;
  throw InvalidArgument("unknown cost variant '" + name +
                        "' (expected mse, pinn, pgnn_reg or pgnn_extrap)");
}

namespace {

VectorXd expand(const VectorXd& w, Index n, const char* name) {
  if (w.size() == 0) return VectorXd::Zero(n);
  if (w.size() == 1) return VectorXd::Constant(n, w(0));
  if (w.size() != n) {
    throw InvalidArgument(std::string(name) + " has " + std::to_string(w.size()) +
                          " entries, expected 1 or " + std::to_string(n));
  }
  return w;
}

}  // namespace

PhysicsKind CostSpec::reference_kind(const PgnnModel& m) const {
  return reference_physics == PhysicsKind::none ? m.physics : reference_physics;
}

bool CostSpec::uses_penalty() const {
  if (variant == CostVariant::mse) return false;
  return (lambda_nn.size() > 0 && !lambda_nn.isZero(0.0)) ||
         (lambda_phy.size() > 0 && !lambda_phy.isZero(0.0));
}

bool CostSpec::uses_data_compliance() const { return variant != CostVariant::mse && c > 0.0; }

bool CostSpec::uses_extrapolation() const {
  return variant != CostVariant::mse && gamma > 0.0 && extrapolation_points.cols() > 0;
}

void CostSpec::validate(const PgnnModel& m) const {
  if (gamma < 0.0 || c < 0.0) throw InvalidArgument("cost: gamma and c must be non-negative");
  if (variant == CostVariant::mse) return;
  const Index n_ref = physics_size(reference_kind(m), m.spec);
  const bool needs_star = uses_data_compliance() || uses_extrapolation() ||
                          (lambda_phy.size() > 0 && !lambda_phy.isZero(0.0));
  if (needs_star && theta_phy_star.size() != n_ref) {
    throw InvalidArgument("cost: reference physics parameters have " +
                          std::to_string(theta_phy_star.size()) + " entries, expected " +
                          std::to_string(n_ref));
  }
  if (variant == CostVariant::pinn) {
    if (c <= 0.0) throw InvalidArgument("cost: pinn requires c > 0");
    if (n_ref == 0) throw InvalidArgument("cost: pinn requires a reference physics family");
  }
  if (variant == CostVariant::pgnn_extrap) {
    if (!(gamma > 0.0)) throw InvalidArgument("cost: pgnn_extrap requires gamma > 0");
    if (extrapolation_points.cols() == 0) {
      throw InvalidArgument("cost: pgnn_extrap requires a nonempty extrapolation set");
    }
  }
  if (extrapolation_points.cols() > 0 && extrapolation_points.rows() != m.spec.size()) {
    throw InvalidArgument("cost: extrapolation points do not match the regressor layout");
  }
  expand(lambda_nn, m.nn_params(), "lambda_nn");
  if (lambda_phy.size() > 1 && m.physics_params() > 0) {
    expand(lambda_phy, m.physics_params(), "lambda_phy");
  }
  if (lambda_phy.size() > 0 && !lambda_phy.isZero(0.0) &&
      (m.physics_params() == 0 || m.physics != reference_kind(m))) {
    throw InvalidArgument("cost: lambda_phy needs a physics layer of the reference family");
  }
}

VectorXd CostSpec::penalty_weights(const PgnnModel& m) const {
  VectorXd w(m.param_count());
  w.head(m.physics_params()) = expand(lambda_phy, m.physics_params(), "lambda_phy");
  w.tail(m.nn_params()) = expand(lambda_nn, m.nn_params(), "lambda_nn");
  return w;
}

VectorXd CostSpec::penalty_centre(const PgnnModel& m) const {
  VectorXd centre = VectorXd::Zero(m.param_count());
  if (m.physics_params() > 0 && theta_phy_star.size() == m.physics_params()) {
    centre.head(m.physics_params()) = theta_phy_star;
  }
  return centre;
}

nlohmann::json to_json(const CostBreakdown& b) {
  return {{"mse", b.mse},
          {"penalty", b.penalty},
          {"data_compliance", b.data_compliance},
          {"extrap_compliance", b.extrap_compliance},
          {"total", b.total}};
}

double cost_mse(const PgnnModel& m, const DataSet& ds) {
  if (ds.size() == 0) throw InvalidArgument("cost_mse: empty data set");
  return (ds.targets.transpose() - predict_batch(m, ds.regressors)).squaredNorm() /
         static_cast<double>(ds.size());
}

double cost_reg(const PgnnModel& m, const CostSpec& spec) {
  if (spec.variant == CostVariant::mse) return 0.0;
  const VectorXd w = spec.penalty_weights(m);
  return (w.array() * (m.flatten() - spec.penalty_centre(m)).array()).matrix().squaredNorm();
}

double cost_phy_compliance(const PgnnModel& m, PhysicsKind reference,
                           const Eigen::Ref<const VectorXd>& theta_phy_star,
                           const Eigen::Ref<const MatrixXd>& points) {
  if (points.cols() == 0) throw InvalidArgument("cost_phy_compliance: no points");
  const MatrixXd basis = physics_features(reference, m.spec, m.ts, points);
  if (basis.rows() != theta_phy_star.size()) {
    throw InvalidArgument("cost_phy_compliance: reference parameter count mismatch");
  }
  const Eigen::RowVectorXd ref = theta_phy_star.transpose() * basis;
  return (ref - predict_batch(m, points)).squaredNorm() / static_cast<double>(points.cols());
}

CostBreakdown cost_breakdown(const PgnnModel& m, const DataSet& ds, const CostSpec& spec) {
  spec.validate(m);
  CostBreakdown b;
  b.mse = cost_mse(m, ds);
  b.total = b.mse;
  if (spec.variant == CostVariant::mse) return b;
  b.penalty = cost_reg(m, spec);
  b.total += b.penalty;
  if (spec.uses_data_compliance()) {
    b.data_compliance =
        cost_phy_compliance(m, spec.reference_kind(m), spec.theta_phy_star, ds.regressors);
    b.total += spec.c * b.data_compliance;
  }
  if (spec.uses_extrapolation()) {
    b.extrap_compliance = cost_phy_compliance(m, spec.reference_kind(m), spec.theta_phy_star,
                                              spec.extrapolation_points);
    b.total += spec.gamma * b.extrap_compliance;
  }
  return b;
}

double total_cost(const PgnnModel& m, const DataSet& ds, const CostSpec& spec) {
  return cost_breakdown(m, ds, spec).total;
}

}  // namespace pgnn
