#pragma once

#include <Eigen/Dense>

#include <string>

#include <json.hpp>

#include "pgnn/data.hpp"
#include "pgnn/model.hpp"

namespace pgnn {

/// Which identification cost is minimized.
///   mse          data fit only; every other weight is ignored
///   pinn         data fit + c * compliance on the data regressors (+ optional penalties)
///   pgnn_reg     data fit + weighted parameter penalty (+ optional compliance terms)
///   pgnn_extrap  pgnn_reg + gamma * compliance on the extrapolation set
enum class CostVariant { mse, pinn, pgnn_reg, pgnn_extrap };

std::string to_string(CostVariant v);
CostVariant cost_variant_from_string(const std::string& name);

/// Weights of the identification cost. Penalty weights are diagonals; an
/// empty vector means zero weight and a single entry is broadcast.
struct CostSpec {
  CostVariant variant = CostVariant::mse;
  Eigen::VectorXd lambda_nn;
  Eigen::VectorXd lambda_phy;
  double gamma = 0.0;
  double c = 0.0;
  /// Reference physics for the penalty and compliance terms. Compliance uses
  /// `reference_physics` on the model's regressor layout; `none` means "the
  /// model's own physics family".
  Eigen::VectorXd theta_phy_star;
  PhysicsKind reference_physics = PhysicsKind::none;
  /// Extrapolation regressors, one per column, in the model's regressor layout.
  Eigen::MatrixXd extrapolation_points;

  void validate(const PgnnModel& m) const;
  /// Physics family used for compliance with model `m`.
  PhysicsKind reference_kind(const PgnnModel& m) const;
  /// Diagonal penalty weights expanded to the model's flat parameter layout.
  Eigen::VectorXd penalty_weights(const PgnnModel& m) const;
  /// Penalty centre [theta_phy_star; 0] in the flat layout.
  Eigen::VectorXd penalty_centre(const PgnnModel& m) const;
  bool uses_penalty() const;
  bool uses_data_compliance() const;
  bool uses_extrapolation() const;
};

/// Diagonal with constant value `lambda` of length n.
inline Eigen::VectorXd uniform_weights(Eigen::Index n, double lambda) {
  return Eigen::VectorXd::Constant(n, lambda);
}

struct CostBreakdown {
  double mse = 0.0;
  double penalty = 0.0;
  double data_compliance = 0.0;    // unweighted mean squared deviation on the data
  double extrap_compliance = 0.0;  // unweighted mean squared deviation on Z^E
  double total = 0.0;
};

nlohmann::json to_json(const CostBreakdown& b);

double cost_mse(const PgnnModel& m, const DataSet& ds);
double cost_reg(const PgnnModel& m, const CostSpec& spec);
/// Mean squared deviation between the reference physics and the model output.
double cost_phy_compliance(const PgnnModel& m, PhysicsKind reference,
                           const Eigen::Ref<const Eigen::VectorXd>& theta_phy_star,
                           const Eigen::Ref<const Eigen::MatrixXd>& points);
CostBreakdown cost_breakdown(const PgnnModel& m, const DataSet& ds, const CostSpec& spec);
double total_cost(const PgnnModel& m, const DataSet& ds, const CostSpec& spec);

}  // namespace pgnn
