#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pgnn/cost.hpp"
#include "pgnn/data.hpp"
#include "pgnn/model.hpp"
#include "pgnn/stability.hpp"

namespace pgnn {

struct TrainConfig {
  int restarts = 10;
  int max_epochs = 200;
  double damping_init = 1e-3;
  double damping_raise = 10.0;
  double damping_lower = 0.5;
  /// Stop when the relative decrease of an accepted step falls below this.
  double min_relative_decrease = 1e-9;
  /// Stop when the gradient infinity norm falls below this.
  double gradient_tolerance = 1e-8;
  /// Epochs without validation improvement before stopping; 0 disables.
  int patience = 20;
  std::uint64_t seed = 0;
  /// Keep theta_phy at its current value.
  bool freeze_physics = false;
  /// Train the compliance reference parameters together with the model (pinn only).
  bool cotrain_reference = false;
  /// Start from the model's current parameters instead of a random network.
  bool warm_start = false;
  /// Fit the input normalization on the training set before training.
  bool fit_normalization = true;
  /// Worker threads for restarts; 0 uses the hardware concurrency.
  int threads = 0;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_cost = 0.0;
  double val_cost = 0.0;
  double damping = 0.0;
};

struct RestartRecord {
  int index = 0;
  bool diverged = false;
  std::string stop_reason;
  std::vector<EpochRecord> trace;
  int best_epoch = 0;
  double initial_cost = 0.0;
  double best_train_cost = 0.0;
  double best_val_cost = 0.0;
  Eigen::VectorXd theta;
  Eigen::VectorXd reference_theta;
};

struct TrainReport {
  PgnnModel model;
  CostBreakdown breakdown;
  double val_cost = 0.0;
  int selected_restart = -1;
  std::vector<RestartRecord> restarts;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  /// Compliance reference after co-training (equal to theta_phy_star otherwise).
  Eigen::VectorXd reference_theta;
  std::optional<double> iss_margin;
};

nlohmann::json to_json(const TrainReport& report);
/// One row per (restart, epoch) with train and validation cost.
void write_trace_csv(std::ostream& out, const TrainReport& report);

/// Which parameters form the linear block solved in closed form.
struct LipBlock {
  bool output_weights = true;
  bool output_bias = true;
  bool physics = true;
};

/// Exact least-squares solution of the cost for the block
/// [col(W_{L+1}); B_{L+1}; theta_phy] with every other parameter fixed.
/// Throws IllConditioned when the Jacobi-scaled normal matrix has condition
/// above 1e12. Returns the updated model.
PgnnModel optimized_lip_selection(const PgnnModel& m, const DataSet& ds, const CostSpec& spec,
                                  const LipBlock& block = {});

/// Condition estimate of the (Jacobi-scaled) normal matrix used above.
double lip_selection_condition(const PgnnModel& m, const DataSet& ds, const CostSpec& spec,
                               const LipBlock& block = {});

struct PhysicsFit {
  Eigen::VectorXd theta;
  Eigen::VectorXd std_error;
  double mse = 0.0;
  double condition = 0.0;
  Eigen::Index samples = 0;
};

/// Least-squares physics parameters (QR on column-scaled features).
/// Throws IllConditioned when the scaled design has condition above 1e12.
PhysicsFit fit_physics(PhysicsKind kind, const DataSet& ds);
nlohmann::json to_json(const PhysicsFit& fit);

/// Penalty diagonal that makes a relative deviation of sqrt(eps) in every
/// physics parameter cost as much as the physics model's residual MSE.
Eigen::VectorXd lambda_phy_rule(PhysicsKind kind, const DataSet& ds,
                                const Eigen::Ref<const Eigen::VectorXd>& theta_phy_star,
                                double eps);

/// Fits the normalization of the network inputs on `ds`.
void fit_input_normalization(PgnnModel& m, const DataSet& ds);

/// Levenberg-Marquardt training with restarts, early stopping and optional
/// constraint projection. Throws Diverged when every restart diverged.
TrainReport train(const PgnnModel& init, const DataSet& train_set, const DataSet& val_set,
                  const CostSpec& spec, const TrainConfig& cfg,
                  const std::optional<ThetaConstraint>& constraint = std::nullopt);

struct LCurvePoint {
  double lambda = 0.0;
  double mse = 0.0;
  /// Squared norm of the network parameters (penalty with unit weight).
  double penalty_unit = 0.0;
  double total = 0.0;
};

/// Trains for each lambda (network penalty lambda * I) in increasing order,
/// warm-starting every value from the previous result.
std::vector<LCurvePoint> sweep_lambda(const PgnnModel& init, const DataSet& train_set,
                                      const DataSet& val_set, const CostSpec& base,
                                      const std::vector<double>& grid, const TrainConfig& cfg);

/// `count` values spaced logarithmically over [lo, hi].
std::vector<double> log_grid(double lo, double hi, int count);

}  // namespace pgnn
