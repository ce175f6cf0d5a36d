#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "pgnn/data.hpp"
#include "pgnn/neural_net.hpp"

namespace pgnn {

/// Physics layer families. All are linear in their parameters.
///   none    no physics layer
///   linear  theta^T phi over the whole regressor
///   clm     [m, f_v, f_c] on [Delta delta^2 y, Delta delta y, Delta sign(delta y)] at sample k
enum class PhysicsKind { none, linear, clm };

/// Feature map feeding the network, applied before normalization.
///   identity      phi itself
///   clm_features  Delta [y(k), delta y(k), delta^2 y(k)]
///   clm_window    Delta [y(k+2), ..., y(k-2)]
enum class TransformKind { identity, clm_features, clm_window };

std::string to_string(PhysicsKind kind);
std::string to_string(TransformKind kind);
PhysicsKind physics_kind_from_string(const std::string& name);
TransformKind transform_kind_from_string(const std::string& name);

/// Number of physics parameters for the family on the given regressor layout.
Eigen::Index physics_size(PhysicsKind kind, const RegressorSpec& spec);
Eigen::Index transform_size(TransformKind kind, const RegressorSpec& spec);

/// Physics basis, one column per regressor column.
Eigen::MatrixXd physics_features(PhysicsKind kind, const RegressorSpec& spec, double ts,
                                 const Eigen::Ref<const Eigen::MatrixXd>& regressors);
/// Network features before normalization, one column per regressor column.
Eigen::MatrixXd transform_features(TransformKind kind, const RegressorSpec& spec, double ts,
                                   const Eigen::Ref<const Eigen::MatrixXd>& regressors);

/// Sign with sign(0) = 0.
inline double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

/// u_hat(phi) = theta_phy^T T_phy(phi) + f_NN(norm(T(phi))) + offset.
///
/// Flat parameter layout: theta_phy first, then the network parameters in
/// NeuralNet order. `offset` is a fixed constant that is not trained; it holds
/// the network's value at the origin after an equilibrium shift.
struct PgnnModel {
  RegressorSpec spec;
  double ts = 1e-3;
  PhysicsKind physics = PhysicsKind::none;
  Eigen::VectorXd theta_phy;
  TransformKind transform = TransformKind::identity;
  NormalizationRecord normalization;
  NeuralNet<double> nn;
  double offset = 0.0;

  Eigen::Index physics_params() const { return theta_phy.size(); }
  Eigen::Index nn_params() const { return nn.param_count(); }
  Eigen::Index param_count() const { return physics_params() + nn_params(); }
  /// Offset of col(W_{L+1}) in the flat vector.
  Eigen::Index output_layer_offset() const { return physics_params() + nn.output_layer_offset(); }

  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::Ref<const Eigen::VectorXd>& theta);

  void validate() const;
};

/// Model with zero physics parameters and a zero network of the given hidden widths.
/// An empty `hidden` list together with `with_nn == false` gives a physics-only model.
PgnnModel make_model(const RegressorSpec& spec, double ts, PhysicsKind physics,
                     TransformKind transform, const std::vector<Eigen::Index>& hidden,
                     bool with_nn = true);

Eigen::RowVectorXd eval_physics_batch(const PgnnModel& m,
                                      const Eigen::Ref<const Eigen::MatrixXd>& regressors);
/// Physics output with parameters `theta` on the model's basis.
Eigen::RowVectorXd eval_physics_batch(const PgnnModel& m, const Eigen::Ref<const Eigen::VectorXd>& theta,
                                      const Eigen::Ref<const Eigen::MatrixXd>& regressors);
double eval_physics(const PgnnModel& m, const Eigen::Ref<const Eigen::VectorXd>& phi);

/// Normalized network inputs for each regressor column.
Eigen::MatrixXd nn_inputs(const PgnnModel& m, const Eigen::Ref<const Eigen::MatrixXd>& regressors);
Eigen::RowVectorXd eval_nn_batch(const PgnnModel& m,
                                 const Eigen::Ref<const Eigen::MatrixXd>& regressors);

Eigen::RowVectorXd predict_batch(const PgnnModel& m,
                                 const Eigen::Ref<const Eigen::MatrixXd>& regressors);
double predict(const PgnnModel& m, const Eigen::Ref<const Eigen::VectorXd>& phi);

/// d u_hat / d theta, one row per regressor column, in flat parameter order.
Eigen::MatrixXd jacobian_params_batch(const PgnnModel& m,
                                      const Eigen::Ref<const Eigen::MatrixXd>& regressors);
Eigen::VectorXd jacobian_params(const PgnnModel& m, const Eigen::Ref<const Eigen::VectorXd>& phi);

/// Rewrites the network so it reads raw regressors: normalization is folded
/// into the first layer and the transform must be the identity.
NeuralNet<double> raw_input_network(const PgnnModel& m);

/// Moves the network onto another regressor layout. Network inputs are
/// matched by output offset and input lag; columns of the target layout that
/// the source lacks get zero weight. Inputs the target cannot carry must have
/// zero weight already. Requires the identity transform.
NeuralNet<double> remap_network(const NeuralNet<double>& raw_nn, const RegressorSpec& from,
                                const RegressorSpec& to);

nlohmann::json model_to_json(const PgnnModel& m);
PgnnModel model_from_json(const nlohmann::json& j);
void save_model(const std::filesystem::path& path, const PgnnModel& m);
PgnnModel load_model(const std::filesystem::path& path);

nlohmann::json network_to_json(const NeuralNet<double>& nn);
NeuralNet<double> network_from_json(const nlohmann::json& j);

}  // namespace pgnn
