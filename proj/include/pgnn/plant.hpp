#pragma once

#include <Eigen/Dense>

#include <string>

#include <json.hpp>

namespace pgnn {

enum class PlantKind { clm_synthetic, rotating_translating };

std::string to_string(PlantKind kind);
PlantKind plant_kind_from_string(const std::string& name);

/// Mass with viscous and Coulomb friction plus a position-periodic force:
///   m x'' = u - f_v x' - f_c sign(x') - amplitude sin(2 pi x / pitch),  y = x
struct ClmParams {
  double m = 20.0;
  double f_v = 20.0;
  double f_c = 10.0;
  double amplitude = 1.0;
  double pitch = 0.05;
};

/// Translating and rotating mass with force input and position output on
/// opposite sides of the centre of mass:
///   M theta'' = l_y (u - g(y)) - 2 l_x (d theta' + k theta)
///   m x''     = u - f_v x' - g(y)
///   g(y)      = c sin(2 pi y / l_m),  y = x - l_y theta
struct RotatingParams {
  double m = 20.0;
  double l_x = 1.0;
  double l_y = 1.0;
  double M = 40.0 / 3.0;
  double f_v = 50.0;
  double k = 25e3 / 3.0;
  double d = 575.0 / 3.0;
  double l_m = 0.05;
  double c = 1.0;

  /// Inertia from the geometry, M = m (l_x^2 + l_y^2) / 3.
  static RotatingParams from_geometry(double m, double l_x, double l_y);
};

/// Continuous plant sampled under zero-order hold. Each sampling interval is
/// integrated with fixed-step RK4 over `substeps` substeps.
class Plant {
 public:
  static Plant clm(const ClmParams& p, double ts);
  static Plant rotating(const RotatingParams& p, double ts);

  PlantKind kind() const { return kind_; }
  double ts() const { return ts_; }
  int substeps() const { return substeps_; }
  const ClmParams& clm_params() const { return clm_; }
  const RotatingParams& rotating_params() const { return rot_; }

  Eigen::Index state_size() const { return kind_ == PlantKind::clm_synthetic ? 2 : 4; }
  const Eigen::VectorXd& state() const { return state_; }
  void set_state(const Eigen::Ref<const Eigen::VectorXd>& x);
  void reset() { state_.setZero(); }

  /// Sampled position output at the current state.
  double output() const;
  /// Holds u over one interval and returns the output at the end of it.
  double step(double u);

  Eigen::VectorXd derivative(const Eigen::Ref<const Eigen::VectorXd>& x, double u) const;

  /// Continuous linear part (nonlinear terms dropped): x' = A x + B u, y = C x.
  void linear_model(Eigen::MatrixXd& a, Eigen::VectorXd& b, Eigen::RowVectorXd& c) const;

 private:
  Plant(PlantKind kind, double ts);

  PlantKind kind_;
  double ts_;
  int substeps_ = 10;
  ClmParams clm_;
  RotatingParams rot_;
  Eigen::VectorXd state_;
};

/// Exact ZOH discretization of x' = A x + B u via the matrix exponential.
void zoh_discretize(const Eigen::Ref<const Eigen::MatrixXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b,
                    double ts, Eigen::MatrixXd& ad, Eigen::VectorXd& bd);

nlohmann::json to_json(const Plant& p);

}  // namespace pgnn
