#pragma once

#include <Eigen/Dense>

#include <json.hpp>

namespace pgnn {

/// Proper continuous transfer function with coefficients in descending powers of s.
struct TransferFunction {
  Eigen::VectorXd num;
  Eigen::VectorXd den;

  /// Value at s = 0.
  double dc_gain() const;
};

/// Controller u(k) = C(q) e(k): a controllable-canonical realization of a
/// continuous transfer function discretized under zero-order hold.
class FeedbackLaw {
 public:
  FeedbackLaw() = default;
  FeedbackLaw(const TransferFunction& tf, double ts);

  const TransferFunction& transfer_function() const { return tf_; }
  double ts() const { return ts_; }
  const Eigen::MatrixXd& a() const { return ad_; }
  const Eigen::VectorXd& b() const { return bd_; }
  const Eigen::RowVectorXd& c() const { return c_; }
  double d() const { return d_; }

  /// Output for error e; advances the state.
  double step(double e);
  void reset() { state_.setZero(); }
  /// Gain of the discrete realization at z = 1.
  double dc_gain() const;

 private:
  TransferFunction tf_;
  double ts_ = 0.0;
  Eigen::MatrixXd ad_;
  Eigen::VectorXd bd_;
  Eigen::RowVectorXd c_;
  double d_ = 0.0;
  Eigen::VectorXd state_;
};

/// Loopshaped controller of the linear motor (third order).
TransferFunction clm_feedback_tf();
/// Lead filter 5e3 (s + 4 pi) / (s + 20 pi) for the rotating-translating mass.
TransferFunction rotating_feedback_tf();

nlohmann::json to_json(const TransferFunction& tf);

}  // namespace pgnn
