#include "pgnn/feedback.hpp"

#include <numbers>

#include "pgnn/error.hpp"
#include "pgnn/plant.hpp"

namespace pgnn {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double TransferFunction::dc_gain() const {
  if (den.size() == 0 || num.size() == 0) throw InvalidArgument("transfer function: empty coefficients");
  return num(num.size() - 1) / den(den.size() - 1);
}

FeedbackLaw::FeedbackLaw(const TransferFunction& tf, double ts) : tf_(tf), ts_(ts) {
  if (!(ts > 0.0)) throw InvalidArgument("feedback: sampling time must be positive");
  if (tf.den.size() == 0 || tf.den(0) == 0.0) throw InvalidArgument("feedback: leading denominator coefficient is zero");
  if (tf.num.size() > tf.den.size()) throw InvalidArgument("feedback: transfer function is improper");
  const Index n = tf.den.size() - 1;
  const VectorXd den = tf.den / tf.den(0);
  VectorXd num = VectorXd::Zero(n + 1);
  num.tail(tf.num.size()) = tf.num / tf.den(0);
  // Split off the direct feedthrough, leaving a strictly proper remainder.
  d_ = num(0);
  const VectorXd rest = num.tail(n) - d_ * den.tail(n);
  MatrixXd a = MatrixXd::Zero(n, n);
  VectorXd b = VectorXd::Zero(n);
  if (n > 0) {
    a.row(0) = -den.tail(n).transpose();
    a.bottomLeftCorner(n - 1, n - 1).setIdentity();
    b(0) = 1.0;
  }
  c_ = rest.transpose();
  zoh_discretize(a, b, ts, ad_, bd_);
  state_ = VectorXd::Zero(n);
}

double FeedbackLaw::step(double e) {
  const double u = (c_ * state_).value() + d_ * e;
  state_ = ad_ * state_ + bd_ * e;
  return u;
}

double FeedbackLaw::dc_gain() const {
  const Index n = ad_.rows();
  if (n == 0) return d_;
  const MatrixXd i_minus_a = MatrixXd::Identity(n, n) - ad_;
  return (c_ * i_minus_a.fullPivLu().solve(bd_)).value() + d_;
}

TransferFunction clm_feedback_tf() {
  TransferFunction tf;
  tf.num = (VectorXd(3) << 1.056e8, 2.282e9, 7.884e9).finished();
  tf.den = (VectorXd(4) << 1.0, 547.4, 7.643e4, -0.0001669).finished();
  return tf;
}

TransferFunction rotating_feedback_tf() {
  constexpr double pi = std::numbers::pi;
  TransferFunction tf;
  tf.num = (VectorXd(2) << 5e3, 5e3 * 4.0 * pi).finished();
  tf.den = (VectorXd(2) << 1.0, 20.0 * pi).finished();
  return tf;
}

nlohmann::json to_json(const TransferFunction& tf) {
  return {{"num", std::vector<double>(tf.num.data(), tf.num.data() + tf.num.size())},
          {"den", std::vector<double>(tf.den.data(), tf.den.data() + tf.den.size())}};
}

}  // namespace pgnn
