#include "pgnn/plant.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <numbers>

#include "pgnn/error.hpp"
#include "pgnn/model.hpp"

namespace pgnn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string to_string(PlantKind kind) {
  return kind == PlantKind::clm_synthetic ? "clm_synthetic" : "rotating_translating";
}

PlantKind plant_kind_from_string(const std::string& name) {
  if (name == "clm_synthetic") return PlantKind::clm_synthetic;
  if (name == "rotating_translating") return PlantKind::rotating_translating;
  throw InvalidArgument("unknown plant kind '" + name +
                        "' (expected clm_synthetic or rotating_translating)");
}

RotatingParams RotatingParams::from_geometry(double m, double l_x, double l_y) {
  RotatingParams p;
  p.m = m;
  p.l_x = l_x;
  p.l_y = l_y;
  p.M = m * (l_x * l_x + l_y * l_y) / 3.0;
  return p;
}

Plant::Plant(PlantKind kind, double ts) : kind_(kind), ts_(ts) {
  if (!(ts > 0.0)) throw InvalidArgument("plant: sampling time must be positive");
  state_ = VectorXd::Zero(state_size());
}

Plant Plant::clm(const ClmParams& p, double ts) {
  if (!(p.m > 0.0) || p.f_v < 0.0 || p.f_c < 0.0 || !(p.pitch > 0.0)) {
    throw InvalidArgument("clm plant: m and pitch must be positive, friction non-negative");
  }
  Plant out(PlantKind::clm_synthetic, ts);
  out.clm_ = p;
  return out;
}

Plant Plant::rotating(const RotatingParams& p, double ts) {
  if (!(p.m > 0.0) || !(p.M > 0.0) || !(p.l_m > 0.0)) {
    throw InvalidArgument("rotating plant: m, M and l_m must be positive");
  }
  Plant out(PlantKind::rotating_translating, ts);
  out.rot_ = p;
  return out;
}

void Plant::set_state(const Eigen::Ref<const VectorXd>& x) {
  if (x.size() != state_size()) throw InvalidArgument("plant: state size mismatch");
  state_ = x;
}

double Plant::output() const {
  if (kind_ == PlantKind::clm_synthetic) return state_(0);
  return state_(0) - rot_.l_y * state_(2);
}

VectorXd Plant::derivative(const Eigen::Ref<const VectorXd>& x, double u) const {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  VectorXd dx(x.size());
  if (kind_ == PlantKind::clm_synthetic) {
    const auto& p = clm_;
    dx(0) = x(1);
    dx(1) = (u - p.f_v * x(1) - p.f_c * sign0(x(1)) - p.amplitude * std::sin(two_pi * x(0) / p.pitch)) / p.m;
    return dx;
  }
  const auto& p = rot_;
  const double y = x(0) - p.l_y * x(2);
  const double g = p.c * std::sin(two_pi * y / p.l_m);
  dx(0) = x(1);
  dx(1) = (u - p.f_v * x(1) - g) / p.m;
  dx(2) = x(3);
  dx(3) = (p.l_y * (u - g) - 2.0 * p.l_x * (p.d * x(3) + p.k * x(2))) / p.M;
  return dx;
}

double Plant::step(double u) {
  if (!std::isfinite(u)) throw Diverged("plant: non-finite input");
  const double h = ts_ / substeps_;
  VectorXd x = state_;
  for (int i = 0; i < substeps_; ++i) {
    const VectorXd k1 = derivative(x, u);
    const VectorXd k2 = derivative(x + 0.5 * h * k1, u);
    const VectorXd k3 = derivative(x + 0.5 * h * k2, u);
    const VectorXd k4 = derivative(x + h * k3, u);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  if (!x.allFinite()) throw Diverged("plant: non-finite state");
  state_ = x;
  return output();
}

void Plant::linear_model(MatrixXd& a, VectorXd& b, Eigen::RowVectorXd& c) const {
  if (kind_ == PlantKind::clm_synthetic) {
    a = MatrixXd::Zero(2, 2);
    a(0, 1) = 1.0;
    a(1, 1) = -clm_.f_v / clm_.m;
    b = VectorXd::Zero(2);
    b(1) = 1.0 / clm_.m;
    c = Eigen::RowVectorXd::Zero(2);
    c(0) = 1.0;
    return;
  }
  const auto& p = rot_;
  a = MatrixXd::Zero(4, 4);
  a(0, 1) = 1.0;
  a(1, 1) = -p.f_v / p.m;
  a(2, 3) = 1.0;
  a(3, 2) = -2.0 * p.l_x * p.k / p.M;
  a(3, 3) = -2.0 * p.l_x * p.d / p.M;
  b = VectorXd::Zero(4);
  b(1) = 1.0 / p.m;
  b(3) = p.l_y / p.M;
  c = Eigen::RowVectorXd::Zero(4);
  c(0) = 1.0;
  c(2) = -p.l_y;
}

void zoh_discretize(const Eigen::Ref<const MatrixXd>& a, const Eigen::Ref<const VectorXd>& b, double ts,
                    MatrixXd& ad, VectorXd& bd) {
  const Eigen::Index n = a.rows();
  MatrixXd aug = MatrixXd::Zero(n + 1, n + 1);
  aug.topLeftCorner(n, n) = a * ts;
  aug.topRightCorner(n, 1) = b * ts;
  const MatrixXd e = aug.exp();
  ad = e.topLeftCorner(n, n);
  bd = e.topRightCorner(n, 1);
}

nlohmann::json to_json(const Plant& p) {
  nlohmann::json j{{"kind", to_string(p.kind())}, {"ts", p.ts()}, {"substeps", p.substeps()}};
  if (p.kind() == PlantKind::clm_synthetic) {
    const auto& c = p.clm_params();
    j["params"] = {{"m", c.m}, {"f_v", c.f_v}, {"f_c", c.f_c}, {"amplitude", c.amplitude}, {"pitch", c.pitch}};
  } else {
    const auto& r = p.rotating_params();
    j["params"] = {{"m", r.m}, {"l_x", r.l_x}, {"l_y", r.l_y}, {"M", r.M}, {"f_v", r.f_v},
                   {"k", r.k}, {"d", r.d}, {"l_m", r.l_m}, {"c", r.c}};
  }
  return j;
}

}  // namespace pgnn
