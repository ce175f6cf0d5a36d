#pragma once

#include <Eigen/Dense>

#include <array>
#include <vector>

#include <json.hpp>

namespace pgnn {

/// Point-to-point move with kinematic limits.
struct MoveProfile {
  double start = 0.0;
  double end = 0.0;
  double v_max = 0.1;
  double a_max = 1.0;
  double j_max = 1000.0;

  void validate() const;
};

struct Kinematics {
  double p = 0.0;
  double v = 0.0;
  double a = 0.0;
  double j = 0.0;
};

/// Seven-phase jerk-limited profile: jerk up, constant acceleration, jerk
/// down, cruise, and the mirrored deceleration. When the move is too short
/// to reach v_max the cruise speed is lowered by bisection.
struct JerkProfile {
  double start = 0.0;
  double direction = 1.0;
  double jerk = 0.0;
  double peak_velocity = 0.0;
  double peak_acceleration = 0.0;
  std::array<double, 7> durations{};

  double duration() const;
  /// Exact kinematics at time t from the start of the move (clamped to the move).
  Kinematics at(double t) const;
};

JerkProfile plan_move(const MoveProfile& move);

/// Sampled reference. Reads outside the samples return the first or the
/// terminal setpoint, which serves as preview padding.
struct ReferenceTrajectory {
  double ts = 1e-3;
  Eigen::VectorXd position;
  Eigen::VectorXd velocity;
  Eigen::VectorXd acceleration;
  Eigen::VectorXd jerk;

  Eigen::Index size() const { return position.size(); }
  double at(Eigen::Index k) const;
  /// Appends `next`. With `merge`, its first sample is dropped when it
  /// repeats the last one at rest.
  void append(const ReferenceTrajectory& next, bool merge = true);
};

/// Samples one move at k * ts with dwell segments before and after it.
ReferenceTrajectory make_reference(const MoveProfile& move, double ts, double dwell_before = 0.0,
                                   double dwell_after = 0.0);
/// Moves executed one after another, each followed by `dwell` seconds at rest.
/// Each move starts where the previous one ended.
ReferenceTrajectory make_sequence(const std::vector<MoveProfile>& moves, double ts, double dwell_before,
                                  double dwell);
/// `count` back-to-back copies; the length is exactly count * ref.size().
ReferenceTrajectory repeat(const ReferenceTrajectory& ref, int count);
/// Constant reference of n samples.
ReferenceTrajectory constant_reference(double value, Eigen::Index n, double ts);

nlohmann::json to_json(const MoveProfile& move);

}  // namespace pgnn
