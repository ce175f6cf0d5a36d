#include "pgnn/reference.hpp"

#include <cmath>

#include "pgnn/error.hpp"

namespace pgnn {

using Eigen::Index;
using Eigen::VectorXd;

void MoveProfile::validate() const {
  if (!(v_max > 0.0) || !(a_max > 0.0) || !(j_max > 0.0)) {
    throw InvalidArgument("reference: velocity, acceleration and jerk limits must be positive");
  }
  if (!std::isfinite(start) || !std::isfinite(end) || !std::isfinite(v_max) || !std::isfinite(a_max) ||
      !std::isfinite(j_max)) {
    throw InvalidArgument("reference: non-finite move parameters");
  }
}

namespace {

struct Phases {
  double tj = 0.0;
  double ta = 0.0;
  double ap = 0.0;
};

Phases phases_for(double v, double a, double j) {
  Phases ph;
  if (v * j < a * a) {
    ph.ap = std::sqrt(v * j);
    ph.tj = ph.ap / j;
    ph.ta = 0.0;
  } else {
    ph.ap = a;
    ph.tj = a / j;
    ph.ta = v / a - ph.tj;
  }
  return ph;
}

/// Distance covered by accelerating to v and braking back to rest.
double ramp_distance(double v, double a, double j) {
  const Phases ph = phases_for(v, a, j);
  return v * (2.0 * ph.tj + ph.ta);
}

}  // namespace

JerkProfile plan_move(const MoveProfile& move) {
  move.validate();
  JerkProfile prof;
  prof.start = move.start;
  const double dist = std::abs(move.end - move.start);
  prof.direction = move.end >= move.start ? 1.0 : -1.0;
  prof.jerk = move.j_max;
  if (dist == 0.0) return prof;

  double v = move.v_max;
  if (ramp_distance(v, move.a_max, move.j_max) > dist) {
    double lo = 0.0, hi = v;
    for (int it = 0; it < 200 && hi - lo > 1e-16 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (ramp_distance(mid, move.a_max, move.j_max) > dist ? hi : lo) = mid;
    }
    v = lo;
  }
  const Phases ph = phases_for(v, move.a_max, move.j_max);
  const double tv = std::max(0.0, (dist - ramp_distance(v, move.a_max, move.j_max)) / v);
  prof.peak_velocity = v;
  prof.peak_acceleration = ph.ap;
  prof.durations = {ph.tj, ph.ta, ph.tj, tv, ph.tj, ph.ta, ph.tj};
  return prof;
}

double JerkProfile::duration() const {
  double t = 0.0;
  for (double d : durations) t += d;
  return t;
}

Kinematics JerkProfile::at(double t) const {
  static constexpr std::array<double, 7> kJerkSign{1.0, 0.0, -1.0, 0.0, -1.0, 0.0, 1.0};
  Kinematics s;
  t = std::max(0.0, t);
  bool inside = false;
  for (std::size_t i = 0; i < durations.size(); ++i) {
    const double jk = kJerkSign[i] * jerk;
    const double h = std::min(t, durations[i]);
    s = {s.p + s.v * h + 0.5 * s.a * h * h + jk * h * h * h / 6.0, s.v + s.a * h + 0.5 * jk * h * h,
         s.a + jk * h, jk};
    if (t < durations[i]) {
      inside = true;
      break;
    }
    t -= durations[i];
  }
  if (!inside) s = {s.p, 0.0, 0.0, 0.0};
  return {start + direction * s.p, direction * s.v, direction * s.a, direction * s.j};
}

double ReferenceTrajectory::at(Index k) const {
  if (size() == 0) throw InvalidArgument("reference: empty trajectory");
  if (k < 0) return position(0);
  if (k >= size()) return position(size() - 1);
  return position(k);
}

void ReferenceTrajectory::append(const ReferenceTrajectory& next, bool merge) {
  if (next.size() == 0) return;
  if (size() > 0 && std::abs(next.ts - ts) > 1e-15 * ts) {
    throw InvalidArgument("reference: cannot append trajectories with different sampling times");
  }
  Index skip = 0;
  if (merge && size() > 0 && next.position(0) == position(size() - 1) && next.velocity(0) == 0.0 &&
      velocity(size() - 1) == 0.0) {
    skip = 1;
  }
  const Index n0 = size();
  const Index add = next.size() - skip;
  if (n0 == 0) ts = next.ts;
  const auto grow = [&](VectorXd& dst, const VectorXd& src) {
    dst.conservativeResize(n0 + add);
    dst.tail(add) = src.tail(add);
  };
  grow(position, next.position);
  grow(velocity, next.velocity);
  grow(acceleration, next.acceleration);
  grow(jerk, next.jerk);
}

ReferenceTrajectory make_reference(const MoveProfile& move, double ts, double dwell_before,
                                   double dwell_after) {
  if (!(ts > 0.0)) throw InvalidArgument("reference: sampling time must be positive");
  if (dwell_before < 0.0 || dwell_after < 0.0) throw InvalidArgument("reference: negative dwell");
  const JerkProfile prof = plan_move(move);
  const double total = dwell_before + prof.duration() + dwell_after;
  const Index n = static_cast<Index>(std::ceil(total / ts - 1e-9)) + 1;
  ReferenceTrajectory ref;
  ref.ts = ts;
  ref.position.resize(n);
  ref.velocity.resize(n);
  ref.acceleration.resize(n);
  ref.jerk.resize(n);
  const double t_end = prof.duration();
  for (Index k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * ts - dwell_before;
    Kinematics s;
    if (t <= 0.0) {
      s = {move.start, 0.0, 0.0, 0.0};
    } else if (t >= t_end) {
      s = {move.end, 0.0, 0.0, 0.0};
    } else {
      s = prof.at(t);
    }
    ref.position(k) = s.p;
    ref.velocity(k) = s.v;
    ref.acceleration(k) = s.a;
    ref.jerk(k) = s.j;
  }
  return ref;
}

ReferenceTrajectory make_sequence(const std::vector<MoveProfile>& moves, double ts, double dwell_before,
                                  double dwell) {
  ReferenceTrajectory out;
  out.ts = ts;
  for (std::size_t i = 0; i < moves.size(); ++i) {
    MoveProfile m = moves[i];
    if (out.size() > 0) m.start = out.position(out.size() - 1);
    out.append(make_reference(m, ts, i == 0 ? dwell_before : 0.0, dwell));
  }
  return out;
}

ReferenceTrajectory repeat(const ReferenceTrajectory& ref, int count) {
  if (count < 0) throw InvalidArgument("reference: negative repeat count");
  ReferenceTrajectory out;
  out.ts = ref.ts;
  for (int i = 0; i < count; ++i) out.append(ref, false);
  return out;
}

ReferenceTrajectory constant_reference(double value, Index n, double ts) {
  ReferenceTrajectory ref;
  ref.ts = ts;
  ref.position = VectorXd::Constant(n, value);
  ref.velocity = VectorXd::Zero(n);
  ref.acceleration = VectorXd::Zero(n);
  ref.jerk = VectorXd::Zero(n);
  return ref;
}

nlohmann::json to_json(const MoveProfile& move) {
  return {{"start", move.start}, {"end", move.end}, {"v_max", move.v_max}, {"a_max", move.a_max},
          {"j_max", move.j_max}};
}

}  // namespace pgnn
