#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "pgnn/data.hpp"

namespace pgnn {

/// Quantity measured along an operating-region axis, all evaluated at sample k.
enum class AxisKind { position, velocity, acceleration };

std::string to_string(AxisKind kind);
AxisKind axis_kind_from_string(const std::string& name);

struct RegionAxis {
  std::string name;
  AxisKind kind = AxisKind::position;
  double lo = 0.0;
  double hi = 1.0;
  int resolution = 2;
};

/// Box of operating conditions with a uniform candidate grid per axis.
struct OperatingRegion {
  std::vector<RegionAxis> axes;

  Eigen::Index dims() const { return static_cast<Eigen::Index>(axes.size()); }
  Eigen::Index grid_size() const;
  /// Grid points, one per column. The first axis varies slowest, so column
  /// order is lexicographic with the first axis most significant.
  Eigen::MatrixXd grid() const;
  Eigen::VectorXd widths() const;
  bool contains(const Eigen::Ref<const Eigen::VectorXd>& point) const;
  void validate() const;
};

nlohmann::json to_json(const OperatingRegion& region);

/// Min over pool columns of the squared distance to `candidate`. Throws on an empty pool.
double objective_c(const Eigen::Ref<const Eigen::VectorXd>& candidate,
                   const Eigen::Ref<const Eigen::MatrixXd>& pool);
/// Same with two pools (data points and already selected points).
double objective_c(const Eigen::Ref<const Eigen::VectorXd>& candidate,
                   const Eigen::Ref<const Eigen::MatrixXd>& data_points,
                   const Eigen::Ref<const Eigen::MatrixXd>& selected);

/// Region coordinates of regressors (one column each).
Eigen::MatrixXd project_regressors(const OperatingRegion& region, const RegressorSpec& spec,
                                   double ts, const Eigen::Ref<const Eigen::MatrixXd>& regressors);

/// Full regressors for region points: outputs follow the constant-acceleration
/// trajectory through the point (unlisted quantities are zero), past inputs are zero.
Eigen::MatrixXd lift_points(const OperatingRegion& region, const RegressorSpec& spec, double ts,
                            const Eigen::Ref<const Eigen::MatrixXd>& points);

struct ExtrapolationSet {
  /// Selected points in region coordinates, one per column, in selection order.
  Eigen::MatrixXd points;
  /// Objective value at selection time (normalized coordinates).
  std::vector<double> objective;
  std::vector<Eigen::Index> grid_index;

  Eigen::Index size() const { return points.cols(); }
};

/// Greedy farthest-point selection over the region grid. Distances use
/// coordinates divided by the axis width (hi - lo). Stops after `max_points`
/// or when the best objective is <= eps. Ties go to the lowest grid index.
ExtrapolationSet generate_ze(const OperatingRegion& region,
                             const Eigen::Ref<const Eigen::MatrixXd>& data_points,
                             Eigen::Index max_points, double eps);

void write_ze_csv(std::ostream& out, const OperatingRegion& region, const ExtrapolationSet& ze);
nlohmann::json to_json(const ExtrapolationSet& ze);

}  // namespace pgnn
