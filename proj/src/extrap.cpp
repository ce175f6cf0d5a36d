#include "pgnn/extrap.hpp"

#include <limits>
#include <ostream>

#include "pgnn/error.hpp"

namespace pgnn {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string to_string(AxisKind kind) {
  switch (kind) {
    case AxisKind::position: return "position";
    case AxisKind::velocity: return "velocity";
    case AxisKind::acceleration: return "acceleration";
  }
  return "position";
}

AxisKind axis_kind_from_string(const std::string& name) {
  if (name == "position") return AxisKind::position;
  if (name == "velocity") return AxisKind::velocity;
  if (name == "acceleration") return AxisKind::acceleration;
  throw InvalidArgument("unknown axis kind '" + name +
                        "' (expected position, velocity or acceleration)");
}

void OperatingRegion::validate() const {
  if (axes.empty()) throw InvalidArgument("operating region: no axes");
  for (const auto& a : axes) {
    if (!(a.hi > a.lo)) throw InvalidArgument("operating region: axis '" + a.name + "' is empty");
    if (a.resolution < 2) {
      throw InvalidArgument("operating region: axis '" + a.name + "' needs resolution >= 2");
    }
  }
}

Index OperatingRegion::grid_size() const {
  Index n = 1;
  for (const auto& a : axes) n *= a.resolution;
  return n;
}

MatrixXd OperatingRegion::grid() const {
  validate();
  const Index d = dims();
  const Index g = grid_size();
  MatrixXd out(d, g);
  for (Index col = 0; col < g; ++col) {
    Index rem = col;
    for (Index ax = d - 1; ax >= 0; --ax) {
      const auto& a = axes[static_cast<std::size_t>(ax)];
      const Index i = rem % a.resolution;
      rem /= a.resolution;
      out(ax, col) = a.lo + (a.hi - a.lo) * static_cast<double>(i) / (a.resolution - 1);
    }
  }
  return out;
}

VectorXd OperatingRegion::widths() const {
  VectorXd w(dims());
  for (Index i = 0; i < dims(); ++i) {
    w(i) = axes[static_cast<std::size_t>(i)].hi - axes[static_cast<std::size_t>(i)].lo;
  }
  return w;
}

bool OperatingRegion::contains(const Eigen::Ref<const VectorXd>& point) const {
  if (point.size() != dims()) return false;
  for (Index i = 0; i < dims(); ++i) {
    const auto& a = axes[static_cast<std::size_t>(i)];
    if (point(i) < a.lo || point(i) > a.hi) return false;
  }
  return true;
}

nlohmann::json to_json(const OperatingRegion& region) {
  nlohmann::json axes = nlohmann::json::array();
  for (const auto& a : region.axes) {
    axes.push_back({{"name", a.name},
                    {"kind", to_string(a.kind)},
                    {"lo", a.lo},
                    {"hi", a.hi},
                    {"resolution", a.resolution}});
  }
  return {{"axes", axes}, {"distance_scaling", "axis width"}};
}

double objective_c(const Eigen::Ref<const VectorXd>& candidate,
                   const Eigen::Ref<const MatrixXd>& pool) {
  if (pool.cols() == 0) throw InvalidArgument("objective_c: empty point pool");
  if (pool.rows() != candidate.size()) throw InvalidArgument("objective_c: dimension mismatch");
  return (pool.colwise() - candidate).colwise().squaredNorm().minCoeff();
}

double objective_c(const Eigen::Ref<const VectorXd>& candidate,
                   const Eigen::Ref<const MatrixXd>& data_points,
                   const Eigen::Ref<const MatrixXd>& selected) {
  if (data_points.cols() + selected.cols() == 0) {
    throw InvalidArgument("objective_c: empty point pool");
  }
  double best = std::numeric_limits<double>::infinity();
  if (data_points.cols() > 0) best = objective_c(candidate, data_points);
  if (selected.cols() > 0) best = std::min(best, objective_c(candidate, selected));
  return best;
}

namespace {

int output_row(const RegressorSpec& spec, int offset) {
  const auto row = spec.output_index(offset);
  if (!row) {
    throw InvalidArgument("operating region: regressor lacks y(k" +
                          std::string(offset >= 0 ? "+" : "") + std::to_string(offset) + ")");
  }
  return *row;
}

}  // namespace

MatrixXd project_regressors(const OperatingRegion& region, const RegressorSpec& spec, double ts,
                            const Eigen::Ref<const MatrixXd>& regressors) {
  region.validate();
  if (regressors.rows() != spec.size()) {
    throw InvalidArgument("project_regressors: regressor width does not match spec");
  }
  MatrixXd out(region.dims(), regressors.cols());
  for (Index ax = 0; ax < region.dims(); ++ax) {
    switch (region.axes[static_cast<std::size_t>(ax)].kind) {
      case AxisKind::position:
        out.row(ax) = regressors.row(output_row(spec, 0));
        break;
      case AxisKind::velocity:
        out.row(ax) = (regressors.row(output_row(spec, 1)) - regressors.row(output_row(spec, -1))) /
                      (2.0 * ts);
        break;
      case AxisKind::acceleration:
        out.row(ax) = (regressors.row(output_row(spec, 2)) - 2.0 * regressors.row(output_row(spec, 0)) +
                       regressors.row(output_row(spec, -2))) /
                      (4.0 * ts * ts);
        break;
    }
  }
  return out;
}

MatrixXd lift_points(const OperatingRegion& region, const RegressorSpec& spec, double ts,
                     const Eigen::Ref<const MatrixXd>& points) {
  region.validate();
  if (points.rows() != region.dims()) throw InvalidArgument("lift_points: dimension mismatch");
  MatrixXd out = MatrixXd::Zero(spec.size(), points.cols());
  for (Index c = 0; c < points.cols(); ++c) {
    double p = 0.0, v = 0.0, a = 0.0;
    for (Index ax = 0; ax < region.dims(); ++ax) {
      switch (region.axes[static_cast<std::size_t>(ax)].kind) {
        case AxisKind::position: p = points(ax, c); break;
        case AxisKind::velocity: v = points(ax, c); break;
        case AxisKind::acceleration: a = points(ax, c); break;
      }
    }
    for (int i = 0; i <= spec.na; ++i) {
      const double t = static_cast<double>(spec.nk + 1 - i) * ts;
      out(i, c) = p + v * t + 0.5 * a * t * t;
    }
  }
  return out;
}

ExtrapolationSet generate_ze(const OperatingRegion& region,
                             const Eigen::Ref<const MatrixXd>& data_points, Index max_points,
                             double eps) {
  region.validate();
  if (data_points.cols() > 0 && data_points.rows() != region.dims()) {
    throw InvalidArgument("generate_ze: data points do not match the region dimension");
  }
  if (max_points < 0) throw InvalidArgument("generate_ze: max_points must be >= 0");
  const VectorXd inv_w = region.widths().cwiseInverse();
  const MatrixXd grid = region.grid();
  const MatrixXd grid_n = inv_w.asDiagonal() * grid;
  const Index g = grid.cols();

  VectorXd best = VectorXd::Constant(g, std::numeric_limits<double>::infinity());
  constexpr Index kChunk = 8192;
  for (Index start = 0; start < data_points.cols(); start += kChunk) {
    const Index len = std::min(kChunk, data_points.cols() - start);
    const MatrixXd pts = inv_w.asDiagonal() * data_points.middleCols(start, len);
    for (Index i = 0; i < g; ++i) {
      best(i) = std::min(best(i), (pts.colwise() - grid_n.col(i)).colwise().squaredNorm().minCoeff());
    }
  }

  ExtrapolationSet out;
  std::vector<Index> picked;
  while (static_cast<Index>(picked.size()) < max_points) {
    Index arg = 0;
    for (Index i = 1; i < g; ++i) {
      if (best(i) > best(arg)) arg = i;
    }
    const double value = best(arg);
    if (!(value > eps)) break;
    picked.push_back(arg);
    out.objective.push_back(value);
    out.grid_index.push_back(arg);
    best = best.cwiseMin((grid_n.colwise() - grid_n.col(arg)).colwise().squaredNorm().transpose());
  }
  out.points.resize(region.dims(), static_cast<Index>(picked.size()));
  for (std::size_t k = 0; k < picked.size(); ++k) {
    out.points.col(static_cast<Index>(k)) = grid.col(picked[k]);
  }
  return out;
}

void write_ze_csv(std::ostream& out, const OperatingRegion& region, const ExtrapolationSet& ze) {
  for (const auto& a : region.axes) out << a.name << ',';
  out << "objective\n";
  for (Index c = 0; c < ze.size(); ++c) {
    for (Index r = 0; r < ze.points.rows(); ++r) out << format_double(ze.points(r, c)) << ',';
    out << format_double(ze.objective[static_cast<std::size_t>(c)]) << '\n';
  }
}

nlohmann::json to_json(const ExtrapolationSet& ze) {
  nlohmann::json pts = nlohmann::json::array();
  for (Index c = 0; c < ze.size(); ++c) {
    const auto col = ze.points.col(c);
    nlohmann::json obj = std::isfinite(ze.objective[static_cast<std::size_t>(c)])
                             ? nlohmann::json(ze.objective[static_cast<std::size_t>(c)])
                             : nlohmann::json(nullptr);
    pts.push_back({{"point", std::vector<double>(col.data(), col.data() + col.size())},
                   {"objective", obj},
                   {"grid_index", ze.grid_index[static_cast<std::size_t>(c)]}});
  }
  return {{"count", ze.size()}, {"points", pts}};
}

}  // namespace pgnn
