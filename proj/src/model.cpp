#include "pgnn/model.hpp"

#include <fstream>

#include "pgnn/error.hpp"

namespace pgnn {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

std::string to_string(PhysicsKind kind) {
  switch (kind) {
    case PhysicsKind::none: return "none";
    case PhysicsKind::linear: return "linear";
    case PhysicsKind::clm: return "clm";
  }
  return "none";
}

std::string to_string(TransformKind kind) {
  switch (kind) {
    case TransformKind::identity: return "identity";
    case TransformKind::clm_features: return "clm_features";
    case TransformKind::clm_window: return "clm_window";
  }
  return "identity";
}

PhysicsKind physics_kind_from_string(const std::string& name) {
  if (name == "none") return PhysicsKind::none;
  if (name == "linear") return PhysicsKind::linear;
  if (name == "clm") return PhysicsKind::clm;
  throw InvalidArgument("unknown physics kind '" + name + "' (expected none, linear or clm)");
}

TransformKind transform_kind_from_string(const std::string& name) {
  if (name == "identity") return TransformKind::identity;
  if (name == "clm_features") return TransformKind::clm_features;
  if (name == "clm_window") return TransformKind::clm_window;
  throw InvalidArgument("unknown transform '" + name +
                        "' (expected identity, clm_features or clm_window)");
}

namespace {

// Row of y(k+offset) in the regressor, or a descriptive failure.
int row_of(const RegressorSpec& spec, int offset, const char* who) {
  const auto row = spec.output_index(offset);
  if (!row) {
    throw InvalidArgument(std::string(who) + " needs y(k" + (offset >= 0 ? "+" : "") +
                          std::to_string(offset) + ") but the regressor covers y(k+" +
                          std::to_string(spec.newest_output_offset()) + ")..y(k" +
                          (spec.oldest_output_offset() >= 0 ? "+" : "") +
                          std::to_string(spec.oldest_output_offset()) + ")");
  }
  return *row;
}

// Rows of y(k+3) .. y(k-2) needed by the motor features.
std::array<int, 6> clm_rows(const RegressorSpec& spec, const char* who) {
  std::array<int, 6> rows{};
  for (int i = 0; i < 6; ++i) rows[i] = row_of(spec, 3 - i, who);
  return rows;
}

}  // namespace

Index physics_size(PhysicsKind kind, const RegressorSpec& spec) {
  switch (kind) {
    case PhysicsKind::none: return 0;
    case PhysicsKind::linear: return spec.size();
    case PhysicsKind::clm: return 3;
  }
  return 0;
}

Index transform_size(TransformKind kind, const RegressorSpec& spec) {
  switch (kind) {
    case TransformKind::identity: return spec.size();
    case TransformKind::clm_features: return 3;
    case TransformKind::clm_window: return 5;
  }
  return 0;
}

MatrixXd physics_features(PhysicsKind kind, const RegressorSpec& spec, double ts,
                          const Eigen::Ref<const MatrixXd>& regressors) {
  if (regressors.rows() != spec.size()) {
    throw InvalidArgument("physics_features: regressor width " + std::to_string(regressors.rows()) +
                          " does not match spec size " + std::to_string(spec.size()));
  }
  const Index n = regressors.cols();
  switch (kind) {
    case PhysicsKind::none: return MatrixXd(0, n);
    case PhysicsKind::linear: return regressors;
    case PhysicsKind::clm: {
      const auto r = clm_rows(spec, "clm physics");
      MatrixXd f(3, n);
      for (Index c = 0; c < n; ++c) {
        const auto y = [&](int i) { return regressors(r[i], c); };  // i = 0 is y(k+3)
        // delta^2 y at k+1 and k, then the half-sample average
        const double acc1 = (y(0) - 2.0 * y(2) + y(4)) / (4.0 * ts * ts);
        const double acc0 = (y(1) - 2.0 * y(3) + y(5)) / (4.0 * ts * ts);
        const double vel1 = (y(1) - y(3)) / (2.0 * ts);
        const double vel0 = (y(2) - y(4)) / (2.0 * ts);
        f(0, c) = 0.5 * (acc1 + acc0);
        f(1, c) = 0.5 * (vel1 + vel0);
        f(2, c) = 0.5 * (sign0(vel1) + sign0(vel0));
      }
      return f;
    }
  }
  return MatrixXd(0, n);
}

MatrixXd transform_features(TransformKind kind, const RegressorSpec& spec, double ts,
                            const Eigen::Ref<const MatrixXd>& regressors) {
  if (regressors.rows() != spec.size()) {
    throw InvalidArgument("transform_features: regressor width does not match spec");
  }
  const Index n = regressors.cols();
  switch (kind) {
    case TransformKind::identity: return regressors;
    case TransformKind::clm_features: {
      const auto r = clm_rows(spec, "clm_features transform");
      MatrixXd f(3, n);
      for (Index c = 0; c < n; ++c) {
        const auto y = [&](int i) { return regressors(r[i], c); };
        f(0, c) = 0.5 * (y(2) + y(3));
        f(1, c) = 0.5 * ((y(1) - y(3)) + (y(2) - y(4))) / (2.0 * ts);
        f(2, c) = 0.5 * ((y(0) - 2.0 * y(2) + y(4)) + (y(1) - 2.0 * y(3) + y(5))) / (4.0 * ts * ts);
      }
      return f;
    }
    case TransformKind::clm_window: {
      const auto r = clm_rows(spec, "clm_window transform");
      MatrixXd f(5, n);
      for (Index c = 0; c < n; ++c) {
        for (int i = 0; i < 5; ++i) f(i, c) = 0.5 * (regressors(r[i], c) + regressors(r[i + 1], c));
      }
      return f;
    }
  }
  return regressors;
}

VectorXd PgnnModel::flatten() const {
  VectorXd theta(param_count());
  theta.head(physics_params()) = theta_phy;
  theta.tail(nn_params()) = nn.flatten();
  return theta;
}

void PgnnModel::unflatten(const Eigen::Ref<const VectorXd>& theta) {
  if (theta.size() != param_count()) {
    throw InvalidArgument("PgnnModel::unflatten: expected " + std::to_string(param_count()) +
                          " parameters, got " + std::to_string(theta.size()));
  }
  theta_phy = theta.head(physics_params());
  nn.unflatten(theta.tail(nn_params()));
}

void PgnnModel::validate() const {
  spec.validate();
  if (!(ts > 0.0)) throw InvalidArgument("model: sampling time must be positive");
  if (theta_phy.size() != physics_size(physics, spec)) {
    throw InvalidArgument("model: physics parameter count " + std::to_string(theta_phy.size()) +
                          " does not match " + to_string(physics) + " physics (" +
                          std::to_string(physics_size(physics, spec)) + ")");
  }
  if (!nn.empty()) {
    const Index width = transform_size(transform, spec);
    if (nn.input_size() != width) {
      throw InvalidArgument("model: network input width " + std::to_string(nn.input_size()) +
                            " does not match transform width " + std::to_string(width));
    }
    if (!normalization.empty() && normalization.size() != width) {
      throw InvalidArgument("model: normalization width does not match transform width");
    }
  }
  if (physics == PhysicsKind::clm) physics_features(physics, spec, ts, MatrixXd::Zero(spec.size(), 1));
  if (!nn.empty()) transform_features(transform, spec, ts, MatrixXd::Zero(spec.size(), 1));
}

PgnnModel make_model(const RegressorSpec& spec, double ts, PhysicsKind physics,
                     TransformKind transform, const std::vector<Index>& hidden, bool with_nn) {
  PgnnModel m;
  m.spec = spec;
  m.ts = ts;
  m.physics = physics;
  m.theta_phy = VectorXd::Zero(physics_size(physics, spec));
  m.transform = transform;
  if (with_nn) {
    const Index width = transform_size(transform, spec);
    m.nn = NeuralNet<double>::zeros(width, hidden);
    m.normalization = NormalizationRecord::identity(width);
  }
  m.validate();
  return m;
}

RowVectorXd eval_physics_batch(const PgnnModel& m, const Eigen::Ref<const VectorXd>& theta,
                               const Eigen::Ref<const MatrixXd>& regressors) {
  if (m.physics == PhysicsKind::none) return RowVectorXd::Zero(regressors.cols());
  if (theta.size() != physics_size(m.physics, m.spec)) {
    throw InvalidArgument("eval_physics: parameter count mismatch");
  }
  return theta.transpose() * physics_features(m.physics, m.spec, m.ts, regressors);
}

RowVectorXd eval_physics_batch(const PgnnModel& m, const Eigen::Ref<const MatrixXd>& regressors) {
  return eval_physics_batch(m, m.theta_phy, regressors);
}

double eval_physics(const PgnnModel& m, const Eigen::Ref<const VectorXd>& phi) {
  return eval_physics_batch(m, phi)(0);
}

MatrixXd nn_inputs(const PgnnModel& m, const Eigen::Ref<const MatrixXd>& regressors) {
  return m.normalization.apply(transform_features(m.transform, m.spec, m.ts, regressors));
}

RowVectorXd eval_nn_batch(const PgnnModel& m, const Eigen::Ref<const MatrixXd>& regressors) {
  if (m.nn.empty()) return RowVectorXd::Zero(regressors.cols());
  return m.nn.eval_batch(nn_inputs(m, regressors));
}

RowVectorXd predict_batch(const PgnnModel& m, const Eigen::Ref<const MatrixXd>& regressors) {
  RowVectorXd out = eval_physics_batch(m, regressors) + eval_nn_batch(m, regressors);
  out.array() += m.offset;
  return out;
}

double predict(const PgnnModel& m, const Eigen::Ref<const VectorXd>& phi) {
  return predict_batch(m, phi)(0);
}

MatrixXd jacobian_params_batch(const PgnnModel& m, const Eigen::Ref<const MatrixXd>& regressors) {
  MatrixXd jac(regressors.cols(), m.param_count());
  if (m.physics_params() > 0) {
    jac.leftCols(m.physics_params()) =
        physics_features(m.physics, m.spec, m.ts, regressors).transpose();
  }
  if (m.nn_params() > 0) {
    jac.rightCols(m.nn_params()) = m.nn.jacobian_params_batch(nn_inputs(m, regressors));
  }
  return jac;
}

VectorXd jacobian_params(const PgnnModel& m, const Eigen::Ref<const VectorXd>& phi) {
  return jacobian_params_batch(m, phi).transpose();
}

NeuralNet<double> raw_input_network(const PgnnModel& m) {
  if (m.nn.empty()) return {};
  if (m.transform != TransformKind::identity) {
    throw InvalidArgument("raw_input_network: only the identity transform can be folded");
  }
  NeuralNet<double> out = m.nn;
  if (m.normalization.empty()) return out;
  auto& first = out.layer(0);
  const MatrixXd w = first.weight * m.normalization.scale.cwiseInverse().asDiagonal();
  first.bias -= w * m.normalization.shift;
  first.weight = w;
  return out;
}

NeuralNet<double> remap_network(const NeuralNet<double>& raw_nn, const RegressorSpec& from,
                                const RegressorSpec& to) {
  if (raw_nn.empty()) return {};
  if (raw_nn.input_size() != from.size()) {
    throw InvalidArgument("remap_network: network width does not match source layout");
  }
  NeuralNet<double> out = raw_nn;
  const MatrixXd& w = raw_nn.layer(0).weight;
  MatrixXd mapped = MatrixXd::Zero(w.rows(), to.size());
  for (int i = 0; i <= from.na; ++i) {
    const int offset = from.nk + 1 - i;
    const auto row = to.output_index(offset);
    if (row) {
      mapped.col(*row) = w.col(i);
    } else if (!w.col(i).isZero(0.0)) {
      throw InvalidArgument("remap_network: target layout lacks y(k" + std::to_string(offset) +
                            ") which carries nonzero weight");
    }
  }
  for (int lag = 1; lag < from.nb; ++lag) {
    const auto row = to.input_index(lag);
    const Index src = from.na + lag;
    if (row) {
      mapped.col(*row) = w.col(src);
    } else if (!w.col(src).isZero(0.0)) {
      throw InvalidArgument("remap_network: target layout lacks u(k-" + std::to_string(lag) +
                            ") which carries nonzero weight");
    }
  }
  out.layer(0).weight = mapped;
  return out;
}

namespace {

std::vector<double> to_vec(const Eigen::Ref<const VectorXd>& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

VectorXd from_vec(const std::vector<double>& v) {
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
}

}  // namespace

nlohmann::json network_to_json(const NeuralNet<double>& nn) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : nn.layers()) {
    nlohmann::json rows = nlohmann::json::array();
    for (Index r = 0; r < l.weight.rows(); ++r) {
      rows.push_back(to_vec(l.weight.row(r).transpose()));
    }
    layers.push_back({{"rows", l.weight.rows()},
                      {"cols", l.weight.cols()},
                      {"weight", rows},
                      {"bias", to_vec(l.bias)}});
  }
  return {{"activation", "tanh"}, {"layers", layers}};
}

NeuralNet<double> network_from_json(const nlohmann::json& j) {
  if (j.at("activation").get<std::string>() != "tanh") {
    throw InvalidArgument("network: only tanh hidden activation is supported");
  }
  std::vector<NeuralNet<double>::Layer> layers;
  for (const auto& lj : j.at("layers")) {
    const Index rows = lj.at("rows").get<Index>();
    const Index cols = lj.at("cols").get<Index>();
    MatrixXd w(rows, cols);
    const auto& wr = lj.at("weight");
    if (static_cast<Index>(wr.size()) != rows) throw InvalidArgument("network: weight row count");
    for (Index r = 0; r < rows; ++r) {
      const auto row = wr.at(r).get<std::vector<double>>();
      if (static_cast<Index>(row.size()) != cols) throw InvalidArgument("network: weight col count");
      for (Index c = 0; c < cols; ++c) w(r, c) = row[c];
    }
    layers.push_back({w, from_vec(lj.at("bias").get<std::vector<double>>())});
  }
  return NeuralNet<double>(std::move(layers));
}

nlohmann::json model_to_json(const PgnnModel& m) {
  nlohmann::json j;
  j["format"] = "pgnn-model";
  j["version"] = 1;
  j["spec"] = to_json(m.spec);
  j["ts"] = m.ts;
  j["physics"] = {{"kind", to_string(m.physics)}, {"theta", to_vec(m.theta_phy)}};
  j["transform"] = to_string(m.transform);
  j["normalization"] = to_json(m.normalization);
  j["network"] = network_to_json(m.nn);
  j["offset"] = m.offset;
  return j;
}

PgnnModel model_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "pgnn-model") throw InvalidArgument("not a pgnn model file");
  PgnnModel m;
  m.spec = regressor_spec_from_json(j.at("spec"));
  m.ts = j.at("ts").get<double>();
  m.physics = physics_kind_from_string(j.at("physics").at("kind").get<std::string>());
  m.theta_phy = from_vec(j.at("physics").at("theta").get<std::vector<double>>());
  m.transform = transform_kind_from_string(j.at("transform").get<std::string>());
  m.normalization = normalization_from_json(j.at("normalization"));
  m.nn = network_from_json(j.at("network"));
  m.offset = j.value("offset", 0.0);
  m.validate();
  return m;
}

void save_model(const std::filesystem::path& path, const PgnnModel& m) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write model file " + path.string());
  out << model_to_json(m).dump(2) << '\n';
}

PgnnModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open model file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("model file " + path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace pgnn
