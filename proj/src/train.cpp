#include "pgnn/train.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

#include "pgnn/error.hpp"
#include "pgnn/random.hpp"

namespace pgnn {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

namespace {

constexpr double kMaxCondition = 1e12;
constexpr Index kChunk = 4096;

std::vector<double> to_vec(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

void TrainConfig::validate() const {
  if (restarts < 1) throw InvalidArgument("train: restarts must be >= 1");
  if (max_epochs < 0) throw InvalidArgument("train: max_epochs must be >= 0");
  if (!(damping_init > 0.0)) throw InvalidArgument("train: initial damping must be positive");
  if (!(damping_raise > 1.0)) throw InvalidArgument("train: damping raise factor must exceed 1");
  if (!(damping_lower > 0.0 && damping_lower < 1.0)) {
    throw InvalidArgument("train: damping lower factor must lie in (0, 1)");
  }
  if (patience < 0) throw InvalidArgument("train: patience must be >= 0");
}

// ---------------------------------------------------------------------------
// Closed-form selection of the linear block

namespace {

struct LinearSystem {
  MatrixXd normal;  // A^T A
  VectorXd rhs;     // A^T b
  std::vector<Index> params;  // flat indices of the block, in solve order
};

// Flat indices of the requested block in theta_L order.
std::vector<Index> block_indices(const PgnnModel& m, const LipBlock& block) {
  std::vector<Index> idx;
  if (!m.nn.empty()) {
    const Index out = m.output_layer_offset();
    const Index width = m.nn.last_hidden_size();
    if (block.output_weights) {
      for (Index j = 0; j < width; ++j) idx.push_back(out + j);
    }
    if (block.output_bias) idx.push_back(out + width);
  }
  if (block.physics) {
    for (Index j = 0; j < m.physics_params(); ++j) idx.push_back(j);
  }
  return idx;
}

// Regressor features of the block: one row per sample, matching block_indices.
MatrixXd block_design(const PgnnModel& m, const Eigen::Ref<const MatrixXd>& regressors,
                      const LipBlock& block) {
  const Index n = regressors.cols();
  std::vector<MatrixXd> parts;
  if (!m.nn.empty()) {
    if (block.output_weights) parts.push_back(m.nn.last_hidden_batch(nn_inputs(m, regressors)).transpose());
    if (block.output_bias) parts.push_back(MatrixXd::Ones(n, 1));
  }
  if (block.physics && m.physics_params() > 0) {
    parts.push_back(physics_features(m.physics, m.spec, m.ts, regressors).transpose());
  }
  Index cols = 0;
  for (const auto& p : parts) cols += p.cols();
  MatrixXd x(n, cols);
  Index at = 0;
  for (const auto& p : parts) {
    x.middleCols(at, p.cols()) = p;
    at += p.cols();
  }
  return x;
}

LinearSystem assemble_lip_system(const PgnnModel& m, const DataSet& ds, const CostSpec& spec,
                                 const LipBlock& block) {
  spec.validate(m);
  LinearSystem sys;
  sys.params = block_indices(m, block);
  const Index p = static_cast<Index>(sys.params.size());
  if (p == 0) throw InvalidArgument("optimized_lip_selection: empty parameter block");
  sys.normal = MatrixXd::Zero(p, p);
  sys.rhs = VectorXd::Zero(p);

  PgnnModel rest_model = m;
  VectorXd theta = rest_model.flatten();
  for (Index j : sys.params) theta(j) = 0.0;
  rest_model.unflatten(theta);

  const auto add_rows = [&](const Eigen::Ref<const MatrixXd>& regressors,
                            const Eigen::Ref<const RowVectorXd>& target, double weight) {
    for (Index start = 0; start < regressors.cols(); start += kChunk) {
      const Index len = std::min(kChunk, regressors.cols() - start);
      const auto cols = regressors.middleCols(start, len);
      const MatrixXd x = block_design(m, cols, block);
      const VectorXd b = (target.segment(start, len) - predict_batch(rest_model, cols)).transpose();
      sys.normal.noalias() += weight * x.transpose() * x;
      sys.rhs.noalias() += weight * x.transpose() * b;
    }
  };

  add_rows(ds.regressors, ds.targets.transpose(), 1.0 / static_cast<double>(ds.size()));
  const PhysicsKind ref_kind = spec.reference_kind(m);
  if (spec.uses_data_compliance()) {
    const RowVectorXd ref = spec.theta_phy_star.transpose() *
                            physics_features(ref_kind, m.spec, m.ts, ds.regressors);
    add_rows(ds.regressors, ref, spec.c / static_cast<double>(ds.size()));
  }
  if (spec.uses_extrapolation()) {
    const auto& ze = spec.extrapolation_points;
    const RowVectorXd ref = spec.theta_phy_star.transpose() * physics_features(ref_kind, m.spec, m.ts, ze);
    add_rows(ze, ref, spec.gamma / static_cast<double>(ze.cols()));
  }
  if (spec.uses_penalty()) {
    const VectorXd w = spec.penalty_weights(m);
    const VectorXd centre = spec.penalty_centre(m);
    for (Index k = 0; k < p; ++k) {
      const Index j = sys.params[static_cast<std::size_t>(k)];
      const double w2 = w(j) * w(j);
      sys.normal(k, k) += w2;
      sys.rhs(k) += w2 * centre(j);
    }
  }
  return sys;
}

struct ScaledSolve {
  VectorXd solution;
  double condition = 0.0;
};

ScaledSolve solve_scaled(const MatrixXd& normal, const VectorXd& rhs) {
  const Index p = normal.rows();
  VectorXd d(p);
  for (Index j = 0; j < p; ++j) {
    if (!(normal(j, j) > 0.0)) return {VectorXd(), std::numeric_limits<double>::infinity()};
    d(j) = 1.0 / std::sqrt(normal(j, j));
  }
  const MatrixXd scaled = d.asDiagonal() * normal * d.asDiagonal();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(scaled, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  ScaledSolve out;
  out.condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (out.condition > kMaxCondition) return out;
  Eigen::LDLT<MatrixXd> ldlt(scaled);
  out.solution = d.asDiagonal() * ldlt.solve(d.asDiagonal() * rhs);
  return out;
}

}  // namespace

double lip_selection_condition(const PgnnModel& m, const DataSet& ds, const CostSpec& spec,
                               const LipBlock& block) {
  const LinearSystem sys = assemble_lip_system(m, ds, spec, block);
  return solve_scaled(sys.normal, sys.rhs).condition;
}

PgnnModel optimized_lip_selection(const PgnnModel& m, const DataSet& ds, const CostSpec& spec,
                                  const LipBlock& block) {
  const LinearSystem sys = assemble_lip_system(m, ds, spec, block);
  const ScaledSolve sol = solve_scaled(sys.normal, sys.rhs);
  if (sol.condition > kMaxCondition) {
    throw IllConditioned("optimized_lip_selection: normal matrix is singular or ill-conditioned",
                         sol.condition);
  }
  PgnnModel out = m;
  VectorXd theta = out.flatten();
  for (std::size_t k = 0; k < sys.params.size(); ++k) {
    theta(sys.params[k]) = sol.solution(static_cast<Index>(k));
  }
  out.unflatten(theta);
  return out;
}

// ---------------------------------------------------------------------------
// Physics-only fit and hyperparameter helpers

PhysicsFit fit_physics(PhysicsKind kind, const DataSet& ds) {
  if (kind == PhysicsKind::none) throw InvalidArgument("fit_physics: no physics family selected");
  if (ds.size() == 0) throw InvalidArgument("fit_physics: empty data set");
  const MatrixXd x = physics_features(kind, ds.spec, ds.ts, ds.regressors).transpose();
  const Index n = x.rows();
  const Index p = x.cols();
  if (n < p) throw InvalidArgument("fit_physics: fewer samples than parameters");

  VectorXd scale(p);
  for (Index j = 0; j < p; ++j) {
    scale(j) = x.col(j).norm() / std::sqrt(static_cast<double>(n));
    if (!(scale(j) > 0.0)) {
      throw IllConditioned("fit_physics: feature " + std::to_string(j) + " is identically zero",
                           std::numeric_limits<double>::infinity());
    }
  }
  const MatrixXd xs = x * scale.cwiseInverse().asDiagonal();
  Eigen::HouseholderQR<MatrixXd> qr(xs);
  const MatrixXd r = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
  const VectorXd sv = Eigen::JacobiSVD<MatrixXd>(r).singularValues();
  PhysicsFit fit;
  fit.samples = n;
  fit.condition = sv(p - 1) > 0.0 ? sv(0) / sv(p - 1) : std::numeric_limits<double>::infinity();
  if (fit.condition > kMaxCondition) {
    throw IllConditioned("fit_physics: physics features are (nearly) collinear", fit.condition);
  }
  const VectorXd theta_s = qr.solve(ds.targets);
  fit.theta = theta_s.cwiseQuotient(scale);
  const VectorXd resid = ds.targets - x * fit.theta;
  fit.mse = resid.squaredNorm() / static_cast<double>(n);
  const double sigma2 = n > p ? resid.squaredNorm() / static_cast<double>(n - p) : 0.0;
  const MatrixXd r_inv =
      r.triangularView<Eigen::Upper>().solve(MatrixXd::Identity(p, p));
  const VectorXd var_s = (r_inv * r_inv.transpose()).diagonal() * sigma2;
  fit.std_error = var_s.cwiseSqrt().cwiseQuotient(scale);
  return fit;
}

nlohmann::json to_json(const PhysicsFit& fit) {
  return {{"theta", to_vec(fit.theta)},
          {"std_error", to_vec(fit.std_error)},
          {"mse", fit.mse},
          {"condition", fit.condition},
          {"samples", fit.samples}};
}

VectorXd lambda_phy_rule(PhysicsKind kind, const DataSet& ds,
                         const Eigen::Ref<const VectorXd>& theta_phy_star, double eps) {
  if (!(eps > 0.0)) throw InvalidArgument("lambda_phy_rule: epsilon must be positive");
  const MatrixXd f = physics_features(kind, ds.spec, ds.ts, ds.regressors);
  if (f.rows() != theta_phy_star.size()) {
    throw InvalidArgument("lambda_phy_rule: parameter count mismatch");
  }
  for (Index j = 0; j < theta_phy_star.size(); ++j) {
    if (theta_phy_star(j) == 0.0) {
      throw InvalidArgument("lambda_phy_rule: physics parameter " + std::to_string(j) +
                            " is zero; supply lambda_phy explicitly");
    }
  }
  const double mse = (ds.targets.transpose() - theta_phy_star.transpose() * f).squaredNorm() /
                     static_cast<double>(ds.size());
  const double n_phy = static_cast<double>(theta_phy_star.size());
  return std::sqrt(mse / (eps * n_phy)) * theta_phy_star.cwiseInverse();
}

void fit_input_normalization(PgnnModel& m, const DataSet& ds) {
  if (m.nn.empty()) return;
  m.normalization = fit_normalization(transform_features(m.transform, m.spec, m.ts, ds.regressors));
}

// ---------------------------------------------------------------------------
// Levenberg-Marquardt

namespace {

// Sum-of-squares objective over the free parameters of a model, optionally
// extended by co-trained reference physics parameters.
class Objective {
 public:
  Objective(const PgnnModel& model, const DataSet& train_set, const CostSpec& spec,
            std::vector<Index> free, bool cotrain)
      : base_(model), data_(train_set), spec_(spec), free_(std::move(free)), cotrain_(cotrain) {
    ref_kind_ = spec.reference_kind(model);
    if (spec.uses_data_compliance()) {
      ref_data_ = physics_features(ref_kind_, model.spec, model.ts, train_set.regressors);
    }
    if (spec.uses_extrapolation()) {
      ref_extrap_ = physics_features(ref_kind_, model.spec, model.ts, spec.extrapolation_points);
    }
    weights_ = spec.uses_penalty() ? spec.penalty_weights(model) : VectorXd::Zero(model.param_count());
    centre_ = spec.penalty_centre(model);
    n_ref_ = cotrain_ ? spec.theta_phy_star.size() : 0;
  }

  Index size() const { return static_cast<Index>(free_.size()) + n_ref_; }

  // Packs model parameters and reference parameters into the LM vector.
  VectorXd pack(const PgnnModel& m, const VectorXd& ref) const {
    VectorXd x(size());
    const VectorXd theta = m.flatten();
    for (std::size_t k = 0; k < free_.size(); ++k) x(static_cast<Index>(k)) = theta(free_[k]);
    if (n_ref_ > 0) x.tail(n_ref_) = ref;
    return x;
  }

  void unpack(const VectorXd& x, PgnnModel& m, VectorXd& ref) const {
    VectorXd theta = m.flatten();
    for (std::size_t k = 0; k < free_.size(); ++k) theta(free_[k]) = x(static_cast<Index>(k));
    m.unflatten(theta);
    if (n_ref_ > 0) ref = x.tail(n_ref_);
  }

  // Total cost with the data term evaluated on `ds`.
  double cost(const PgnnModel& m, const VectorXd& ref, const DataSet& ds) const {
    double total = (ds.targets.transpose() - predict_batch(m, ds.regressors)).squaredNorm() /
                   static_cast<double>(ds.size());
    if (spec_.variant == CostVariant::mse) return total;
    const VectorXd theta = m.flatten();
    total += (weights_.array() * (theta - centre_).array()).matrix().squaredNorm();
    if (spec_.uses_data_compliance()) {
      const MatrixXd f = &ds == &data_ ? ref_data_
                                       : physics_features(ref_kind_, m.spec, m.ts, ds.regressors);
      total += spec_.c * (predict_batch(m, ds.regressors) - ref.transpose() * f).squaredNorm() /
               static_cast<double>(ds.size());
    }
    if (spec_.uses_extrapolation()) {
      const auto& ze = spec_.extrapolation_points;
      total += spec_.gamma * (predict_batch(m, ze) - ref.transpose() * ref_extrap_).squaredNorm() /
               static_cast<double>(ze.cols());
    }
    return total;
  }

  // Gauss-Newton quantities J^T J and J^T r of the training objective.
  void normal_equations(const PgnnModel& m, const VectorXd& ref, MatrixXd& jtj, VectorXd& jtr) const {
    const Index p = size();
    jtj = MatrixXd::Zero(p, p);
    jtr = VectorXd::Zero(p);
    const auto add_block = [&](const Eigen::Ref<const MatrixXd>& regressors,
                               const Eigen::Ref<const RowVectorXd>& target,
                               const MatrixXd* ref_features, double weight) {
      for (Index start = 0; start < regressors.cols(); start += kChunk) {
        const Index len = std::min(kChunk, regressors.cols() - start);
        const auto cols = regressors.middleCols(start, len);
        const MatrixXd full = jacobian_params_batch(m, cols);
        MatrixXd jac(len, p);
        for (std::size_t k = 0; k < free_.size(); ++k) {
          jac.col(static_cast<Index>(k)) = full.col(free_[k]);
        }
        VectorXd resid = predict_batch(m, cols).transpose();
        if (ref_features) {
          const auto f = ref_features->middleCols(start, len);
          resid -= (ref.transpose() * f).transpose();
          if (n_ref_ > 0) jac.rightCols(n_ref_) = -f.transpose();
        } else {
          resid -= target.segment(start, len).transpose();
          if (n_ref_ > 0) jac.rightCols(n_ref_).setZero();
        }
        jtj.selfadjointView<Eigen::Lower>().rankUpdate(jac.transpose(), weight);
        jtr.noalias() += weight * jac.transpose() * resid;
      }
    };
    add_block(data_.regressors, data_.targets.transpose(), nullptr,
              1.0 / static_cast<double>(data_.size()));
    if (spec_.uses_data_compliance()) {
      add_block(data_.regressors, RowVectorXd(), &ref_data_, spec_.c / static_cast<double>(data_.size()));
    }
    if (spec_.uses_extrapolation()) {
      add_block(spec_.extrapolation_points, RowVectorXd(), &ref_extrap_,
                spec_.gamma / static_cast<double>(spec_.extrapolation_points.cols()));
    }
    jtj = jtj.selfadjointView<Eigen::Lower>();
    if (spec_.variant != CostVariant::mse) {
      const VectorXd theta = m.flatten();
      for (std::size_t k = 0; k < free_.size(); ++k) {
        const Index j = free_[k];
        const double w2 = weights_(j) * weights_(j);
        if (w2 == 0.0) continue;
        jtj(static_cast<Index>(k), static_cast<Index>(k)) += w2;
        jtr(static_cast<Index>(k)) += w2 * (theta(j) - centre_(j));
      }
    }
  }

 private:
  const PgnnModel& base_;
  const DataSet& data_;
  const CostSpec& spec_;
  std::vector<Index> free_;
  bool cotrain_;
  Index n_ref_ = 0;
  PhysicsKind ref_kind_ = PhysicsKind::none;
  MatrixXd ref_data_;
  MatrixXd ref_extrap_;
  VectorXd weights_;
  VectorXd centre_;
};

// Random hidden layers: weights U[-1/sqrt(fan_in), 1/sqrt(fan_in)], biases U[-0.5, 0.5].
void randomize_hidden(PgnnModel& m, Rng& rng) {
  if (m.nn.empty()) return;
  for (Index l = 0; l < m.nn.hidden_layers(); ++l) {
    auto& layer = m.nn.layer(static_cast<std::size_t>(l));
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
    for (Index c = 0; c < layer.weight.cols(); ++c) {
      for (Index r = 0; r < layer.weight.rows(); ++r) layer.weight(r, c) = uniform(rng, -bound, bound);
    }
    for (Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = uniform(rng, -0.5, 0.5);
  }
  m.nn.output_layer().weight.setZero();
  m.nn.output_layer().bias.setZero();
}

struct RestartOutcome {
  RestartRecord record;
  PgnnModel model;
};

RestartOutcome run_restart(int index, const PgnnModel& init, const DataSet& train_set,
                           const DataSet& val_set, const CostSpec& spec, const TrainConfig& cfg,
                           const std::optional<ThetaConstraint>& constraint) {
  RestartOutcome out;
  out.record.index = index;
  PgnnModel model = init;
  VectorXd ref = spec.theta_phy_star;
  const bool freeze_physics = cfg.freeze_physics || constraint.has_value();
  const bool cotrain = cfg.cotrain_reference && spec.uses_data_compliance();
  const LipBlock bias_only{false, true, false};

  try {
    if (!cfg.warm_start) {
      Rng rng = make_rng(cfg.seed, static_cast<std::uint64_t>(index) + 1);
      randomize_hidden(model, rng);
      if (cfg.fit_normalization) fit_input_normalization(model, train_set);
      model = optimized_lip_selection(model, train_set, spec,
                                      LipBlock{true, true, !freeze_physics});
    }
    if (constraint && constraint->project(model) != 1.0 && !model.nn.empty()) {
      model = optimized_lip_selection(model, train_set, spec, bias_only);
    }
  } catch (const IllConditioned& e) {
    out.record.diverged = true;
    out.record.stop_reason = std::string("initialization failed: ") + e.what();
    out.model = model;
    return out;
  }

  std::vector<Index> free;
  for (Index j = freeze_physics ? model.physics_params() : 0; j < model.param_count(); ++j) {
    free.push_back(j);
  }
  Objective obj(model, train_set, spec, free, cotrain);
  const bool has_val = val_set.size() > 0;

  double cost = obj.cost(model, ref, train_set);
  double val = has_val ? obj.cost(model, ref, val_set) : cost;
  out.record.initial_cost = cost;
  if (!std::isfinite(cost)) {
    out.record.diverged = true;
    out.record.stop_reason = "non-finite initial cost";
    out.model = model;
    return out;
  }

  std::vector<VectorXd> iterates{model.flatten()};
  std::vector<VectorXd> ref_iterates{ref};
  double mu = cfg.damping_init;
  out.record.trace.push_back({0, cost, val, mu});
  int best_val_epoch = 0;
  double best_val = val;
  bool early_stopped = false;
  out.record.stop_reason = "max_epochs";

  MatrixXd jtj;
  VectorXd jtr;
  for (int epoch = 1; epoch <= cfg.max_epochs && obj.size() > 0; ++epoch) {
    obj.normal_equations(model, ref, jtj, jtr);
    if (!jtr.allFinite() || !jtj.allFinite()) {
      out.record.diverged = true;
      out.record.stop_reason = "non-finite gradient";
      break;
    }
    if (2.0 * jtr.lpNorm<Eigen::Infinity>() < cfg.gradient_tolerance) {
      out.record.stop_reason = "gradient tolerance";
      break;
    }
    const VectorXd x = obj.pack(model, ref);
    VectorXd diag = jtj.diagonal();
    const double floor = 1e-12 * std::max(diag.maxCoeff(), 1e-300);
    diag = diag.cwiseMax(floor);

    bool accepted = false;
    PgnnModel trial = model;
    VectorXd trial_ref = ref;
    double trial_cost = cost;
    while (mu < 1e20) {
      MatrixXd lhs = jtj;
      lhs.diagonal() += mu * diag;
      Eigen::LDLT<MatrixXd> ldlt(lhs);
      const VectorXd step = ldlt.solve(-jtr);
      if (ldlt.info() == Eigen::Success && step.allFinite()) {
        trial = model;
        trial_ref = ref;
        obj.unpack(x + step, trial, trial_ref);
        if (constraint && constraint->project(trial) != 1.0) {
          trial = optimized_lip_selection(trial, train_set, spec, bias_only);
        }
        trial_cost = obj.cost(trial, trial_ref, train_set);
        if (std::isfinite(trial_cost) && trial_cost < cost) {
          accepted = true;
          break;
        }
      }
      mu *= cfg.damping_raise;
    }
    if (!accepted) {
      out.record.stop_reason = "no descent step";
      break;
    }
    mu = std::max(mu * cfg.damping_lower, 1e-20);
    const double decrease = (cost - trial_cost) / std::max(cost, 1e-300);
    model = std::move(trial);
    ref = trial_ref;
    cost = trial_cost;
    val = has_val ? obj.cost(model, ref, val_set) : cost;
    iterates.push_back(model.flatten());
    ref_iterates.push_back(ref);
    out.record.trace.push_back({epoch, cost, val, mu});

    if (val < best_val) {
      best_val = val;
      best_val_epoch = epoch;
    }
    if (decrease < cfg.min_relative_decrease) {
      out.record.stop_reason = "relative decrease";
      break;
    }
    if (has_val && cfg.patience > 0 && epoch - best_val_epoch >= cfg.patience) {
      out.record.stop_reason = "early stopping";
      early_stopped = true;
      break;
    }
  }

  // Epoch-best parameters over the recorded trace, cut at the best validation
  // epoch when early stopping fired.
  const int last = early_stopped ? best_val_epoch : static_cast<int>(out.record.trace.size()) - 1;
  int best = 0;
  for (int e = 1; e <= last; ++e) {
    if (out.record.trace[e].train_cost < out.record.trace[best].train_cost) best = e;
  }
  out.record.best_epoch = best;
  out.record.best_train_cost = out.record.trace[best].train_cost;
  out.record.best_val_cost = out.record.trace[best].val_cost;
  model.unflatten(iterates[static_cast<std::size_t>(best)]);
  out.record.theta = iterates[static_cast<std::size_t>(best)];
  out.record.reference_theta = ref_iterates[static_cast<std::size_t>(best)];
  if (!std::isfinite(out.record.best_train_cost)) out.record.diverged = true;
  out.model = std::move(model);
  return out;
}

}  // namespace

TrainReport train(const PgnnModel& init, const DataSet& train_set, const DataSet& val_set,
                  const CostSpec& spec, const TrainConfig& cfg,
                  const std::optional<ThetaConstraint>& constraint) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  init.validate();
  spec.validate(init);
  if (train_set.size() == 0) throw InvalidArgument("train: empty training set");
  if (train_set.spec != init.spec || (val_set.size() > 0 && val_set.spec != init.spec)) {
    throw InvalidArgument("train: data set layout does not match the model");
  }
  if (constraint && !init.nn.empty() && init.transform != TransformKind::identity) {
    throw InvalidArgument("train: the stability constraint requires the identity transform");
  }

  const int restarts = cfg.warm_start ? 1 : cfg.restarts;
  std::vector<RestartOutcome> outcomes(static_cast<std::size_t>(restarts));
  std::vector<std::string> failures(static_cast<std::size_t>(restarts));
  std::atomic<int> next{0};
  const auto worker = [&]() {
    for (int i = next++; i < restarts; i = next++) {
      try {
        outcomes[static_cast<std::size_t>(i)] =
            run_restart(i, init, train_set, val_set, spec, cfg, constraint);
      } catch (const std::exception& e) {
        failures[static_cast<std::size_t>(i)] = e.what();
        outcomes[static_cast<std::size_t>(i)].record.index = i;
        outcomes[static_cast<std::size_t>(i)].record.diverged = true;
        outcomes[static_cast<std::size_t>(i)].record.stop_reason = e.what();
      }
    }
  };
  unsigned hw = std::thread::hardware_concurrency();
  int threads = cfg.threads > 0 ? cfg.threads : static_cast<int>(hw == 0 ? 1 : hw);
  threads = std::max(1, std::min(threads, restarts));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  TrainReport report;
  report.seed = cfg.seed;
  int selected = -1;
  for (int i = 0; i < restarts; ++i) {
    const auto& rec = outcomes[static_cast<std::size_t>(i)].record;
    report.restarts.push_back(rec);
    if (rec.diverged) continue;
    if (selected < 0 ||
        rec.best_val_cost < outcomes[static_cast<std::size_t>(selected)].record.best_val_cost) {
      selected = i;
    }
  }
  if (selected < 0) {
    std::string what = "train: every restart diverged";
    if (!report.restarts.empty()) what += " (first: " + report.restarts.front().stop_reason + ")";
    throw Diverged(what);
  }
  report.selected_restart = selected;
  report.model = outcomes[static_cast<std::size_t>(selected)].model;
  report.reference_theta = outcomes[static_cast<std::size_t>(selected)].record.reference_theta;
  CostSpec eval_spec = spec;
  if (report.reference_theta.size() == spec.theta_phy_star.size()) {
    eval_spec.theta_phy_star = report.reference_theta;
  }
  report.breakdown = cost_breakdown(report.model, train_set, eval_spec);
  report.val_cost = outcomes[static_cast<std::size_t>(selected)].record.best_val_cost;
  if (constraint) report.iss_margin = constraint->margin(report.model);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

nlohmann::json to_json(const TrainReport& report) {
  nlohmann::json restarts = nlohmann::json::array();
  for (const auto& r : report.restarts) {
    restarts.push_back({{"index", r.index},
                        {"diverged", r.diverged},
                        {"stop_reason", r.stop_reason},
                        {"epochs", r.trace.empty() ? 0 : r.trace.back().epoch},
                        {"best_epoch", r.best_epoch},
                        {"initial_cost", r.initial_cost},
                        {"best_train_cost", r.best_train_cost},
                        {"best_val_cost", r.best_val_cost}});
  }
  nlohmann::json j = {{"selected_restart", report.selected_restart},
                      {"cost", to_json(report.breakdown)},
                      {"val_cost", report.val_cost},
                      {"wall_seconds", report.wall_seconds},
                      {"seed", report.seed},
                      {"restarts", restarts},
                      {"reference_theta", to_vec(report.reference_theta)}};
  if (report.iss_margin) j["iss_margin"] = *report.iss_margin;
  return j;
}

void write_trace_csv(std::ostream& out, const TrainReport& report) {
  out << "restart,epoch,train_cost,val_cost,damping\n";
  for (const auto& r : report.restarts) {
    for (const auto& e : r.trace) {
      out << r.index << ',' << e.epoch << ',' << format_double(e.train_cost) << ','
          << format_double(e.val_cost) << ',' << format_double(e.damping) << '\n';
    }
  }
}

std::vector<LCurvePoint> sweep_lambda(const PgnnModel& init, const DataSet& train_set,
                                      const DataSet& val_set, const CostSpec& base,
                                      const std::vector<double>& grid, const TrainConfig& cfg) {
  if (grid.empty()) throw InvalidArgument("sweep_lambda: empty grid");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw InvalidArgument("sweep_lambda: grid must be increasing");
  }
  if (grid.front() < 0.0) throw InvalidArgument("sweep_lambda: lambda must be non-negative");
  std::vector<LCurvePoint> out;
  PgnnModel current = init;
  TrainConfig step_cfg = cfg;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CostSpec spec = base;
    if (spec.variant == CostVariant::mse) spec.variant = CostVariant::pgnn_reg;
    spec.lambda_nn = VectorXd::Constant(1, grid[i]);
    const TrainReport rep = train(current, train_set, val_set, spec, step_cfg);
    current = rep.model;
    step_cfg.warm_start = true;
    LCurvePoint pt;
    pt.lambda = grid[i];
    pt.mse = cost_mse(current, train_set);
    pt.penalty_unit = current.nn.flatten().squaredNorm();
    pt.total = rep.breakdown.total;
    out.push_back(pt);
  }
  return out;
}

std::vector<double> log_grid(double lo, double hi, int count) {
  if (!(lo > 0.0 && hi > lo) || count < 2) {
    throw InvalidArgument("log_grid: need 0 < lo < hi and count >= 2");
  }
  std::vector<double> out(static_cast<std::size_t>(count));
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (int i = 0; i < count; ++i) {
    out[static_cast<std::size_t>(i)] = std::pow(10.0, a + (b - a) * i / (count - 1));
  }
  out.front() = lo;
  out.back() = hi;
  return out;
}

}  // namespace pgnn
