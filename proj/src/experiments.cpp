#include "pgnn/experiments.hpp"

#include "pgnn/error.hpp"

namespace pgnn {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

TrainConfig train_config(const RecipeTraining& t) {
  TrainConfig cfg;
  cfg.restarts = t.restarts;
  cfg.max_epochs = t.max_epochs;
  cfg.patience = t.patience;
  cfg.seed = t.seed;
  cfg.threads = t.threads;
  return cfg;
}

DataSet every_nth(const DataSet& ds, int stride) {
  if (stride <= 1) return ds;
  std::vector<Index> keep;
  for (Index i = 0; i < ds.size(); i += stride) keep.push_back(i);
  return ds.subset(keep);
}

}  // namespace

// ---------------------------------------------------------------------------
// Linear motor study

std::string to_string(ClmRecipe r) {
  switch (r) {
    case ClmRecipe::physics: return "physics";
    case ClmRecipe::nn: return "nn";
    case ClmRecipe::pinn: return "pinn";
    case ClmRecipe::pgnn: return "pgnn";
    case ClmRecipe::pgnn_extrap: return "pgnn_extrap";
  }
  return "physics";
}

ClmRecipe clm_recipe_from_string(const std::string& name) {
  for (ClmRecipe r : all_clm_recipes()) {
    if (to_string(r) == name) return r;
  }
  throw InvalidArgument("unknown linear motor recipe '" + name +
                        "' (expected physics, nn, pinn, pgnn or pgnn_extrap)");
}

std::vector<ClmRecipe> all_clm_recipes() {
  return {ClmRecipe::physics, ClmRecipe::nn, ClmRecipe::pinn, ClmRecipe::pgnn, ClmRecipe::pgnn_extrap};
}

ClmStudyConfig::ClmStudyConfig() {
  region.axes = {{"position", AxisKind::position, -0.2, 0.2, 21},
                 {"velocity", AxisKind::velocity, -0.2, 0.2, 21},
                 {"acceleration", AxisKind::acceleration, -2.0, 2.0, 11}};
}

RegressorSpec clm_regressor_spec() { return {5, 1, 2}; }

Plant make_clm_plant(const ClmStudyConfig& cfg) { return Plant::clm(cfg.plant, cfg.ts); }

FeedbackLaw make_clm_feedback(double ts) { return FeedbackLaw(clm_feedback_tf(), ts); }

ReferenceTrajectory clm_test_reference(const ClmStudyConfig& cfg, double start, double end, double v_max,
                                       double a_max) {
  const MoveProfile out{start, end, v_max, a_max, cfg.j_max};
  const MoveProfile back{end, start, v_max, a_max, cfg.j_max};
  return make_sequence({out, back}, cfg.ts, cfg.dwell, cfg.dwell);
}

std::vector<ReferenceTrajectory> clm_training_references(const ClmStudyConfig& cfg) {
  std::vector<ReferenceTrajectory> refs;
  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    for (double v : cfg.velocities) {
      refs.push_back(clm_test_reference(cfg, cfg.train_lo, cfg.train_hi, v, cfg.a_max));
    }
  }
  return refs;
}

ClmIdentification prepare_clm_identification(const SignalLog& log, const ClmStudyConfig& cfg) {
  ClmIdentification id;
  const RegressorSpec spec = clm_regressor_spec();
  id.data = build_regressors(log, spec);
  id.physics = fit_physics(PhysicsKind::clm, id.data);
  auto [tr, va] = split_train_val(id.data, cfg.training.train_fraction, cfg.training.seed);
  id.train_set = every_nth(tr, cfg.training.stride);
  id.val_set = every_nth(va, cfg.training.stride);
  const MatrixXd covered = project_regressors(cfg.region, spec, id.data.ts, id.data.regressors);
  id.ze = generate_ze(cfg.region, covered, cfg.ze_points, cfg.ze_eps);
  id.ze_regressors = lift_points(cfg.region, spec, id.data.ts, id.ze.points);
  return id;
}

PgnnModel train_clm_recipe(ClmRecipe recipe, const ClmIdentification& id, const ClmStudyConfig& cfg,
                           TrainReport* report) {
  const RegressorSpec spec = clm_regressor_spec();
  const double ts = id.data.ts;
  const VectorXd& star = id.physics.theta;
  if (recipe == ClmRecipe::physics) {
    PgnnModel m = make_model(spec, ts, PhysicsKind::clm, TransformKind::identity, {}, false);
    m.theta_phy = star;
    return m;
  }
  const std::vector<Index> hidden{cfg.hidden};
  PgnnModel init;
  CostSpec cost;
  cost.theta_phy_star = star;
  cost.reference_physics = PhysicsKind::clm;
  switch (recipe) {
    case ClmRecipe::nn:
      init = make_model(spec, ts, PhysicsKind::none, TransformKind::clm_window, hidden);
      cost.variant = CostVariant::pgnn_reg;
      cost.lambda_nn = VectorXd::Constant(1, cfg.lambda_nn_nn);
      break;
    case ClmRecipe::pinn:
      init = make_model(spec, ts, PhysicsKind::none, TransformKind::clm_window, hidden);
      cost.variant = CostVariant::pinn;
      cost.lambda_nn = VectorXd::Constant(1, cfg.lambda_nn_nn);
      cost.c = cfg.pinn_c;
      cost.gamma = cfg.gamma;
      cost.extrapolation_points = id.ze_regressors;
      break;
    case ClmRecipe::pgnn:
    case ClmRecipe::pgnn_extrap:
      init = make_model(spec, ts, PhysicsKind::clm, TransformKind::clm_features, hidden);
      init.theta_phy = star;
      cost.variant = recipe == ClmRecipe::pgnn ? CostVariant::pgnn_reg : CostVariant::pgnn_extrap;
      cost.lambda_nn = VectorXd::Constant(1, cfg.lambda_nn_pgnn);
      cost.lambda_phy = lambda_phy_rule(PhysicsKind::clm, id.train_set, star, cfg.eps);
      if (recipe == ClmRecipe::pgnn_extrap) {
        cost.gamma = cfg.gamma;
        cost.extrapolation_points = id.ze_regressors;
      }
      break;
    case ClmRecipe::physics:
      break;
  }
  TrainReport rep = train(init, id.train_set, id.val_set, cost, train_config(cfg.training));
  PgnnModel out = rep.model;
  if (report) *report = std::move(rep);
  return out;
}

// ---------------------------------------------------------------------------
// Rotating-translating mass study

std::string to_string(RotatingRecipe r) {
  switch (r) {
    case RotatingRecipe::none: return "none";
    case RotatingRecipe::physics_zpetc: return "physics_zpetc";
    case RotatingRecipe::pgnn_zpetc: return "pgnn_zpetc";
    case RotatingRecipe::physics_preview: return "physics_preview";
    case RotatingRecipe::pgnn_preview: return "pgnn_preview";
  }
  return "none";
}

RotatingRecipe rotating_recipe_from_string(const std::string& name) {
  for (RotatingRecipe r : all_rotating_recipes()) {
    if (to_string(r) == name) return r;
  }
  throw InvalidArgument("unknown rotating mass recipe '" + name +
                        "' (expected none, physics_zpetc, pgnn_zpetc, physics_preview or pgnn_preview)");
}

std::vector<RotatingRecipe> all_rotating_recipes() {
  return {RotatingRecipe::none, RotatingRecipe::physics_zpetc, RotatingRecipe::pgnn_zpetc,
          RotatingRecipe::physics_preview, RotatingRecipe::pgnn_preview};
}

RotatingStudyConfig::RotatingStudyConfig() {
  moves = {{0.0, 0.1, 0.1, 1.0, 50.0}, {0.1, 0.0, 0.1, 1.0, 50.0}};
}

Plant make_rotating_plant(const RotatingStudyConfig& cfg) { return Plant::rotating(cfg.plant, cfg.ts); }

FeedbackLaw make_rotating_feedback(double ts) { return FeedbackLaw(rotating_feedback_tf(), ts); }

ReferenceTrajectory rotating_reference(const RotatingStudyConfig& cfg) {
  return make_sequence(cfg.moves, cfg.ts, cfg.dwell, cfg.dwell);
}

RotatingIdentification prepare_rotating_identification(const SignalLog& log, const RotatingStudyConfig& cfg) {
  RotatingIdentification id;
  id.base = build_regressors(log, cfg.spec);
  id.base_fit = fit_physics(PhysicsKind::linear, id.base);
  id.zpetc = zpetc_inverse(forward_from_inverse(id.base_fit.theta, cfg.spec));
  id.preview_spec = extend_preview(cfg.spec, cfg.npw, id.zpetc.unstable_count());
  id.preview = build_regressors(log, id.preview_spec);
  id.preview_fit = fit_physics(PhysicsKind::linear, id.preview);
  return id;
}

namespace {

/// Trains a network next to frozen linear physics inside the stability set.
TrainReport train_frozen_pgnn(const DataSet& ds, const VectorXd& theta_star, const ThetaConstraint& constraint,
                              const RotatingStudyConfig& cfg) {
  PgnnModel init = make_model(ds.spec, ds.ts, PhysicsKind::linear, TransformKind::identity,
                              {static_cast<Index>(cfg.hidden)});
  init.theta_phy = theta_star;
  CostSpec cost;
  cost.variant = CostVariant::pgnn_reg;
  cost.theta_phy_star = theta_star;
  cost.lambda_phy = lambda_phy_rule(PhysicsKind::linear, ds, theta_star, cfg.eps);
  auto [tr, va] = split_train_val(ds, cfg.training.train_fraction, cfg.training.seed);
  TrainConfig tc = train_config(cfg.training);
  tc.freeze_physics = true;
  return train(init, every_nth(tr, cfg.training.stride), every_nth(va, cfg.training.stride), cost, tc,
               constraint);
}

}  // namespace

std::optional<PgnnModel> build_rotating_controller(RotatingRecipe recipe, const RotatingIdentification& id,
                                                   const RotatingStudyConfig& cfg, TrainReport* report) {
  const double ts = id.base.ts;
  switch (recipe) {
    case RotatingRecipe::none:
      return std::nullopt;
    case RotatingRecipe::physics_zpetc: {
      PgnnModel m = make_model(id.zpetc.spec, ts, PhysicsKind::linear, TransformKind::identity, {}, false);
      m.theta_phy = id.zpetc.theta;
      return m;
    }
    case RotatingRecipe::physics_preview: {
      PgnnModel m = make_model(id.preview_spec, ts, PhysicsKind::linear, TransformKind::identity, {}, false);
      m.theta_phy = id.preview_fit.theta;
      return m;
    }
    case RotatingRecipe::pgnn_zpetc: {
      // The filter state keeps as many past inputs as the base model so that
      // the network's past-input columns carry over.
      const RegressorSpec& base = cfg.spec;
      const ZpetcFilter& z = id.zpetc;
      if (z.spec.input_terms() > base.input_terms()) {
        throw InvalidArgument("pgnn_zpetc: ZPETC filter has more past inputs than the base model");
      }
      const RegressorSpec ff_spec{z.spec.na, base.nb, z.spec.nk};
      VectorXd theta_uff = VectorXd::Zero(base.input_terms());
      theta_uff.head(z.spec.input_terms()) = z.theta.tail(z.spec.input_terms());
      std::vector<Index> cols;
      for (int j = 0; j < base.input_terms(); ++j) cols.push_back(base.output_terms() + j);
      const ThetaConstraint constraint = theta_constraint(companion_matrix(theta_uff), cols);
      TrainReport rep = train_frozen_pgnn(id.base, id.base_fit.theta, constraint, cfg);

      PgnnModel m = make_model(ff_spec, ts, PhysicsKind::linear, TransformKind::identity,
                               {static_cast<Index>(cfg.hidden)});
      m.theta_phy.resize(ff_spec.size());
      m.theta_phy << z.theta.head(z.spec.output_terms()), theta_uff;
      m.nn = remap_network(raw_input_network(rep.model), base, ff_spec);
      m.normalization = NormalizationRecord::identity(ff_spec.size());
      m.offset = rep.model.offset;
      if (report) *report = std::move(rep);
      return m;
    }
    case RotatingRecipe::pgnn_preview: {
      PgnnModel phys = make_model(id.preview_spec, ts, PhysicsKind::linear, TransformKind::identity, {}, false);
      phys.theta_phy = id.preview_fit.theta;
      const ThetaConstraint constraint = theta_constraint_for(phys);
      TrainReport rep = train_frozen_pgnn(id.preview, id.preview_fit.theta, constraint, cfg);
      PgnnModel m = rep.model;
      if (report) *report = std::move(rep);
      return m;
    }
  }
  return std::nullopt;
}

nlohmann::json to_json(const ControllerScore& s) {
  nlohmann::json j{{"controller", s.controller}, {"reference", s.reference}, {"aborted", s.aborted}};
  j["mae"] = s.aborted ? nlohmann::json(nullptr) : nlohmann::json(s.mae);
  j["mse"] = s.aborted ? nlohmann::json(nullptr) : nlohmann::json(s.mse);
  if (!s.message.empty()) j["message"] = s.message;
  return j;
}

ControllerScore score_controller(const std::string& controller, const std::string& reference, const Plant& plant,
                                 const FeedbackLaw& fb, const std::optional<PgnnModel>& ff,
                                 const ReferenceTrajectory& ref, const SimulationOptions& opts) {
  const ScenarioResult res = run_closed_loop(plant, fb, ff, ref, opts);
  return {controller, reference, res.mae, res.mse, res.aborted, res.message};
}

}  // namespace pgnn
