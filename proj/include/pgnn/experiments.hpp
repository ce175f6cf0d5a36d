#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pgnn/closed_loop.hpp"
#include "pgnn/cost.hpp"
#include "pgnn/data.hpp"
#include "pgnn/extrap.hpp"
#include "pgnn/feedback.hpp"
#include "pgnn/model.hpp"
#include "pgnn/plant.hpp"
#include "pgnn/reference.hpp"
#include "pgnn/stability.hpp"
#include "pgnn/train.hpp"
#include "pgnn/zpetc.hpp"

namespace pgnn {

/// Shared training knobs of the study recipes.
struct RecipeTraining {
  int restarts = 10;
  int max_epochs = 200;
  int patience = 20;
  /// Share of the regressors used for training; the rest validates.
  double train_fraction = 0.7;
  /// Keep every `stride`-th regressor for training (1 keeps all).
  int stride = 1;
  int threads = 0;
  std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Linear motor study on the synthetic plant

/// Feedforward recipes of the linear motor study.
///   physics      mass-friction model fitted by least squares
///   nn           network on the position window
///   pinn         network with compliance to the fitted physics on data and Z^E
///   pgnn         physics plus network, parameter penalty only
///   pgnn_extrap  pgnn plus compliance on Z^E
enum class ClmRecipe { physics, nn, pinn, pgnn, pgnn_extrap };

std::string to_string(ClmRecipe r);
ClmRecipe clm_recipe_from_string(const std::string& name);
std::vector<ClmRecipe> all_clm_recipes();

struct ClmStudyConfig {
  double ts = 1e-3;
  ClmParams plant;
  double train_lo = -0.1;
  double train_hi = 0.1;
  std::vector<double> velocities{0.025, 0.05, 0.075, 0.1, 0.125, 0.15};
  double a_max = 1.0;
  double j_max = 1000.0;
  double dwell = 0.25;
  /// Passes over the velocity suite in the training experiment.
  int repetitions = 3;
  DitherSpec dither{50.0, 0.5, 0};
  int hidden = 24;
  double lambda_nn_pgnn = 1e-5;
  double lambda_nn_nn = 3.2e-12;
  double eps = 1.0;
  double gamma = 0.1;
  double pinn_c = 0.5;
  OperatingRegion region;
  int ze_points = 500;
  double ze_eps = 0.0;
  RecipeTraining training;

  ClmStudyConfig();
};

/// Regressor window y(k+3) ... y(k-2) without past inputs.
RegressorSpec clm_regressor_spec();
Plant make_clm_plant(const ClmStudyConfig& cfg);
FeedbackLaw make_clm_feedback(double ts);
/// One back-and-forth move over the training range per velocity, the whole
/// suite repeated `repetitions` times.
std::vector<ReferenceTrajectory> clm_training_references(const ClmStudyConfig& cfg);
/// Move from `start` to `end` and back with the study's limits.
ReferenceTrajectory clm_test_reference(const ClmStudyConfig& cfg, double start, double end, double v_max,
                                       double a_max);

struct ClmIdentification {
  DataSet data;
  DataSet train_set;
  DataSet val_set;
  PhysicsFit physics;
  ExtrapolationSet ze;
  /// Z^E lifted to regressors.
  Eigen::MatrixXd ze_regressors;
};

ClmIdentification prepare_clm_identification(const SignalLog& log, const ClmStudyConfig& cfg);
PgnnModel train_clm_recipe(ClmRecipe recipe, const ClmIdentification& id, const ClmStudyConfig& cfg,
                           TrainReport* report = nullptr);

// ---------------------------------------------------------------------------
// Nonminimum-phase rotating-translating mass study

/// Feedforward recipes of the rotating mass study.
///   none             feedback only
///   physics_zpetc    linear inverse model, stabilized by ZPETC
///   pgnn_zpetc       ZPETC physics plus a network trained inside the stability set
///   physics_preview  linear inverse model with an extended preview window
///   pgnn_preview     preview physics plus a network trained inside the stability set
enum class RotatingRecipe { none, physics_zpetc, pgnn_zpetc, physics_preview, pgnn_preview };

std::string to_string(RotatingRecipe r);
RotatingRecipe rotating_recipe_from_string(const std::string& name);
std::vector<RotatingRecipe> all_rotating_recipes();

struct RotatingStudyConfig {
  double ts = 1e-3;
  RotatingParams plant;
  std::vector<MoveProfile> moves;
  double dwell = 0.5;
  int repetitions = 5;
  DitherSpec dither{50.0, 0.0, 0};
  RegressorSpec spec{4, 4, 0};
  int npw = 20;
  int hidden = 16;
  double eps = 1.0;
  RecipeTraining training;

  RotatingStudyConfig();
};

Plant make_rotating_plant(const RotatingStudyConfig& cfg);
FeedbackLaw make_rotating_feedback(double ts);
/// One pass of the study reference.
ReferenceTrajectory rotating_reference(const RotatingStudyConfig& cfg);

struct RotatingIdentification {
  DataSet base;
  DataSet preview;
  PhysicsFit base_fit;
  PhysicsFit preview_fit;
  ZpetcFilter zpetc;
  RegressorSpec preview_spec;
};

RotatingIdentification prepare_rotating_identification(const SignalLog& log,
                                                        const RotatingStudyConfig& cfg);
/// Returns no model for `none`.
std::optional<PgnnModel> build_rotating_controller(RotatingRecipe recipe, const RotatingIdentification& id,
                                                   const RotatingStudyConfig& cfg,
                                                   TrainReport* report = nullptr);

struct ControllerScore {
  std::string controller;
  std::string reference;
  double mae = 0.0;
  double mse = 0.0;
  bool aborted = false;
  std::string message;
};

nlohmann::json to_json(const ControllerScore& s);

/// Closed-loop run of one controller on one reference.
ControllerScore score_controller(const std::string& controller, const std::string& reference, const Plant& plant,
                                 const FeedbackLaw& fb, const std::optional<PgnnModel>& ff,
                                 const ReferenceTrajectory& ref, const SimulationOptions& opts = {});

}  // namespace pgnn
