#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pgnn/data.hpp"
#include "pgnn/feedback.hpp"
#include "pgnn/model.hpp"
#include "pgnn/plant.hpp"
#include "pgnn/reference.hpp"

namespace pgnn {

/// Runs an inverse model as a feedforward filter: the regressor is filled
/// with reference samples in place of outputs and with the filter's own past
/// outputs in place of inputs.
class FeedforwardRunner {
 public:
  explicit FeedforwardRunner(PgnnModel model);

  const PgnnModel& model() const { return model_; }
  void reset();
  /// u_ff(k); the reference supplies r(k + nk + 1) ... r(k + nk - na + 1).
  double step(const ReferenceTrajectory& ref, Eigen::Index k);
  /// Regressor used at step k before the call to step(k).
  Eigen::VectorXd regressor(const ReferenceTrajectory& ref, Eigen::Index k) const;

 private:
  PgnnModel model_;
  Eigen::VectorXd past_;  // u_ff(k-1), ..., u_ff(k-nb+1)
};

/// White input noise applied from `start_fraction` of the run to its end.
struct DitherSpec {
  double variance = 0.0;
  double start_fraction = 0.0;
  std::uint64_t seed = 0;
};

struct SimulationOptions {
  /// Abort when |u_ff| exceeds this (or is not finite).
  double saturation_guard = 1e6;
  DitherSpec dither;
  /// Output quantization step; 0 disables it.
  double output_quantum = 0.0;
};

struct ScenarioResult {
  Eigen::VectorXd r;
  Eigen::VectorXd u_ff;
  Eigen::VectorXd u_fb;
  Eigen::VectorXd u;
  Eigen::VectorXd y;
  Eigen::VectorXd e;
  Eigen::VectorXd dither;
  double mae = 0.0;
  double mse = 0.0;
  bool aborted = false;
  std::string message;

  Eigen::Index size() const { return e.size(); }
};

struct TrackingMetrics {
  double mae = 0.0;
  double mse = 0.0;
};

/// Mean absolute and mean squared error. Throws on an empty trace.
TrackingMetrics metrics(const Eigen::Ref<const Eigen::VectorXd>& e);
TrackingMetrics metrics(const ScenarioResult& result);

/// Per step: y(k) is sampled, e = r - y, u = u_fb + u_ff (+ dither) is held
/// over the next interval. The plant starts at rest on r(0) and the
/// controllers start from zero state. A feedforward that leaves the
/// saturation guard ends the run early with `aborted` set.
ScenarioResult run_closed_loop(Plant plant, FeedbackLaw fb, const std::optional<PgnnModel>& ff,
                               const ReferenceTrajectory& ref, const SimulationOptions& opts = {});

/// Closed-loop run over the concatenated references with input dither.
/// The logged input includes the dither.
struct TrainingExperiment {
  SignalLog log;
  ScenarioResult run;
};

TrainingExperiment generate_training_experiment(const Plant& plant, const FeedbackLaw& fb,
                                                const std::vector<ReferenceTrajectory>& references,
                                                const DitherSpec& dither);

/// t,r,u_ff,u_fb,u,y,e rows.
void write_trace_csv(std::ostream& out, const ScenarioResult& result, double ts);
nlohmann::json to_json(const TrackingMetrics& m);

}  // namespace pgnn
