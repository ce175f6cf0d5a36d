#include "pgnn/closed_loop.hpp"

#include <cmath>
#include <ostream>

#include "pgnn/error.hpp"
#include "pgnn/random.hpp"

namespace pgnn {

using Eigen::Index;
using Eigen::VectorXd;

FeedforwardRunner::FeedforwardRunner(PgnnModel model) : model_(std::move(model)) {
  model_.validate();
  past_ = VectorXd::Zero(model_.spec.input_terms());
}

void FeedforwardRunner::reset() { past_.setZero(); }

VectorXd FeedforwardRunner::regressor(const ReferenceTrajectory& ref, Index k) const {
  const RegressorSpec& s = model_.spec;
  VectorXd phi(s.size());
  for (int i = 0; i < s.output_terms(); ++i) phi(i) = ref.at(k + s.newest_output_offset() - i);
  phi.tail(s.input_terms()) = past_;
  return phi;
}

double FeedforwardRunner::step(const ReferenceTrajectory& ref, Index k) {
  const double u = predict(model_, regressor(ref, k));
  const Index n = past_.size();
  if (n > 0) {
    for (Index i = n - 1; i > 0; --i) past_(i) = past_(i - 1);
    past_(0) = u;
  }
  return u;
}

TrackingMetrics metrics(const Eigen::Ref<const VectorXd>& e) {
  if (e.size() == 0) throw InvalidArgument("metrics: empty trace");
  return {e.cwiseAbs().mean(), e.squaredNorm() / static_cast<double>(e.size())};
}

TrackingMetrics metrics(const ScenarioResult& result) { return metrics(result.e); }

ScenarioResult run_closed_loop(Plant plant, FeedbackLaw fb, const std::optional<PgnnModel>& ff,
                               const ReferenceTrajectory& ref, const SimulationOptions& opts) {
  if (std::abs(plant.ts() - fb.ts()) > 1e-12 * plant.ts() || std::abs(plant.ts() - ref.ts) > 1e-12 * plant.ts()) {
    throw InvalidArgument("closed loop: plant, controller and reference must share the sampling time");
  }
  if (ff && std::abs(ff->ts - plant.ts()) > 1e-12 * plant.ts()) {
    throw InvalidArgument("closed loop: feedforward model sampled at a different rate");
  }
  const Index n = ref.size();
  ScenarioResult res;
  for (VectorXd* v : {&res.r, &res.u_ff, &res.u_fb, &res.u, &res.y, &res.e, &res.dither}) {
    *v = VectorXd::Zero(n);
  }
  if (n == 0) return res;

  VectorXd x0 = VectorXd::Zero(plant.state_size());
  x0(0) = ref.at(0);
  plant.set_state(x0);
  fb.reset();
  std::optional<FeedforwardRunner> runner;
  if (ff) runner.emplace(*ff);

  Rng rng = make_rng(opts.dither.seed, 0xd1);
  const double sigma = std::sqrt(std::max(0.0, opts.dither.variance));
  const Index dither_from = static_cast<Index>(std::llround(opts.dither.start_fraction * static_cast<double>(n)));

  Index k = 0;
  for (; k < n; ++k) {
    double y = plant.output();
    if (opts.output_quantum > 0.0) y = opts.output_quantum * std::round(y / opts.output_quantum);
    const double r = ref.at(k);
    const double e = r - y;
    const double u_fb = fb.step(e);
    double u_ff = 0.0;
    if (runner) {
      u_ff = runner->step(ref, k);
      if (!std::isfinite(u_ff) || std::abs(u_ff) > opts.saturation_guard) {
        res.aborted = true;
        res.message = "feedforward left the saturation guard (|u_ff| = " + std::to_string(std::abs(u_ff)) +
                      ") at sample " + std::to_string(k);
        break;
      }
    }
    const double w = (sigma > 0.0 && k >= dither_from) ? sigma * standard_normal(rng) : 0.0;
    const double u = u_fb + u_ff + w;
    res.r(k) = r;
    res.y(k) = y;
    res.e(k) = e;
    res.u_fb(k) = u_fb;
    res.u_ff(k) = u_ff;
    res.dither(k) = w;
    res.u(k) = u;
    try {
      plant.step(u);
    } catch (const Diverged& ex) {
      res.aborted = true;
      res.message = std::string(ex.what()) + " at sample " + std::to_string(k);
      ++k;
      break;
    }
  }
  if (k < n) {
    for (VectorXd* v : {&res.r, &res.u_ff, &res.u_fb, &res.u, &res.y, &res.e, &res.dither}) {
      v->conservativeResize(k);
    }
  }
  if (res.size() > 0) {
    const TrackingMetrics m = metrics(res.e);
    res.mae = m.mae;
    res.mse = m.mse;
  }
  if (res.aborted) {
    res.mae = std::numeric_limits<double>::infinity();
    res.mse = std::numeric_limits<double>::infinity();
  }
  return res;
}

TrainingExperiment generate_training_experiment(const Plant& plant, const FeedbackLaw& fb,
                                                const std::vector<ReferenceTrajectory>& references,
                                                const DitherSpec& dither) {
  TrainingExperiment out;
  out.log.ts = plant.ts();
  ReferenceTrajectory all;
  all.ts = plant.ts();
  for (const auto& r : references) all.append(r, false);
  if (all.size() == 0) {
    out.log.t.resize(0);
    out.log.u.resize(0);
    out.log.y.resize(0);
    return out;
  }
  SimulationOptions opts;
  opts.dither = dither;
  out.run = run_closed_loop(plant, fb, std::nullopt, all, opts);
  if (out.run.aborted) throw Diverged("training experiment: " + out.run.message);
  const Index n = out.run.size();
  out.log.t = VectorXd::LinSpaced(n, 0.0, plant.ts() * static_cast<double>(n - 1));
  out.log.u = out.run.u;
  out.log.y = out.run.y;
  return out;
}

void write_trace_csv(std::ostream& out, const ScenarioResult& res, double ts) {
  out << "t,r,u_ff,u_fb,u,y,e\n";
  for (Index k = 0; k < res.size(); ++k) {
    out << format_double(ts * static_cast<double>(k)) << ',' << format_double(res.r(k)) << ','
        << format_double(res.u_ff(k)) << ',' << format_double(res.u_fb(k)) << ',' << format_double(res.u(k))
        << ',' << format_double(res.y(k)) << ',' << format_double(res.e(k)) << '\n';
  }
}

nlohmann::json to_json(const TrackingMetrics& m) { return {{"mae", m.mae}, {"mse", m.mse}}; }

}  // namespace pgnn
