#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "pgnn/closed_loop.hpp"
#include "pgnn/config.hpp"
#include "pgnn/error.hpp"
#include "pgnn/experiments.hpp"
#include "pgnn/extrap.hpp"
#include "pgnn/model.hpp"
#include "pgnn/stability.hpp"
#include "pgnn/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pgnn;

namespace {

struct Options {
  fs::path config;
  std::optional<std::uint64_t> seed;
  fs::path out;
  fs::path data;
  fs::path model;
  std::string recipe;
};

struct Context {
  PipelineConfig cfg;
  fs::path out;
  fs::path data;
  fs::path model;
  std::string recipe;
  /// Recipe named on the command line; compare runs all recipes without it.
  std::string cli_recipe;

  json header() const { return {{"config_hash", cfg.hash}, {"seed", cfg.seed}, {"study", cfg.study}}; }
};

Context make_context(const Options& o) {
  Context ctx;
  ctx.cfg = o.config.empty() ? parse_config("") : load_config(o.config);
  if (o.seed) apply_seed(ctx.cfg, *o.seed);
  ctx.out = o.out.empty() ? ctx.cfg.output : o.out;
  ctx.data = !o.data.empty() ? o.data : (!ctx.cfg.data.empty() ? ctx.cfg.data : ctx.out / "log.csv");
  ctx.model = !o.model.empty() ? o.model : ctx.cfg.model;
  ctx.recipe = !o.recipe.empty() ? o.recipe : ctx.cfg.recipe;
  ctx.cli_recipe = o.recipe;
  fs::create_directories(ctx.out);
  return ctx;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + path.string() + "'");
  return out;
}

Plant study_plant(const PipelineConfig& cfg) {
  return cfg.study == "clm" ? make_clm_plant(cfg.clm) : make_rotating_plant(cfg.rotating);
}

FeedbackLaw study_feedback(const PipelineConfig& cfg) {
  return cfg.study == "clm" ? make_clm_feedback(cfg.clm.ts) : make_rotating_feedback(cfg.rotating.ts);
}

SignalLog generate_log(const PipelineConfig& cfg) {
  std::vector<ReferenceTrajectory> refs;
  DitherSpec dither;
  if (cfg.study == "clm") {
    refs = clm_training_references(cfg.clm);
    dither = cfg.clm.dither;
  } else {
    refs.assign(static_cast<std::size_t>(cfg.rotating.repetitions), rotating_reference(cfg.rotating));
    dither = cfg.rotating.dither;
  }
  return generate_training_experiment(study_plant(cfg), study_feedback(cfg), refs, dither).log;
}

json model_document(const PgnnModel& m, const Context& ctx, const std::string& recipe) {
  json j = model_to_json(m);
  j["config_hash"] = ctx.cfg.hash;
  j["seed"] = ctx.cfg.seed;
  j["recipe"] = recipe;
  return j;
}

// ---------------------------------------------------------------------------

int cmd_gen_data(const Context& ctx) {
  const SignalLog log = generate_log(ctx.cfg);
  const fs::path path = ctx.out / "log.csv";
  write_log_csv(path, log);
  json j = ctx.header();
  j["log"] = path.string();
  j["samples"] = log.size();
  j["ts"] = log.ts;
  write_json(ctx.out / "gen-data.json", j);
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_identify(const Context& ctx) {
  const SignalLog log = read_log_csv(ctx.data);
  const RegressorSpec spec = ctx.cfg.effective_spec();
  const DataSet ds = build_regressors(log, spec);
  const PhysicsFit fit = fit_physics(ctx.cfg.physics_kind, ds);
  json j = ctx.header();
  j["physics"] = to_string(ctx.cfg.physics_kind);
  j["spec"] = to_json(spec);
  j["fit"] = to_json(fit);
  if (ctx.cfg.study == "rotating" && ctx.cfg.physics_kind == PhysicsKind::linear) {
    j["zpetc"] = to_json(zpetc_inverse(forward_from_inverse(fit.theta, spec)));
  }
  write_json(ctx.out / "physics.json", j);
  std::cout << j.dump(2) << '\n';
  return 0;
}

/// Trains one recipe and writes its model, report and trace. Returns the model
/// (none for the feedback-only recipe).
std::optional<PgnnModel> train_recipe(const Context& ctx, const std::string& recipe, const SignalLog& log,
                                      json& summary) {
  TrainReport report;
  std::optional<PgnnModel> model;
  bool trained = true;
  if (ctx.cfg.study == "clm") {
    const ClmIdentification id = prepare_clm_identification(log, ctx.cfg.clm);
    const ClmRecipe r = clm_recipe_from_string(recipe);
    model = train_clm_recipe(r, id, ctx.cfg.clm, &report);
    trained = r != ClmRecipe::physics;
  } else {
    const RotatingIdentification id = prepare_rotating_identification(log, ctx.cfg.rotating);
    const RotatingRecipe r = rotating_recipe_from_string(recipe);
    model = build_rotating_controller(r, id, ctx.cfg.rotating, &report);
    trained = r == RotatingRecipe::pgnn_zpetc || r == RotatingRecipe::pgnn_preview;
  }
  json entry = ctx.header();
  entry["recipe"] = recipe;
  if (model) {
    const fs::path path = ctx.out / ("model_" + recipe + ".json");
    write_json(path, model_document(*model, ctx, recipe));
    entry["model"] = path.string();
  }
  if (trained) {
    json rep = to_json(report);
    rep["config_hash"] = ctx.cfg.hash;
    rep["recipe"] = recipe;
    write_json(ctx.out / ("train_report_" + recipe + ".json"), rep);
    std::ofstream trace = open_out(ctx.out / ("train_trace_" + recipe + ".csv"));
    write_trace_csv(trace, report);
    entry["breakdown"] = to_json(report.breakdown);
    entry["selected_restart"] = report.selected_restart;
  }
  summary = entry;
  return model;
}

int cmd_train(const Context& ctx) {
  if (ctx.recipe.empty()) throw InvalidArgument("train: no recipe given (model.recipe or --recipe)");
  const SignalLog log = read_log_csv(ctx.data);
  json summary;
  train_recipe(ctx, ctx.recipe, log, summary);
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int cmd_certify(const Context& ctx) {
  if (ctx.model.empty()) throw InvalidArgument("certify: no model given (paths.model or --model)");
  const PgnnModel m = load_model(ctx.model);
  const FeedforwardStateSpace ss = to_state_space(m);
  const IssCertificate cert =
      certify_iss(ss, ctx.cfg.q_scale * Eigen::MatrixXd::Identity(ss.state_size(), ss.state_size()));
  json j = ctx.header();
  j["model"] = ctx.model.string();
  j["certificate"] = to_json(cert);
  j["verdict"] = verdict_summary(cert);
  write_json(ctx.out / "certificate.json", j);
  std::cout << verdict_summary(cert) << '\n';
  return 0;
}

int cmd_gen_ze(const Context& ctx) {
  const SignalLog log = read_log_csv(ctx.data);
  const RegressorSpec spec = ctx.cfg.effective_spec();
  const DataSet ds = build_regressors(log, spec);
  const OperatingRegion& region = ctx.cfg.clm.region;
  const Eigen::MatrixXd covered = project_regressors(region, spec, ds.ts, ds.regressors);
  const ExtrapolationSet ze = generate_ze(region, covered, ctx.cfg.clm.ze_points, ctx.cfg.clm.ze_eps);
  std::ofstream csv = open_out(ctx.out / "ze.csv");
  write_ze_csv(csv, region, ze);
  json j = ctx.header();
  j["region"] = to_json(region);
  j["ze"] = to_json(ze);
  write_json(ctx.out / "ze.json", j);
  std::cout << "selected " << ze.size() << " points from a grid of " << region.grid_size() << '\n';
  return 0;
}

struct Scenario {
  std::string controller;
  std::optional<PgnnModel> model;
};

struct NamedReference {
  std::string name;
  ReferenceTrajectory trajectory;
};

std::vector<NamedReference> scenario_references(const PipelineConfig& cfg) {
  std::vector<ReferenceEntry> entries = cfg.references;
  if (cfg.robustness_sweep) {
    for (ReferenceEntry& e : robustness_references(cfg.clm)) entries.push_back(e);
  }
  std::vector<NamedReference> refs;
  for (const ReferenceEntry& e : entries) refs.push_back({e.name, build_reference(e, cfg.ts())});
  return refs;
}

/// Runs every (controller, reference) pair in parallel and writes the traces and the MAE table.
json run_table(const Context& ctx, const std::vector<Scenario>& controllers,
               const std::vector<NamedReference>& refs, const std::string& stem) {
  const Plant plant = study_plant(ctx.cfg);
  const FeedbackLaw fb = study_feedback(ctx.cfg);
  const fs::path trace_dir = ctx.out / "traces";
  fs::create_directories(trace_dir);

  struct Job {
    std::size_t c, r;
    std::future<ScenarioResult> result;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < controllers.size(); ++c) {
    for (std::size_t r = 0; r < refs.size(); ++r) {
      jobs.push_back({c, r, std::async(std::launch::async, [&, c, r] {
                        return run_closed_loop(plant, fb, controllers[c].model, refs[r].trajectory);
                      })});
    }
  }
  json rows = json::array();
  std::ofstream csv = open_out(ctx.out / (stem + ".csv"));
  csv << "controller,reference,mae,mse,aborted\n";
  for (Job& job : jobs) {
    const ScenarioResult res = job.result.get();
    const std::string& cname = controllers[job.c].controller;
    const std::string& rname = refs[job.r].name;
    std::ofstream trace = open_out(trace_dir / (cname + "__" + rname + ".csv"));
    write_trace_csv(trace, res, ctx.cfg.ts());
    ControllerScore s{cname, rname, res.mae, res.mse, res.aborted, res.message};
    rows.push_back(to_json(s));
    csv << cname << ',' << rname << ',' << format_double(res.mae) << ',' << format_double(res.mse) << ','
        << (res.aborted ? 1 : 0) << '\n';
  }
  json j = ctx.header();
  j["rows"] = rows;
  write_json(ctx.out / (stem + ".json"), j);
  return j;
}

int cmd_simulate(const Context& ctx) {
  std::vector<Scenario> controllers;
  for (const ControllerEntry& e : ctx.cfg.controllers) {
    Scenario s{e.name, std::nullopt};
    if (!e.model.empty()) s.model = load_model(e.model);
    controllers.push_back(std::move(s));
  }
  const json table = run_table(ctx, controllers, scenario_references(ctx.cfg), "mae_table");
  std::cout << "wrote " << table["rows"].size() << " rows to " << (ctx.out / "mae_table.json").string() << '\n';
  return 0;
}

/// Default comparison references: the in-range velocity suite plus one move
/// beyond the training range, or the rotating study's reference.
std::vector<NamedReference> default_references(const PipelineConfig& cfg) {
  std::vector<NamedReference> refs;
  if (cfg.study == "clm") {
    const ClmStudyConfig& c = cfg.clm;
    for (double v : c.velocities) {
      const ReferenceEntry e{"", {c.train_lo, c.train_hi, v, c.a_max, c.j_max}, false, c.dwell};
      refs.push_back({"in_v" + format_double(v), build_reference(e, c.ts)});
    }
    const ReferenceEntry e{"", {c.train_lo, 0.15, 0.1, c.a_max, c.j_max}, false, c.dwell};
    refs.push_back({"beyond_range", build_reference(e, c.ts)});
  } else {
    refs.push_back({"study", rotating_reference(cfg.rotating)});
  }
  return refs;
}

int cmd_compare(const Context& ctx) {
  const SignalLog log = generate_log(ctx.cfg);
  write_log_csv(ctx.out / "log.csv", log);
  std::vector<std::string> recipes;
  if (!ctx.cli_recipe.empty()) {
    recipes.push_back(ctx.cli_recipe);
  } else if (ctx.cfg.study == "clm") {
    for (ClmRecipe r : all_clm_recipes()) recipes.push_back(to_string(r));
  } else {
    for (RotatingRecipe r : all_rotating_recipes()) recipes.push_back(to_string(r));
  }
  std::vector<Scenario> controllers;
  if (ctx.cfg.study == "clm") controllers.push_back({"none", std::nullopt});
  json training = json::array();
  for (const std::string& r : recipes) {
    json summary;
    controllers.push_back({r, train_recipe(ctx, r, log, summary)});
    training.push_back(summary);
    std::cerr << "trained " << r << '\n';
  }
  std::vector<NamedReference> refs = scenario_references(ctx.cfg);
  if (refs.empty()) refs = default_references(ctx.cfg);
  json table = run_table(ctx, controllers, refs, "compare");
  table["training"] = training;
  write_json(ctx.out / "compare.json", table);
  for (const json& row : table["rows"]) {
    std::cout << row["controller"].get<std::string>() << ' ' << row["reference"].get<std::string>()
              << " mae=" << row["mae"].dump() << " mse=" << row["mse"].dump() << '\n';
  }
  return 0;
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const InvalidArgument*>(&e)) return "invalid_argument";
  if (dynamic_cast<const IllConditioned*>(&e)) return "ill_conditioned";
  if (dynamic_cast<const NotSchur*>(&e)) return "not_schur";
  if (dynamic_cast<const Diverged*>(&e)) return "diverged";
  return "error";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Physics-guided neural network feedforward toolkit"};
  app.require_subcommand(1);
  Options opt;
  std::uint64_t seed = 0;
  app.add_option("--config", opt.config, "Experiment config (TOML)");
  auto* seed_opt = app.add_option("--seed", seed, "Seed for every random stream");
  app.add_option("--out", opt.out, "Output directory (default: paths.output)");

  const auto add = [&](const std::string& name, const std::string& help) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->fallthrough();
    return sub;
  };
  CLI::App* gen_data = add("gen-data", "Simulate the closed-loop training experiment and write the log");
  CLI::App* identify = add("identify", "Fit the physics parameters by least squares");
  CLI::App* train = add("train", "Train one controller recipe");
  CLI::App* certify = add("certify", "Check input-to-state stability of a feedforward model");
  CLI::App* gen_ze = add("gen-ze", "Select the extrapolation set");
  CLI::App* simulate = add("simulate", "Run the scenario table");
  CLI::App* compare = add("compare", "Run the whole study and tabulate every recipe");
  for (CLI::App* sub : {identify, train, gen_ze}) sub->add_option("--data", opt.data, "Input/output log CSV");
  for (CLI::App* sub : {train, compare}) sub->add_option("--recipe", opt.recipe, "Controller recipe");
  certify->add_option("--model", opt.model, "Model JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", {{"kind", "usage"}, {"message", e.what()}}}}.dump() << '\n';
    return 2;
  }
  if (seed_opt->count() > 0) opt.seed = seed;

  try {
    const Context ctx = make_context(opt);
    if (*gen_data) return cmd_gen_data(ctx);
    if (*identify) return cmd_identify(ctx);
    if (*train) return cmd_train(ctx);
    if (*certify) return cmd_certify(ctx);
    if (*gen_ze) return cmd_gen_ze(ctx);
    if (*simulate) return cmd_simulate(ctx);
    if (*compare) return cmd_compare(ctx);
  } catch (const std::exception& e) {
    std::cerr << json{{"error", {{"kind", error_kind(e)}, {"message", e.what()}}}}.dump() << '\n';
    return 1;
  }
  return 1;
}
