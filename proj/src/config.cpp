#include "pgnn/config.hpp"

#include <toml.hpp>

#include <fstream>
#include <set>
#include <sstream>

#include "pgnn/error.hpp"

namespace pgnn {

namespace fs = std::filesystem;

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, value >>= 4) out[static_cast<std::size_t>(i)] = kDigits[value & 0xf];
  return out;
}

RegressorSpec PipelineConfig::effective_spec() const {
  if (regressor) return *regressor;
  return study == "clm" ? clm_regressor_spec() : rotating.spec;
}

RecipeTraining& PipelineConfig::training() { return study == "clm" ? clm.training : rotating.training; }
const RecipeTraining& PipelineConfig::training() const {
  return study == "clm" ? clm.training : rotating.training;
}

double PipelineConfig::ts() const { return study == "clm" ? clm.ts : rotating.ts; }

namespace {

/// Reads keys of one table and remembers which ones were consumed, so that
/// leftovers can be reported as unknown.
class Section {
 public:
  Section(const toml::table* table, std::string path) : table_(table), path_(std::move(path)) {}

  bool present() const { return table_ != nullptr; }

  template <typename T>
  void get(const std::string& key, T& out) {
    const toml::node* node = lookup(key);
    if (!node) return;
    if constexpr (std::is_same_v<T, bool>) {
      if (!node->is_boolean()) fail(key, "a boolean");
      out = node->as_boolean()->get();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!node->is_string()) fail(key, "a string");
      out = node->as_string()->get();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (node->is_floating_point()) {
        out = static_cast<T>(node->as_floating_point()->get());
      } else if (node->is_integer()) {
        out = static_cast<T>(node->as_integer()->get());
      } else {
        fail(key, "a number");
      }
    } else {
      if (!node->is_integer()) fail(key, "an integer");
      const auto v = node->as_integer()->get();
      if constexpr (std::is_unsigned_v<T>) {
        if (v < 0) fail(key, "a non-negative integer");
      }
      out = static_cast<T>(v);
    }
  }

  void get(const std::string& key, fs::path& out) {
    std::string s;
    if (!lookup(key)) return;
    get(key, s);
    out = s;
  }

  void get(const std::string& key, std::vector<double>& out) {
    const toml::node* node = lookup(key);
    if (!node) return;
    if (!node->is_array()) fail(key, "an array of numbers");
    out.clear();
    for (const auto& el : *node->as_array()) {
      if (el.is_floating_point()) {
        out.push_back(el.as_floating_point()->get());
      } else if (el.is_integer()) {
        out.push_back(static_cast<double>(el.as_integer()->get()));
      } else {
        fail(key, "an array of numbers");
      }
    }
  }

  Section table(const std::string& key) {
    const toml::node* node = lookup(key);
    if (!node) return {nullptr, join(key)};
    if (!node->is_table()) fail(key, "a table");
    return {node->as_table(), join(key)};
  }

  std::vector<Section> array_of_tables(const std::string& key) {
    std::vector<Section> out;
    const toml::node* node = lookup(key);
    if (!node) return out;
    if (!node->is_array_of_tables()) fail(key, "an array of tables");
    int i = 0;
    for (const auto& el : *node->as_array()) {
      out.emplace_back(el.as_table(), join(key) + "[" + std::to_string(i++) + "]");
    }
    return out;
  }

  /// Throws on keys that were never read.
  void finish() const {
    if (!table_) return;
    for (const auto& [k, v] : *table_) {
      const std::string key(k.str());
      if (!used_.count(key)) throw InvalidArgument("config: unknown key '" + join(key) + "'");
    }
  }

 private:
  const toml::node* lookup(const std::string& key) {
    used_.insert(key);
    if (!table_) return nullptr;
    return table_->get(key);
  }
  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw InvalidArgument("config: '" + join(key) + "' must be " + what);
  }

  const toml::table* table_;
  std::string path_;
  std::set<std::string> used_;
};

void read_move(Section& s, MoveProfile& m) {
  s.get("start", m.start);
  s.get("end", m.end);
  s.get("v_max", m.v_max);
  s.get("a_max", m.a_max);
  s.get("j_max", m.j_max);
}

void read_training(Section s, RecipeTraining& t) {
  s.get("restarts", t.restarts);
  s.get("max_epochs", t.max_epochs);
  s.get("patience", t.patience);
  s.get("train_fraction", t.train_fraction);
  s.get("stride", t.stride);
  s.get("threads", t.threads);
  s.finish();
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return (base / p).lexically_normal();
}

}  // namespace

std::vector<ReferenceEntry> robustness_references(const ClmStudyConfig& cfg) {
  std::vector<ReferenceEntry> out;
  const double v0 = 0.1, a0 = 1.0;
  for (double end : {-0.05, 0.0, 0.05, 0.1, 0.15}) {
    out.push_back({"end_" + format_double(end), {cfg.train_lo, end, v0, a0, cfg.j_max}, false, cfg.dwell});
  }
  for (double v : {0.025, 0.05, 0.075, 0.1, 0.125, 0.15, 0.2}) {
    out.push_back({"vel_" + format_double(v), {cfg.train_lo, cfg.train_hi, v, a0, cfg.j_max}, false, cfg.dwell});
  }
  for (double a : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    out.push_back({"acc_" + format_double(a), {cfg.train_lo, cfg.train_hi, v0, a, cfg.j_max}, false, cfg.dwell});
  }
  return out;
}

ReferenceTrajectory build_reference(const ReferenceEntry& e, double ts) {
  if (!e.back) return make_reference(e.move, ts, e.dwell, e.dwell);
  const MoveProfile back{e.move.end, e.move.start, e.move.v_max, e.move.a_max, e.move.j_max};
  return make_sequence({e.move, back}, ts, e.dwell, e.dwell);
}

PipelineConfig parse_config(const std::string& text, const fs::path& base_dir) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config: " << e.description() << " at line " << e.source().begin.line;
    throw InvalidArgument(msg.str());
  }
  PipelineConfig cfg;
  cfg.hash = hex64(fnv1a64(text));
  Section top(&root, "");
  top.get("study", cfg.study);
  if (cfg.study != "clm" && cfg.study != "rotating") {
    throw InvalidArgument("config: study must be 'clm' or 'rotating'");
  }
  top.get("seed", cfg.seed);
  apply_seed(cfg, cfg.seed);

  {
    Section s = top.table("paths");
    s.get("data", cfg.data);
    s.get("model", cfg.model);
    s.get("physics", cfg.physics);
    s.get("output", cfg.output);
    s.finish();
  }
  if (Section s = top.table("regressor"); s.present()) {
    RegressorSpec spec = cfg.effective_spec();
    s.get("na", spec.na);
    s.get("nb", spec.nb);
    s.get("nk", spec.nk);
    s.finish();
    spec.validate();
    cfg.regressor = spec;
    if (cfg.study == "rotating") cfg.rotating.spec = spec;
  }
  {
    Section s = top.table("model");
    std::string physics = to_string(cfg.study == "clm" ? PhysicsKind::clm : PhysicsKind::linear);
    s.get("physics", physics);
    cfg.physics_kind = physics_kind_from_string(physics);
    s.get("recipe", cfg.recipe);
    int hidden = cfg.study == "clm" ? cfg.clm.hidden : cfg.rotating.hidden;
    s.get("hidden", hidden);
    if (hidden < 1) throw InvalidArgument("config: model.hidden must be >= 1");
    cfg.clm.hidden = hidden;
    cfg.rotating.hidden = hidden;
    s.finish();
  }
  {
    Section s = top.table("cost");
    s.get("eps", cfg.clm.eps);
    cfg.rotating.eps = cfg.clm.eps;
    s.get("gamma", cfg.clm.gamma);
    s.get("c", cfg.clm.pinn_c);
    s.get("lambda_nn", cfg.clm.lambda_nn_pgnn);
    s.get("lambda_nn_black_box", cfg.clm.lambda_nn_nn);
    s.finish();
    if (!(cfg.clm.eps > 0.0)) throw InvalidArgument("config: cost.eps must be positive");
  }
  RecipeTraining training = cfg.training();
  read_training(top.table("train"), training);
  cfg.training() = training;
  if (Section s = top.table("region"); s.present()) {
    cfg.clm.region.axes.clear();
    for (Section a : s.array_of_tables("axis")) {
      RegionAxis axis;
      std::string kind = "position";
      a.get("name", axis.name);
      a.get("kind", kind);
      axis.kind = axis_kind_from_string(kind);
      if (axis.name.empty()) axis.name = kind;
      a.get("lo", axis.lo);
      a.get("hi", axis.hi);
      a.get("resolution", axis.resolution);
      a.finish();
      cfg.clm.region.axes.push_back(axis);
    }
    s.finish();
    cfg.clm.region.validate();
  }
  {
    Section s = top.table("extrap");
    s.get("max_points", cfg.clm.ze_points);
    s.get("eps", cfg.clm.ze_eps);
    s.finish();
  }
  {
    Section s = top.table("stability");
    s.get("q_scale", cfg.q_scale);
    s.get("npw", cfg.rotating.npw);
    s.finish();
    if (!(cfg.q_scale > 0.0)) throw InvalidArgument("config: stability.q_scale must be positive");
  }
  {
    Section s = top.table("plant");
    std::string kind = cfg.study == "clm" ? "clm_synthetic" : "rotating_translating";
    s.get("kind", kind);
    if (plant_kind_from_string(kind) != (cfg.study == "clm" ? PlantKind::clm_synthetic
                                                             : PlantKind::rotating_translating)) {
      throw InvalidArgument("config: plant.kind does not match the study");
    }
    s.get("ts", cfg.clm.ts);
    cfg.rotating.ts = cfg.clm.ts;
    if (cfg.study == "clm") {
      auto& p = cfg.clm.plant;
      s.get("m", p.m);
      s.get("f_v", p.f_v);
      s.get("f_c", p.f_c);
      s.get("amplitude", p.amplitude);
      s.get("pitch", p.pitch);
    } else {
      auto& p = cfg.rotating.plant;
      s.get("m", p.m);
      s.get("l_x", p.l_x);
      s.get("l_y", p.l_y);
      p.M = RotatingParams::from_geometry(p.m, p.l_x, p.l_y).M;
      s.get("M", p.M);
      s.get("f_v", p.f_v);
      s.get("k", p.k);
      s.get("d", p.d);
      s.get("l_m", p.l_m);
      s.get("c", p.c);
    }
    s.finish();
  }
  {
    Section s = top.table("experiment");
    s.get("dither_variance", cfg.clm.dither.variance);
    cfg.rotating.dither.variance = cfg.clm.dither.variance;
    double start = cfg.study == "clm" ? cfg.clm.dither.start_fraction : cfg.rotating.dither.start_fraction;
    s.get("dither_start", start);
    cfg.clm.dither.start_fraction = start;
    cfg.rotating.dither.start_fraction = start;
    int reps = cfg.study == "clm" ? cfg.clm.repetitions : cfg.rotating.repetitions;
    s.get("repetitions", reps);
    if (reps < 1) throw InvalidArgument("config: experiment.repetitions must be >= 1");
    cfg.clm.repetitions = reps;
    cfg.rotating.repetitions = reps;
    double dwell = cfg.study == "clm" ? cfg.clm.dwell : cfg.rotating.dwell;
    s.get("dwell", dwell);
    cfg.clm.dwell = dwell;
    cfg.rotating.dwell = dwell;
    s.get("velocities", cfg.clm.velocities);
    s.get("train_lo", cfg.clm.train_lo);
    s.get("train_hi", cfg.clm.train_hi);
    s.get("a_max", cfg.clm.a_max);
    s.get("j_max", cfg.clm.j_max);
    std::vector<Section> moves = s.array_of_tables("move");
    if (!moves.empty()) cfg.rotating.moves.clear();
    for (Section m : moves) {
      MoveProfile mp;
      read_move(m, mp);
      m.finish();
      mp.validate();
      cfg.rotating.moves.push_back(mp);
    }
    s.finish();
  }
  for (Section c : top.array_of_tables("controller")) {
    ControllerEntry e;
    c.get("name", e.name);
    c.get("model", e.model);
    c.finish();
    if (e.name.empty()) throw InvalidArgument("config: every controller needs a name");
    e.model = resolve(base_dir, e.model);
    cfg.controllers.push_back(e);
  }
  for (Section r : top.array_of_tables("reference")) {
    ReferenceEntry e;
    e.dwell = cfg.study == "clm" ? cfg.clm.dwell : cfg.rotating.dwell;
    r.get("name", e.name);
    read_move(r, e.move);
    r.get("back", e.back);
    r.get("dwell", e.dwell);
    r.finish();
    if (e.name.empty()) throw InvalidArgument("config: every reference needs a name");
    e.move.validate();
    cfg.references.push_back(e);
  }
  {
    Section s = top.table("simulate");
    s.get("robustness_sweep", cfg.robustness_sweep);
    s.finish();
  }
  top.finish();

  cfg.data = resolve(base_dir, cfg.data);
  cfg.model = resolve(base_dir, cfg.model);
  cfg.physics = resolve(base_dir, cfg.physics);
  cfg.output = resolve(base_dir, cfg.output);
  return cfg;
}

void apply_seed(PipelineConfig& cfg, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.clm.training.seed = seed;
  cfg.clm.dither.seed = seed;
  cfg.rotating.training.seed = seed;
  cfg.rotating.dither.seed = seed;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("config: cannot open '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.parent_path());
}

nlohmann::json to_json(const PipelineConfig& cfg) {
  nlohmann::json refs = nlohmann::json::array();
  for (const auto& r : cfg.references) refs.push_back({{"name", r.name}, {"move", to_json(r.move)}, {"back", r.back}});
  nlohmann::json ctrls = nlohmann::json::array();
  for (const auto& c : cfg.controllers) ctrls.push_back({{"name", c.name}, {"model", c.model.string()}});
  return {{"study", cfg.study},
          {"seed", cfg.seed},
          {"config_hash", cfg.hash},
          {"regressor", to_json(cfg.effective_spec())},
          {"recipe", cfg.recipe},
          {"controllers", ctrls},
          {"references", refs},
          {"robustness_sweep", cfg.robustness_sweep}};
}

}  // namespace pgnn
