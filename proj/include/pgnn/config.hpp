#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pgnn/data.hpp"
#include "pgnn/experiments.hpp"
#include "pgnn/model.hpp"

namespace pgnn {

/// Named feedforward controller of a simulation table. An empty model path
/// means feedback only.
struct ControllerEntry {
  std::string name;
  std::filesystem::path model;
};

/// Named reference. `back` returns to the start after the move.
struct ReferenceEntry {
  std::string name;
  MoveProfile move;
  bool back = true;
  double dwell = 0.25;
};

/// Declarative description of one experiment. Relative paths are resolved
/// against the directory of the config file.
struct PipelineConfig {
  std::string study = "clm";
  std::uint64_t seed = 0;
  /// FNV-1a hash of the config text, as 16 hex digits.
  std::string hash;

  std::filesystem::path data;
  std::filesystem::path model;
  std::filesystem::path physics;
  std::filesystem::path output = "out";

  /// Regressor layout for identify/train/gen-ze; empty means the study default.
  std::optional<RegressorSpec> regressor;
  PhysicsKind physics_kind = PhysicsKind::linear;
  std::string recipe;

  ClmStudyConfig clm;
  RotatingStudyConfig rotating;

  /// Q = q_scale * I for certification.
  double q_scale = 1.0;

  std::vector<ControllerEntry> controllers;
  std::vector<ReferenceEntry> references;
  /// Appends the 17-reference robustness sweep (5 end positions, 7 velocities, 5 accelerations).
  bool robustness_sweep = false;

  /// Regressor layout in effect for the study.
  RegressorSpec effective_spec() const;
  RecipeTraining& training();
  const RecipeTraining& training() const;
  double ts() const;
};

/// Parses TOML text; unknown keys and wrong types raise InvalidArgument.
PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);
/// Sets the seed of every random stream the config drives.
void apply_seed(PipelineConfig& cfg, std::uint64_t seed);

std::uint64_t fnv1a64(const std::string& text);
std::string hex64(std::uint64_t value);

/// References of the robustness sweep, in the order positions, velocities, accelerations.
std::vector<ReferenceEntry> robustness_references(const ClmStudyConfig& cfg);
ReferenceTrajectory build_reference(const ReferenceEntry& entry, double ts);

nlohmann::json to_json(const PipelineConfig& cfg);

}  // namespace pgnn
