#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "pixie/grid.hpp"
#include "pixie/materials.hpp"
#include "pixie/mpm.hpp"
#include "pixie/predictor.hpp"
#include "pixie/segmentation.hpp"
#include "pixie/synth.hpp"

namespace pixie::config {

using Json = nlohmann::ordered_json;

// Parses a file or string; syntax errors become SchemaError.
Json load_json_file(const std::filesystem::path& path);
Json parse_json(const std::string& text);

// Material specs: {"parts": {name: {"material", "E", "nu", "density"}},
// "constraints": [...]}. Values are a number or a [lo, hi] pair.
MaterialSpec material_spec_from_json(const Json& j);
Json to_json(const MaterialSpec& spec);

// Sampled materials: {"parts": {name: {"material", "E", "nu", "density"}}}.
SampledMaterials sampled_from_json(const Json& j);
Json to_json(const SampledMaterials& sampled);

// {"parts": [{"name", "embedding"}]}
QuerySet query_set_from_json(const Json& j);
Json to_json(const QuerySet& queries);

// {"noise", "seed", "parts": [{"name", "mean"}], "primitives": [...],
//  "materials": <material spec>}
SynthSceneSpec synth_spec_from_json(const Json& j);
Json to_json(const SynthSceneSpec& spec);

// {"min": [x, y, z], "max": [x, y, z]}
SceneBounds bounds_from_json(const Json& j);
Json to_json(const SceneBounds& bounds);

// Keys overlay `base`; missing keys keep their base value.
NormStats norm_stats_from_json(const Json& j, NormStats base = NormStats::defaults());
Json to_json(const NormStats& stats);

struct TrainSection {
  TrainConfig cfg;
  int width = 64;
};

struct SimSection {
  mpm::SimConfig cfg;
  int particles_per_voxel = 8;
  int search_radius = 2;
};

struct EvalSection {
  bool csv = false;  // also write a CSV next to the JSON report
};

struct RunConfig {
  SceneBounds bounds;
  int n = 32;
  int d = 16;
  double alpha = 0.01;
  NormStats norm_stats = NormStats::defaults();
  std::string material_spec;  // path, may be empty
  std::string query_set;      // path, may be empty
  TrainSection train;
  SimSection sim;
  EvalSection eval;
  std::uint64_t seed = 0;
  bool deterministic = true;

  void validate() const;
};

// Every object is checked for unknown keys before any field is read.
RunConfig run_config_from_json(const Json& j, RunConfig base = {});
Json to_json(const RunConfig& cfg);

}  // namespace pixie::config
