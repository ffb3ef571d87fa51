#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pixie/grid.hpp"
#include "pixie/materials.hpp"
#include "pixie/segmentation.hpp"

namespace pixie {

enum class PrimitiveKind { Box, Sphere };

// World-space primitive owned by a part. Box uses lo/hi, sphere uses
// center/radius.
struct Primitive {
  std::string part;
  PrimitiveKind kind = PrimitiveKind::Box;
  Vec3 lo = Vec3::Zero(), hi = Vec3::Zero();
  Vec3 center = Vec3::Zero();
  double radius = 0.0;

  bool contains(const Vec3& p) const;
};

struct SynthPart {
  std::string name;
  std::vector<float> mean;  // feature mean; every part must use the same length
};

struct SynthSceneSpec {
  std::vector<SynthPart> parts;          // label i is parts[i]
  std::vector<Primitive> primitives;     // later entries win where they overlap
  MaterialSpec materials;                // one entry per part name
  double noise = 0.0;                    // isotropic Gaussian stddev on features
  std::uint64_t seed = 0;

  int feature_dim() const { return parts.empty() ? 0 : static_cast<int>(parts.front().mean.size()); }
  void validate() const;
  QuerySet queries() const;  // part means as segmentation queries
};

struct SynthScene {
  FeatureGrid features;
  DensityGrid density;
  MaterialGrid material;
  PartLabelGrid labels;
  SampledMaterials sampled;
};

// Voxel centres inside a primitive get density 1 and the owning part's label.
// Occupied voxels get mean + noise * N(0, 1) per channel, drawn in voxel order.
SynthScene generate(const SynthSceneSpec& spec, int n, const SceneBounds& bounds);

// Part templates for randomized datasets: a class, parameter ranges and a
// fixed unit-norm feature mean.
struct Archetype {
  std::string name;
  PartRanges ranges;
  std::vector<float> mean;
};

// Parameter ranges of the in-context material tables plus clay (plasticine)
// and sponge (foam), with means drawn once from `mean_seed`.
std::vector<Archetype> archetype_library(int feature_dim, std::uint64_t mean_seed = 20240601);

// Same archetypes with a single-channel feature of 1 (occupancy only).
std::vector<Archetype> occupancy_archetypes(const std::vector<Archetype>& library);

// A scene with 2 to 4 parts drawn from `library`, laid out as overlapping
// boxes and spheres inside the bounds.
SynthSceneSpec random_scene(const std::vector<Archetype>& library, double noise, std::uint64_t seed,
                            const SceneBounds& bounds = SceneBounds::unit_cube());

}  // namespace pixie
