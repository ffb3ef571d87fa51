#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pixie/constraint.hpp"
#include "pixie/grid.hpp"
#include "pixie/material_types.hpp"

namespace pixie {

// Per-voxel class plus (E, nu, rho). Parameters are held in f32 so that the
// PXGRID1 round trip (kind f32, d = 4: class, E, nu, rho) is bit-exact.
class MaterialGrid {
 public:
  static constexpr int kChannels = 4;

  MaterialGrid() = default;
  explicit MaterialGrid(int n);

  int n() const { return n_; }
  std::size_t voxel_count() const { return classes_.size(); }
  GridDims dims() const { return GridDims(n_, 1); }

  MaterialClass material_class(std::size_t v) const { return static_cast<MaterialClass>(classes_[v]); }
  ContinuousParams params(std::size_t v) const;
  std::array<float, 3> raw_params(std::size_t v) const { return params_[v]; }

  // Occupied voxel: class must not be Background, params must be valid.
  void set(std::size_t v, MaterialClass c, const ContinuousParams& p);
  void clear(std::size_t v);

  bool occupied(std::size_t v) const { return classes_[v] != 0; }
  OccupancyMask occupancy() const;
  // Throws unless Background coincides with the unoccupied voxels of mask.
  void check_against(const OccupancyMask& mask) const;

  bool operator==(const MaterialGrid&) const = default;

 private:
  int n_ = 0;
  std::vector<std::uint8_t> classes_;
  std::vector<std::array<float, 3>> params_;
};

void write_material_grid(const std::filesystem::path& path, const MaterialGrid& grid);
MaterialGrid read_material_grid(const std::filesystem::path& path);

// Bounds of log10 E, nu, log10 rho used to map into [-1, 1].
struct NormStats {
  double log_e_min = 0.0, log_e_max = 1.0;
  double nu_min = 0.0, nu_max = 1.0;
  double log_rho_min = 0.0, log_rho_max = 1.0;

  // Extremes of the in-context parameter tables: jello E 800 .. soda can
  // E 8e10, nu 0.15 .. 0.45, jello rho 40 .. snow/mud rho 3000.
  static NormStats defaults();
  void validate() const;  // throws DegenerateStats when any min >= max
};

struct NormalizedParams {
  double e = 0.0, nu = 0.0, rho = 0.0;
};

struct NormalizeResult {
  NormalizedParams value;
  int clamped = 0;  // channels that fell outside the stats and were clamped
};

NormalizeResult normalize(const ContinuousParams& params, const NormStats& stats);
ContinuousParams denormalize(const NormalizedParams& normalized, const NormStats& stats);

struct LameParams {
  double mu = 0.0;
  double lambda = 0.0;
};

// Rejects nu > 0.49 for every class except Rigid.
LameParams lame_from(double young_modulus, double poisson_ratio,
                     MaterialClass cls = MaterialClass::Elastic);

struct ValueRange {
  double min = 0.0, max = 0.0;
};

struct PartRanges {
  MaterialClass cls = MaterialClass::Elastic;
  ValueRange e, nu, rho;
};

struct ParsedConstraint {
  std::string source;
  constraint::ExprPtr expr;
};

struct MaterialSpec {
  std::map<std::string, PartRanges, std::less<>> parts;
  std::vector<ParsedConstraint> constraints;

  void validate() const;
  void add_constraint(const std::string& source);
};

struct PartSample {
  MaterialClass cls = MaterialClass::Elastic;
  ContinuousParams params;
  bool operator==(const PartSample&) const = default;
};

using SampledMaterials = std::map<std::string, PartSample, std::less<>>;

class SamplingExhausted : public Error {
 public:
  SamplingExhausted(const std::string& violated, int tries);
  const std::string& violated_constraint() const { return violated_; }

 private:
  std::string violated_;
};

// Draws E and rho log-uniformly and nu uniformly from each part's range,
// retrying until every constraint holds. Parts are visited in name order, so
// the result is a pure function of (spec, seed).
SampledMaterials sample_spec(const MaterialSpec& spec, std::uint64_t seed, int max_tries = 1000);

ParamSample params_of(const SampledMaterials& sampled);

}  // namespace pixie
