#include "pixie/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pixie {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::DimensionMismatch: return "dimension_mismatch";
    case ErrorCode::NonFinite: return "non_finite";
    case ErrorCode::FormatError: return "format_error";
    case ErrorCode::MagicMismatch: return "magic_mismatch";
    case ErrorCode::IoError: return "io_error";
    case ErrorCode::SchemaError: return "schema_error";
    case ErrorCode::ParseError: return "parse_error";
    case ErrorCode::EvalError: return "eval_error";
    case ErrorCode::SamplingExhausted: return "sampling_exhausted";
    case ErrorCode::DegenerateStats: return "degenerate_stats";
    case ErrorCode::SingularMatrix: return "singular_matrix";
    case ErrorCode::DomainExit: return "domain_exit";
    case ErrorCode::Divergence: return "divergence";
    case ErrorCode::EmptyMask: return "empty_mask";
  }
  return "unknown";
}

GridDims::GridDims(int n_, int d_) : n(n_), d(d_) {
  if (n < 1 || d < 1) {
    throw Error(ErrorCode::InvalidArgument, "grid dims require n >= 1 and d >= 1");
  }
  // n^3 * d must stay addressable; 2^40 elements is far past anything sane.
  const double total = static_cast<double>(n) * n * n * d;
  if (total > static_cast<double>(1ULL << 40)) {
    throw Error(ErrorCode::InvalidArgument, "grid too large: n^3*d = " + std::to_string(total));
  }
}

SceneBounds::SceneBounds(const Vec3& lo, const Vec3& hi) : min_corner(lo), max_corner(hi) {
  for (int a = 0; a < 3; ++a) {
    if (!std::isfinite(lo[a]) || !std::isfinite(hi[a])) {
      throw Error(ErrorCode::NonFinite, "scene bounds must be finite");
    }
    if (!(hi[a] > lo[a])) {
      throw Error(ErrorCode::InvalidArgument, "scene bounds: max must exceed min on every axis");
    }
  }
}

Vec3 SceneBounds::voxel_center(const VoxelIndex& v, int n) const {
  const Vec3 h = voxel_size(n);
  return min_corner + Vec3((v[0] + 0.5) * h[0], (v[1] + 0.5) * h[1], (v[2] + 0.5) * h[2]);
}

void FeatureGrid::validate() const {
  for (float f : data()) {
    if (!std::isfinite(f)) throw Error(ErrorCode::NonFinite, "feature grid holds a non-finite entry");
  }
}

void DensityGrid::validate() const {
  if (d() != 1) throw Error(ErrorCode::DimensionMismatch, "density grid must have d = 1");
  for (float f : data()) {
    if (!std::isfinite(f) || f < 0.0f) {
      throw Error(ErrorCode::InvalidArgument, "density grid entries must be finite and >= 0");
    }
  }
}

std::size_t OccupancyMask::count() const {
  std::size_t c = 0;
  for (auto b : data()) c += b != 0;
  return c;
}

std::vector<std::size_t> OccupancyMask::occupied_voxels() const {
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < voxel_count(); ++v) {
    if (occupied(v)) out.push_back(v);
  }
  return out;
}

VoxelIndex world_to_voxel(const Vec3& p, const SceneBounds& bounds, const GridDims& dims) {
  VoxelIndex idx{};
  for (int a = 0; a < 3; ++a) {
    if (!std::isfinite(p[a])) throw Error(ErrorCode::NonFinite, "world_to_voxel: non-finite position");
    const double t = (p[a] - bounds.min_corner[a]) / (bounds.max_corner[a] - bounds.min_corner[a]);
    const double f = std::floor(t * dims.n);
    idx[a] = static_cast<int>(std::clamp(f, 0.0, static_cast<double>(dims.n - 1)));
  }
  return idx;
}

VoxelizedGrids voxelize_points(std::span<const PointSample> points, const SceneBounds& bounds,
                               const GridDims& dims) {
  const std::size_t nv = dims.voxel_count();
  const int d = dims.d;
  std::vector<double> weighted(nv * d, 0.0), plain(nv * d, 0.0);
  std::vector<double> weight_sum(nv, 0.0), density_sum(nv, 0.0);
  std::vector<std::uint32_t> count(nv, 0);
  std::vector<std::size_t> first(nv, 0);

  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& pt = points[i];
    if (static_cast<int>(pt.feature.size()) != d) {
      throw Error(ErrorCode::DimensionMismatch, "voxelize_points: feature length " +
                                                    std::to_string(pt.feature.size()) + " != d " +
                                                    std::to_string(d));
    }
    if (!(pt.density >= 0.0) || !std::isfinite(pt.density)) {
      throw Error(ErrorCode::InvalidArgument, "voxelize_points: densities must be finite and >= 0");
    }
    const VoxelIndex vi = world_to_voxel(pt.position, bounds, dims);
    const std::size_t v = (static_cast<std::size_t>(vi[0]) * dims.n + vi[1]) * dims.n + vi[2];
    for (int c = 0; c < d; ++c) {
      weighted[v * d + c] += pt.density * pt.feature[c];
      plain[v * d + c] += pt.feature[c];
    }
    if (count[v] == 0) first[v] = i;
    weight_sum[v] += pt.density;
    density_sum[v] += pt.density;
    ++count[v];
  }

  VoxelizedGrids out{FeatureGrid(dims), DensityGrid(dims.n)};
  for (std::size_t v = 0; v < nv; ++v) {
    if (count[v] == 0) continue;
    auto f = out.features.voxel(v);
    if (count[v] == 1) {
      // Single point: copy bits through untouched.
      for (int c = 0; c < d; ++c) f[c] = points[first[v]].feature[c];
    } else if (weight_sum[v] > 0.0) {
      for (int c = 0; c < d; ++c) f[c] = static_cast<float>(weighted[v * d + c] / weight_sum[v]);
    } else {
      for (int c = 0; c < d; ++c) f[c] = static_cast<float>(plain[v * d + c] / count[v]);
    }
    out.density.at(v) = static_cast<float>(density_sum[v] / count[v]);
  }
  return out;
}

OccupancyMask compute_occupancy(const DensityGrid& density, double alpha) {
  if (!(alpha >= 0.0)) throw Error(ErrorCode::InvalidArgument, "occupancy threshold alpha must be >= 0");
  // Densities are stored as f32; compare in that precision so a stored 0.01
  // meets alpha = 0.01.
  const auto threshold = static_cast<float>(alpha);
  OccupancyMask mask(density.n());
  for (std::size_t v = 0; v < density.voxel_count(); ++v) {
    mask.at(v) = density.at(v) >= threshold ? 1 : 0;
  }
  return mask;
}

}  // namespace pixie
