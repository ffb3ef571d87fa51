#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "pixie/error.hpp"

namespace pixie {

using Vec3 = Eigen::Vector3d;
using VoxelIndex = std::array<int, 3>;

struct GridDims {
  int n = 1;  // voxels per axis
  int d = 1;  // channels per voxel

  GridDims() = default;
  GridDims(int n_, int d_);

  std::size_t voxel_count() const { return static_cast<std::size_t>(n) * n * n; }
  std::size_t element_count() const { return voxel_count() * static_cast<std::size_t>(d); }
  bool operator==(const GridDims&) const = default;
};

struct SceneBounds {
  Vec3 min_corner = Vec3::Zero();
  Vec3 max_corner = Vec3::Ones();

  SceneBounds() = default;
  SceneBounds(const Vec3& lo, const Vec3& hi);

  static SceneBounds unit_cube() { return {}; }
  Vec3 extent() const { return max_corner - min_corner; }
  // Edge lengths of a single voxel for an n-per-axis grid.
  Vec3 voxel_size(int n) const { return extent() / static_cast<double>(n); }
  Vec3 voxel_center(const VoxelIndex& v, int n) const;
};

// Dense x-major voxel container: element (x, y, z, c) lives at
// ((x*n + y)*n + z)*d + c.
template <class T>
class DenseGrid {
 public:
  using value_type = T;

  DenseGrid() = default;
  explicit DenseGrid(GridDims dims, T fill = T{}) : dims_(dims), data_(dims.element_count(), fill) {}
  DenseGrid(GridDims dims, std::vector<T> data) : dims_(dims), data_(std::move(data)) {
    if (data_.size() != dims_.element_count()) {
      throw Error(ErrorCode::DimensionMismatch, "grid payload length does not match n^3*d");
    }
  }

  const GridDims& dims() const { return dims_; }
  int n() const { return dims_.n; }
  int d() const { return dims_.d; }
  std::size_t voxel_count() const { return dims_.voxel_count(); }

  std::size_t flat_voxel(int x, int y, int z) const {
    return (static_cast<std::size_t>(x) * dims_.n + y) * dims_.n + z;
  }
  std::size_t flat_voxel(const VoxelIndex& v) const { return flat_voxel(v[0], v[1], v[2]); }
  VoxelIndex unflatten(std::size_t voxel) const {
    const auto n = static_cast<std::size_t>(dims_.n);
    return {static_cast<int>(voxel / (n * n)), static_cast<int>((voxel / n) % n),
            static_cast<int>(voxel % n)};
  }
  bool in_bounds(int x, int y, int z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < dims_.n && y < dims_.n && z < dims_.n;
  }

  std::span<const T> voxel(std::size_t v) const {
    return {data_.data() + v * dims_.d, static_cast<std::size_t>(dims_.d)};
  }
  std::span<T> voxel(std::size_t v) { return {data_.data() + v * dims_.d, static_cast<std::size_t>(dims_.d)}; }

  const T& at(std::size_t v, int c = 0) const { return data_[v * dims_.d + c]; }
  T& at(std::size_t v, int c = 0) { return data_[v * dims_.d + c]; }

  const std::vector<T>& data() const { return data_; }
  std::vector<T>& data() { return data_; }

  bool operator==(const DenseGrid&) const = default;

 private:
  GridDims dims_;
  std::vector<T> data_;
};

class FeatureGrid : public DenseGrid<float> {
 public:
  using DenseGrid::DenseGrid;
  void validate() const;
};

class DensityGrid : public DenseGrid<float> {
 public:
  DensityGrid() = default;
  explicit DensityGrid(int n) : DenseGrid(GridDims(n, 1)) {}
  DensityGrid(int n, std::vector<float> data) : DenseGrid(GridDims(n, 1), std::move(data)) {}
  void validate() const;
};

class OccupancyMask : public DenseGrid<std::uint8_t> {
 public:
  OccupancyMask() = default;
  explicit OccupancyMask(int n) : DenseGrid(GridDims(n, 1)) {}
  OccupancyMask(int n, std::vector<std::uint8_t> data) : DenseGrid(GridDims(n, 1), std::move(data)) {}

  bool occupied(std::size_t v) const { return at(v) != 0; }
  std::size_t count() const;
  std::vector<std::size_t> occupied_voxels() const;
};

// Per-voxel part index, kUnoccupied for background.
class PartLabelGrid : public DenseGrid<std::uint8_t> {
 public:
  static constexpr std::uint8_t kUnoccupied = 255;
  static constexpr int kMaxParts = 255;

  PartLabelGrid() = default;
  explicit PartLabelGrid(int n) : DenseGrid(GridDims(n, 1), kUnoccupied) {}
  PartLabelGrid(int n, std::vector<std::uint8_t> data) : DenseGrid(GridDims(n, 1), std::move(data)) {}
};

VoxelIndex world_to_voxel(const Vec3& p, const SceneBounds& bounds, const GridDims& dims);

struct PointSample {
  Vec3 position;
  std::vector<float> feature;
  double density = 0.0;
};

struct VoxelizedGrids {
  FeatureGrid features;
  DensityGrid density;
};

// Density-weighted feature mean per voxel, unweighted when every density in
// the voxel is zero. Accumulation follows point order, so output is
// deterministic.
VoxelizedGrids voxelize_points(std::span<const PointSample> points, const SceneBounds& bounds,
                               const GridDims& dims);

// Occupied iff density >= alpha.
OccupancyMask compute_occupancy(const DensityGrid& density, double alpha = 0.01);

}  // namespace pixie
