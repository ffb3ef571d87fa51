#pragma once

#include <optional>
#include <span>
#include <vector>

#include "pixie/grid.hpp"
#include "pixie/materials.hpp"

namespace pixie {

struct VoxelMaterial {
  std::size_t voxel = 0;
  MaterialClass cls = MaterialClass::Background;
  ContinuousParams params;
  bool operator==(const VoxelMaterial&) const = default;
};

struct TransferResult {
  std::vector<std::optional<VoxelMaterial>> materials;  // nullopt = unassigned
  std::size_t fallback_count = 0;    // resolved via the occupied-neighbour search
  std::size_t unassigned_count = 0;
};

// Copies the material of the voxel whose centre is nearest each position
// (ties to the lower flat index). Positions landing on a background voxel take
// the nearest occupied voxel within search_radius voxels, else stay unassigned.
TransferResult nn_transfer(const MaterialGrid& material, std::span<const Vec3> positions,
                           const SceneBounds& bounds, int search_radius = 2);

}  // namespace pixie
