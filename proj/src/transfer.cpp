#include "pixie/transfer.hpp"

#include <cmath>
#include <limits>

namespace pixie {

namespace {

// Nearest centre along one axis; a position exactly halfway between two
// centres goes to the lower index.
int nearest_center(double p, double lo, double h, int n) {
  const double t = (p - lo) / h - 0.5;  // coordinate in centre units
  const double idx = std::ceil(t - 0.5);
  return static_cast<int>(std::clamp(idx, 0.0, static_cast<double>(n - 1)));
}

}  // namespace

TransferResult nn_transfer(const MaterialGrid& material, std::span<const Vec3> positions,
                           const SceneBounds& bounds, int search_radius) {
  if (search_radius < 0) throw Error(ErrorCode::InvalidArgument, "search radius must be >= 0");
  const int n = material.n();
  const Vec3 h = bounds.voxel_size(n);
  auto flat = [n](int x, int y, int z) { return (static_cast<std::size_t>(x) * n + y) * n + z; };

  TransferResult out;
  out.materials.reserve(positions.size());
  for (const Vec3& p : positions) {
    if (!p.allFinite()) throw Error(ErrorCode::NonFinite, "nn_transfer: non-finite position");
    const int ix = nearest_center(p[0], bounds.min_corner[0], h[0], n);
    const int iy = nearest_center(p[1], bounds.min_corner[1], h[1], n);
    const int iz = nearest_center(p[2], bounds.min_corner[2], h[2], n);
    std::size_t best = flat(ix, iy, iz);
    if (!material.occupied(best)) {
      double best_d2 = std::numeric_limits<double>::infinity();
      bool found = false;
      const int r = search_radius;
      // Scan in increasing flat order so strict < keeps the lowest index on ties.
      for (int x = std::max(0, ix - r); x <= std::min(n - 1, ix + r); ++x) {
        for (int y = std::max(0, iy - r); y <= std::min(n - 1, iy + r); ++y) {
          for (int z = std::max(0, iz - r); z <= std::min(n - 1, iz + r); ++z) {
            const std::size_t v = flat(x, y, z);
            if (!material.occupied(v)) continue;
            const Vec3 c = bounds.voxel_center({x, y, z}, n);
            const double d2 = (c - p).squaredNorm();
            if (d2 < best_d2) {
              best_d2 = d2;
              best = v;
              found = true;
            }
          }
        }
      }
      if (!found) {
        out.materials.emplace_back(std::nullopt);
        ++out.unassigned_count;
        continue;
      }
      ++out.fallback_count;
    }
    out.materials.emplace_back(VoxelMaterial{best, material.material_class(best), material.params(best)});
  }
  return out;
}

}  // namespace pixie
