#pragma once

#include <span>
#include <string>
#include <vector>

#include "pixie/grid.hpp"
#include "pixie/materials.hpp"

namespace pixie {

struct PartQuery {
  std::string name;
  std::vector<float> embedding;
};

// Ordered part queries; label i refers to parts[i].
class QuerySet {
 public:
  QuerySet() = default;
  explicit QuerySet(std::vector<PartQuery> parts);

  const std::vector<PartQuery>& parts() const { return parts_; }
  std::size_t size() const { return parts_.size(); }
  int dim() const { return parts_.empty() ? 0 : static_cast<int>(parts_.front().embedding.size()); }

 private:
  std::vector<PartQuery> parts_;
};

struct SegmentResult {
  PartLabelGrid labels;
  std::size_t zero_norm_count = 0;  // occupied voxels with an all-zero feature (labelled 0)
  std::size_t tie_count = 0;        // voxels whose best similarity was shared by several parts
};

// Cosine-similarity argmax per occupied voxel, lowest part index on ties.
SegmentResult segment(const FeatureGrid& features, const OccupancyMask& mask, const QuerySet& queries);

// sampled[i] is painted onto every voxel labelled i.
MaterialGrid paint_materials(const PartLabelGrid& labels, std::span<const PartSample> sampled);

// Convenience overload: looks each query's part name up in a sampled mapping.
MaterialGrid paint_materials(const PartLabelGrid& labels, const QuerySet& queries, const SampledMaterials& sampled);

}  // namespace pixie
