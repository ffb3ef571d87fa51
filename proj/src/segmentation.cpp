#include "pixie/segmentation.hpp"

#include <cmath>
#include <limits>

namespace pixie {

QuerySet::QuerySet(std::vector<PartQuery> parts) : parts_(std::move(parts)) {
  if (parts_.empty()) throw Error(ErrorCode::InvalidArgument, "query set needs at least one part");
  if (parts_.size() > static_cast<std::size_t>(PartLabelGrid::kMaxParts)) {
    throw Error(ErrorCode::InvalidArgument, "query set has more parts than the label grid can encode");
  }
  const std::size_t d = parts_.front().embedding.size();
  for (const auto& q : parts_) {
    if (q.embedding.size() != d || d == 0) {
      throw Error(ErrorCode::DimensionMismatch, "query '" + q.name + "' embedding length differs");
    }
    double norm2 = 0.0;
    for (float f : q.embedding) {
      if (!std::isfinite(f)) throw Error(ErrorCode::NonFinite, "query '" + q.name + "' has a non-finite entry");
      norm2 += static_cast<double>(f) * f;
    }
    if (norm2 == 0.0) throw Error(ErrorCode::InvalidArgument, "query '" + q.name + "' has zero norm");
  }
}

SegmentResult segment(const FeatureGrid& features, const OccupancyMask& mask, const QuerySet& queries) {
  if (queries.size() == 0) throw Error(ErrorCode::InvalidArgument, "segment: empty query set");
  if (features.d() != queries.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "segment: feature d " + std::to_string(features.d()) +
                                                  " != query d " + std::to_string(queries.dim()));
  }
  if (features.n() != mask.n()) throw Error(ErrorCode::DimensionMismatch, "segment: feature/mask n differ");

  const int d = features.d();
  std::vector<std::vector<double>> unit;  // normalised queries
  for (const auto& q : queries.parts()) {
    double norm2 = 0.0;
    for (float f : q.embedding) norm2 += static_cast<double>(f) * f;
    const double inv = 1.0 / std::sqrt(norm2);
    std::vector<double> u(d);
    for (int c = 0; c < d; ++c) u[c] = q.embedding[c] * inv;
    unit.push_back(std::move(u));
  }

  SegmentResult out{PartLabelGrid(features.n()), 0, 0};
  for (std::size_t v = 0; v < features.voxel_count(); ++v) {
    if (!mask.occupied(v)) continue;
    const auto f = features.voxel(v);
    double norm2 = 0.0;
    for (float x : f) norm2 += static_cast<double>(x) * x;
    if (norm2 == 0.0) {
      out.labels.at(v) = 0;
      ++out.zero_norm_count;
      continue;
    }
    // The feature norm is common to every part, so ranking by the dot with the
    // unit query is the cosine ranking.
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    bool tied = false;
    for (std::size_t p = 0; p < unit.size(); ++p) {
      double dot = 0.0;
      for (int c = 0; c < d; ++c) dot += f[c] * unit[p][c];
      if (dot > best_score) {
        best_score = dot;
        best = static_cast<int>(p);
        tied = false;
      } else if (dot == best_score) {
        tied = true;
      }
    }
    out.labels.at(v) = static_cast<std::uint8_t>(best);
    out.tie_count += tied;
  }
  return out;
}

MaterialGrid paint_materials(const PartLabelGrid& labels, std::span<const PartSample> sampled) {
  MaterialGrid grid(labels.n());
  for (std::size_t v = 0; v < labels.voxel_count(); ++v) {
    const auto label = labels.at(v);
    if (label == PartLabelGrid::kUnoccupied) continue;
    if (label >= sampled.size()) {
      throw Error(ErrorCode::InvalidArgument,
                  "paint_materials: label " + std::to_string(label) + " has no sampled material");
    }
    grid.set(v, sampled[label].cls, sampled[label].params);
  }
  return grid;
}

MaterialGrid paint_materials(const PartLabelGrid& labels, const QuerySet& queries, const SampledMaterials& sampled) {
  std::vector<bool> used(queries.size(), false);
  for (auto label : labels.data()) {
    if (label != PartLabelGrid::kUnoccupied && label < used.size()) used[label] = true;
  }
  std::vector<PartSample> ordered(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    auto it = sampled.find(queries.parts()[i].name);
    if (it != sampled.end()) {
      ordered[i] = it->second;
    } else if (used[i]) {
      throw Error(ErrorCode::InvalidArgument,
                  "paint_materials: part '" + queries.parts()[i].name + "' has no sampled material");
    }
  }
  return paint_materials(labels, ordered);
}

}  // namespace pixie
