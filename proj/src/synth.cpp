#include "pixie/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "pixie/random.hpp"

namespace pixie {

bool Primitive::contains(const Vec3& p) const {
  if (kind == PrimitiveKind::Box) return (p.array() >= lo.array()).all() && (p.array() < hi.array()).all();
  return (p - center).squaredNorm() <= radius * radius;
}

void SynthSceneSpec::validate() const {
  auto bad = [](const std::string& why) { throw Error(ErrorCode::SchemaError, "synth spec: " + why); };
  if (parts.empty()) bad("needs at least one part");
  if (static_cast<int>(parts.size()) > PartLabelGrid::kMaxParts) bad("too many parts");
  if (!(noise >= 0.0) || !std::isfinite(noise)) bad("noise must be finite and >= 0");
  std::set<std::string, std::less<>> names;
  for (const auto& p : parts) {
    if (!names.insert(p.name).second) bad("duplicate part '" + p.name + "'");
    if (p.mean.empty() || p.mean.size() != parts.front().mean.size()) bad("part means must share a nonzero length");
    for (float v : p.mean) {
      if (!std::isfinite(v)) bad("part '" + p.name + "' has a non-finite mean");
    }
    if (!materials.parts.contains(p.name)) bad("part '" + p.name + "' has no material entry");
  }
  for (std::size_t i = 0; i < primitives.size(); ++i) {
    const auto& q = primitives[i];
    const std::string where = "primitive " + std::to_string(i);
    if (!names.contains(q.part)) bad(where + " refers to unknown part '" + q.part + "'");
    if (q.kind == PrimitiveKind::Box) {
      if (!q.lo.allFinite() || !q.hi.allFinite() || !(q.lo.array() < q.hi.array()).all()) {
        throw Error(ErrorCode::InvalidArgument, where + ": degenerate box");
      }
    } else if (!q.center.allFinite() || !(q.radius > 0.0) || !std::isfinite(q.radius)) {
      throw Error(ErrorCode::InvalidArgument, where + ": degenerate sphere");
    }
  }
  materials.validate();
}

QuerySet SynthSceneSpec::queries() const {
  std::vector<PartQuery> q;
  q.reserve(parts.size());
  for (const auto& p : parts) q.push_back({p.name, p.mean});
  return QuerySet(std::move(q));
}

SynthScene generate(const SynthSceneSpec& spec, int n, const SceneBounds& bounds) {
  spec.validate();
  const int d = spec.feature_dim();
  SynthScene s{FeatureGrid(GridDims(n, d)), DensityGrid(n), MaterialGrid(n), PartLabelGrid(n), {}};

  std::vector<int> part_of(spec.primitives.size());
  for (std::size_t i = 0; i < spec.primitives.size(); ++i) {
    for (std::size_t p = 0; p < spec.parts.size(); ++p) {
      if (spec.parts[p].name == spec.primitives[i].part) part_of[i] = static_cast<int>(p);
    }
  }

  Rng rng(spec.seed);
  for (std::size_t v = 0; v < s.labels.voxel_count(); ++v) {
    const Vec3 c = bounds.voxel_center(s.labels.unflatten(v), n);
    int label = -1;
    for (std::size_t i = 0; i < spec.primitives.size(); ++i) {
      if (spec.primitives[i].contains(c)) label = part_of[i];
    }
    if (label < 0) continue;
    s.labels.at(v) = static_cast<std::uint8_t>(label);
    s.density.at(v) = 1.0f;
    auto f = s.features.voxel(v);
    const auto& mean = spec.parts[label].mean;
    for (int k = 0; k < d; ++k) {
      f[k] = spec.noise > 0.0 ? static_cast<float>(mean[k] + spec.noise * rng.normal()) : mean[k];
    }
  }

  s.sampled = sample_spec(spec.materials, spec.seed);
  s.material = paint_materials(s.labels, spec.queries(), s.sampled);
  return s;
}

std::vector<Archetype> archetype_library(int feature_dim, std::uint64_t mean_seed) {
  if (feature_dim < 1) throw Error(ErrorCode::InvalidArgument, "feature_dim must be >= 1");
  struct Row {
    const char* name;
    MaterialClass cls;
    double e0, e1, nu0, nu1, rho0, rho1;
  };
  using MC = MaterialClass;
  const Row rows[] = {
      {"pot", MC::Rigid, 2e8, 2e8, 0.4, 0.4, 400, 400},
      {"trunk", MC::Elastic, 2e6, 2e6, 0.4, 0.4, 400, 400},
      {"leaves", MC::Elastic, 2e4, 2e4, 0.4, 0.4, 200, 200},
      {"vase", MC::Rigid, 1e6, 1e6, 0.3, 0.3, 500, 500},
      {"flowers", MC::Elastic, 1e4, 1e4, 0.4, 0.4, 100, 100},
      {"stems", MC::Elastic, 1e5, 1e5, 0.35, 0.35, 300, 300},
      {"twigs", MC::Elastic, 6e4, 6e4, 0.38, 0.38, 250, 250},
      {"foliage", MC::Elastic, 2e4, 2e4, 0.40, 0.40, 150, 150},
      {"blades", MC::Elastic, 1e4, 1e4, 0.45, 0.45, 80, 80},
      {"soil", MC::Rigid, 5e5, 5e5, 0.30, 0.30, 1200, 1200},
      {"toy", MC::Elastic, 3e4, 5e4, 0.4, 0.45, 80, 150},
      {"ball", MC::Elastic, 3e4, 5e4, 0.4, 0.45, 80, 150},
      {"can", MC::Metal, 5e10, 8e10, 0.25, 0.35, 2600, 2800},
      {"crate", MC::Metal, 8e7, 1.2e8, 0.25, 0.35, 2500, 2900},
      {"sand", MC::Sand, 4e7, 6e7, 0.25, 0.35, 1800, 2200},
      {"jello", MC::Elastic, 800, 1200, 0.25, 0.35, 40, 60},
      {"snow_and_mud", MC::Snow, 8e4, 1.2e5, 0.15, 0.25, 2000, 3000},
      {"clay", MC::Plasticine, 1e5, 3e5, 0.3, 0.4, 1500, 2000},
      {"sponge", MC::Foam, 5e3, 2e4, 0.15, 0.25, 50, 100},
  };
  Rng rng(mean_seed);
  std::vector<Archetype> out;
  for (const Row& r : rows) {
    Archetype a;
    a.name = r.name;
    a.ranges = {r.cls, {r.e0, r.e1}, {r.nu0, r.nu1}, {r.rho0, r.rho1}};
    std::vector<double> g(feature_dim);
    double norm = 0.0;
    while (norm < 1e-6) {
      norm = 0.0;
      for (double& x : g) {
        x = rng.normal();
        norm += x * x;
      }
      norm = std::sqrt(norm);
    }
    for (double x : g) a.mean.push_back(static_cast<float>(x / norm));
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<Archetype> occupancy_archetypes(const std::vector<Archetype>& library) {
  std::vector<Archetype> out = library;
  for (auto& a : out) a.mean = {1.0f};
  return out;
}

SynthSceneSpec random_scene(const std::vector<Archetype>& library, double noise, std::uint64_t seed,
                            const SceneBounds& bounds) {
  if (library.empty()) throw Error(ErrorCode::InvalidArgument, "empty archetype library");
  Rng rng(seed);
  SynthSceneSpec spec;
  spec.noise = noise;
  spec.seed = seed;

  const int wanted = std::min<int>(2 + static_cast<int>(rng.below(3)), static_cast<int>(library.size()));
  std::vector<std::size_t> pool(library.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  for (int i = 0; i < wanted; ++i) std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);

  const Vec3 lo = bounds.min_corner, ext = bounds.extent();
  for (int i = 0; i < wanted; ++i) {
    const Archetype& a = library[pool[i]];
    spec.parts.push_back({a.name, a.mean});
    spec.materials.parts[a.name] = a.ranges;
    const int shapes = 1 + static_cast<int>(rng.below(2));
    for (int s = 0; s < shapes; ++s) {
      Primitive p;
      p.part = a.name;
      if (rng.uniform() < 0.5) {
        p.kind = PrimitiveKind::Box;
        Vec3 size, start;
        for (int k = 0; k < 3; ++k) {
          size[k] = rng.uniform(0.2, 0.5);
          start[k] = rng.uniform(0.05, 0.95 - size[k]);
        }
        p.lo = lo + start.cwiseProduct(ext);
        p.hi = lo + (start + size).cwiseProduct(ext);
      } else {
        p.kind = PrimitiveKind::Sphere;
        const double r = rng.uniform(0.12, 0.25);
        Vec3 c;
        for (int k = 0; k < 3; ++k) c[k] = rng.uniform(0.05 + r, 0.95 - r);
        p.center = lo + c.cwiseProduct(ext);
        p.radius = r * ext.minCoeff();
      }
      spec.primitives.push_back(p);
    }
  }
  return spec;
}

}  // namespace pixie
