#include "pixie/materials.hpp"

#include <algorithm>
#include <cmath>

#include "pixie/grid_io.hpp"
#include "pixie/random.hpp"

namespace pixie {

std::string_view material_class_name(MaterialClass c) {
  switch (c) {
    case MaterialClass::Background: return "background";
    case MaterialClass::Elastic: return "elastic";
    case MaterialClass::Rigid: return "rigid";
    case MaterialClass::Metal: return "metal";
    case MaterialClass::Sand: return "sand";
    case MaterialClass::Snow: return "snow";
    case MaterialClass::Plasticine: return "plasticine";
    case MaterialClass::Foam: return "foam";
  }
  return "unknown";
}

std::optional<MaterialClass> parse_material_class(std::string_view name) {
  for (auto c : kAllMaterialClasses) {
    if (material_class_name(c) == name) return c;
  }
  return std::nullopt;
}

MaterialClass material_class_from_index(int index) {
  if (index < 0 || index >= kMaterialClassCount) {
    throw Error(ErrorCode::InvalidArgument, "material class index out of range: " + std::to_string(index));
  }
  return static_cast<MaterialClass>(index);
}

bool ContinuousParams::valid() const {
  return std::isfinite(young_modulus) && young_modulus > 0.0 && std::isfinite(poisson_ratio) &&
         poisson_ratio > 0.0 && poisson_ratio < 0.5 && std::isfinite(density) && density > 0.0;
}

void ContinuousParams::validate() const {
  if (!valid()) {
    throw Error(ErrorCode::InvalidArgument,
                "material parameters need E > 0, 0 < nu < 0.5, rho > 0 (got E=" + std::to_string(young_modulus) +
                    ", nu=" + std::to_string(poisson_ratio) + ", rho=" + std::to_string(density) + ")");
  }
}

// ---------------------------------------------------------------------------
// MaterialGrid

MaterialGrid::MaterialGrid(int n) : n_(n) {
  const GridDims dims(n, 1);
  classes_.assign(dims.voxel_count(), 0);
  params_.assign(dims.voxel_count(), {0.0f, 0.0f, 0.0f});
}

ContinuousParams MaterialGrid::params(std::size_t v) const {
  const auto& p = params_[v];
  return {p[0], p[1], p[2]};
}

void MaterialGrid::set(std::size_t v, MaterialClass c, const ContinuousParams& p) {
  if (c == MaterialClass::Background) {
    throw Error(ErrorCode::InvalidArgument, "MaterialGrid::set: use clear() for background voxels");
  }
  p.validate();
  classes_[v] = static_cast<std::uint8_t>(c);
  params_[v] = {static_cast<float>(p.young_modulus), static_cast<float>(p.poisson_ratio),
                static_cast<float>(p.density)};
}

void MaterialGrid::clear(std::size_t v) {
  classes_[v] = 0;
  params_[v] = {0.0f, 0.0f, 0.0f};
}

OccupancyMask MaterialGrid::occupancy() const {
  OccupancyMask mask(n_);
  for (std::size_t v = 0; v < voxel_count(); ++v) mask.at(v) = occupied(v) ? 1 : 0;
  return mask;
}

void MaterialGrid::check_against(const OccupancyMask& mask) const {
  if (mask.n() != n_) throw Error(ErrorCode::DimensionMismatch, "material grid and mask differ in n");
  for (std::size_t v = 0; v < voxel_count(); ++v) {
    if (occupied(v) != mask.occupied(v)) {
      throw Error(ErrorCode::InvalidArgument,
                  "material grid background does not match occupancy at voxel " + std::to_string(v));
    }
  }
}

void write_material_grid(const std::filesystem::path& path, const MaterialGrid& grid) {
  RawGrid raw;
  raw.dims = GridDims(grid.n(), MaterialGrid::kChannels);
  raw.kind = ElementKind::F32;
  raw.f32.reserve(raw.dims.element_count());
  for (std::size_t v = 0; v < grid.voxel_count(); ++v) {
    raw.f32.push_back(static_cast<float>(grid.material_class(v)));
    const auto p = grid.raw_params(v);
    raw.f32.insert(raw.f32.end(), p.begin(), p.end());
  }
  write_raw_grid(path, raw);
}

MaterialGrid read_material_grid(const std::filesystem::path& path) {
  const RawGrid raw = read_raw_grid(path);
  if (raw.kind != ElementKind::F32 || raw.dims.d != MaterialGrid::kChannels) {
    throw Error(ErrorCode::FormatError, path.string() + ": not a material grid (need f32, d = 4)");
  }
  MaterialGrid grid(raw.dims.n);
  for (std::size_t v = 0; v < grid.voxel_count(); ++v) {
    const float* e = raw.f32.data() + v * MaterialGrid::kChannels;
    const float c = e[0];
    if (!(c >= 0.0f && c < kMaterialClassCount) || c != std::floor(c)) {
      throw Error(ErrorCode::FormatError, path.string() + ": invalid class value at voxel " + std::to_string(v));
    }
    const auto cls = static_cast<MaterialClass>(static_cast<int>(c));
    if (cls == MaterialClass::Background) continue;
    grid.set(v, cls, ContinuousParams{e[1], e[2], e[3]});
  }
  return grid;
}

// ---------------------------------------------------------------------------
// Normalization

NormStats NormStats::defaults() {
  NormStats s;
  s.log_e_min = std::log10(8e2);
  s.log_e_max = std::log10(8e10);
  s.nu_min = 0.15;
  s.nu_max = 0.45;
  s.log_rho_min = std::log10(40.0);
  s.log_rho_max = std::log10(3000.0);
  return s;
}

void NormStats::validate() const {
  auto check = [](double lo, double hi, const char* what) {
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
      throw Error(ErrorCode::DegenerateStats, std::string("normalization stats: ") + what + " min must be < max");
    }
  };
  check(log_e_min, log_e_max, "log10 E");
  check(nu_min, nu_max, "nu");
  check(log_rho_min, log_rho_max, "log10 rho");
}

namespace {

double to_unit(double x, double lo, double hi, int& clamped) {
  if (x < lo) {
    x = lo;
    ++clamped;
  } else if (x > hi) {
    x = hi;
    ++clamped;
  }
  return 2.0 * (x - lo) / (hi - lo) - 1.0;
}

double from_unit(double u, double lo, double hi) { return lo + (u + 1.0) * 0.5 * (hi - lo); }

}  // namespace

NormalizeResult normalize(const ContinuousParams& params, const NormStats& stats) {
  stats.validate();
  params.validate();
  NormalizeResult r;
  r.value.e = to_unit(std::log10(params.young_modulus), stats.log_e_min, stats.log_e_max, r.clamped);
  r.value.nu = to_unit(params.poisson_ratio, stats.nu_min, stats.nu_max, r.clamped);
  r.value.rho = to_unit(std::log10(params.density), stats.log_rho_min, stats.log_rho_max, r.clamped);
  return r;
}

ContinuousParams denormalize(const NormalizedParams& normalized, const NormStats& stats) {
  stats.validate();
  return {std::pow(10.0, from_unit(normalized.e, stats.log_e_min, stats.log_e_max)),
          from_unit(normalized.nu, stats.nu_min, stats.nu_max),
          std::pow(10.0, from_unit(normalized.rho, stats.log_rho_min, stats.log_rho_max))};
}

LameParams lame_from(double young_modulus, double poisson_ratio, MaterialClass cls) {
  ContinuousParams{young_modulus, poisson_ratio, 1.0}.validate();
  if (poisson_ratio > 0.49 && cls != MaterialClass::Rigid) {
    throw Error(ErrorCode::InvalidArgument,
                "poisson ratio " + std::to_string(poisson_ratio) + " too close to 0.5 for a deformable class");
  }
  const double e = young_modulus, nu = poisson_ratio;
  return {e / (2.0 * (1.0 + nu)), e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))};
}

// ---------------------------------------------------------------------------
// Specs and sampling

void MaterialSpec::validate() const {
  if (parts.empty()) throw Error(ErrorCode::SchemaError, "material spec has no parts");
  for (const auto& [name, r] : parts) {
    auto bad = [&](const std::string& why) { throw Error(ErrorCode::SchemaError, "part '" + name + "': " + why); };
    if (r.cls == MaterialClass::Background) bad("background is not a part material");
    for (const ValueRange* range : {&r.e, &r.nu, &r.rho}) {
      if (!std::isfinite(range->min) || !std::isfinite(range->max) || range->min > range->max) {
        bad("range must be finite with min <= max");
      }
    }
    if (!(r.e.min > 0.0)) bad("E must be positive");
    if (!(r.rho.min > 0.0)) bad("density must be positive");
    if (!(r.nu.min > 0.0) || !(r.nu.max < 0.5)) bad("nu must lie in (0, 0.5)");
  }
  for (const auto& c : constraints) {
    for (const auto& ref : constraint::referenced_parts(*c.expr)) {
      if (!parts.contains(ref)) {
        throw Error(ErrorCode::SchemaError, "constraint '" + c.source + "' references unknown part '" + ref + "'");
      }
    }
  }
}

void MaterialSpec::add_constraint(const std::string& source) {
  constraints.push_back({source, constraint::parse(source)});
}

SamplingExhausted::SamplingExhausted(const std::string& violated, int tries)
    : Error(ErrorCode::SamplingExhausted,
            "no sample satisfied all constraints after " + std::to_string(tries) + " tries; last violated: " + violated),
      violated_(violated) {}

namespace {

double log_uniform(Rng& rng, const ValueRange& r) {
  if (r.min == r.max) return r.min;
  const double u = rng.uniform();
  const double v = std::exp(std::log(r.min) + u * (std::log(r.max) - std::log(r.min)));
  return std::clamp(v, r.min, r.max);
}

double linear_uniform(Rng& rng, const ValueRange& r) {
  if (r.min == r.max) return r.min;
  return std::clamp(rng.uniform(r.min, r.max), r.min, r.max);
}

}  // namespace

SampledMaterials sample_spec(const MaterialSpec& spec, std::uint64_t seed, int max_tries) {
  if (max_tries < 1) throw Error(ErrorCode::InvalidArgument, "max_tries must be >= 1");
  spec.validate();
  Rng rng(seed);
  std::string last_violated;
  for (int attempt = 0; attempt < max_tries; ++attempt) {
    SampledMaterials out;
    for (const auto& [name, r] : spec.parts) {
      PartSample s;
      s.cls = r.cls;
      s.params.young_modulus = log_uniform(rng, r.e);
      s.params.poisson_ratio = linear_uniform(rng, r.nu);
      s.params.density = log_uniform(rng, r.rho);
      out.emplace(name, s);
    }
    const ParamSample values = params_of(out);
    bool ok = true;
    for (const auto& c : spec.constraints) {
      if (!constraint::evaluate(*c.expr, values)) {
        ok = false;
        last_violated = c.source;
        break;
      }
    }
    if (ok) return out;
  }
  throw SamplingExhausted(last_violated, max_tries);
}

ParamSample params_of(const SampledMaterials& sampled) {
  ParamSample out;
  for (const auto& [name, s] : sampled) out.emplace(name, s.params);
  return out;
}

}  // namespace pixie
