#include "pixie/mpm.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "pixie/random.hpp"

namespace pixie::mpm {

namespace {

struct Stencil {
  std::array<int, 3> base{};
  std::array<std::array<double, 3>, 3> w{};   // [axis][offset]
  std::array<std::array<double, 3>, 3> dw{};  // derivative per unit grid spacing
  Vec3 fx;
};

Stencil make_stencil(const Vec3& x, const SimConfig& cfg, std::size_t particle) {
  Stencil s;
  const Vec3 g = (x - cfg.origin) / cfg.dx;
  for (int a = 0; a < 3; ++a) {
    s.base[a] = static_cast<int>(std::floor(g[a] - 0.5));
    if (!std::isfinite(g[a]) || s.base[a] < 0 || s.base[a] + 2 >= cfg.grid_res) {
      throw Error(ErrorCode::DomainExit, "particle " + std::to_string(particle) + " left the simulation grid");
    }
    const double f = g[a] - s.base[a];
    s.fx[a] = f;
    s.w[a] = {0.5 * (1.5 - f) * (1.5 - f), 0.75 - (f - 1.0) * (f - 1.0), 0.5 * (f - 0.5) * (f - 0.5)};
    s.dw[a] = {f - 1.5, -2.0 * (f - 1.0), f - 0.5};
  }
  return s;
}

double drucker_prager_alpha(double friction_angle_deg) {
  const double s = std::sin(friction_angle_deg * std::numbers::pi / 180.0);
  return std::sqrt(2.0 / 3.0) * 2.0 * s / (3.0 - s);
}

Mat3 compose(const PolarSvd& svd, const Vec3& sigma) { return svd.U * sigma.asDiagonal() * svd.V.transpose(); }

ReturnMapResult von_mises(const Mat3& F, const ContinuousParams& params, double yield_stress,
                          const PlasticState& aux) {
  const PolarSvd svd = polar_svd(F);
  const LameParams lame = lame_from(params.young_modulus, params.poisson_ratio);
  const Vec3 eps = svd.sigma.array().max(1e-6).log().matrix();
  const Vec3 dev = eps - Vec3::Constant(eps.sum() / 3.0);
  const double norm = dev.norm();
  // sqrt(3/2) * |tau_dev| <= yield, with |tau_dev| = 2 mu |dev|.
  const double limit = std::sqrt(2.0 / 3.0) * yield_stress / (2.0 * lame.mu);
  if (norm <= limit) return {F, aux};
  const Vec3 projected = eps - (norm - limit) / norm * dev;
  return {compose(svd, projected.array().exp().matrix()), aux};
}

ReturnMapResult drucker_prager(const Mat3& F, const ContinuousParams& params, double friction_angle_deg,
                               const PlasticState& aux) {
  const PolarSvd svd = polar_svd(F);
  const LameParams lame = lame_from(params.young_modulus, params.poisson_ratio);
  const Vec3 eps = svd.sigma.array().max(1e-6).log().matrix();
  const double trace = eps.sum();
  if (trace >= 0.0) {
    // Tension: no cohesion to resist it, project to the cone apex.
    return {svd.U * svd.V.transpose(), aux};
  }
  const Vec3 dev = eps - Vec3::Constant(trace / 3.0);
  const double norm = dev.norm();
  const double alpha = drucker_prager_alpha(friction_angle_deg);
  const double delta_gamma = norm + (3.0 * lame.lambda + 2.0 * lame.mu) / (2.0 * lame.mu) * trace * alpha;
  if (delta_gamma <= 0.0) return {F, aux};
  const Vec3 projected = eps - delta_gamma / norm * dev;
  return {compose(svd, projected.array().exp().matrix()), aux};
}

ReturnMapResult snow(const Mat3& F, const PlasticityTable& t, const PlasticState& aux) {
  const PolarSvd svd = polar_svd(F);
  Vec3 clamped;
  for (int a = 0; a < 3; ++a) clamped[a] = std::clamp(svd.sigma[a], 1.0 - t.snow_theta_c, 1.0 + t.snow_theta_s);
  PlasticState next = aux;
  next.jp = std::clamp(aux.jp * svd.sigma.prod() / clamped.prod(), t.snow_min_jp, t.snow_max_jp);
  if (clamped == svd.sigma) return {F, next};
  return {compose(svd, clamped), next};
}

}  // namespace

Particle make_particle(const Vec3& x, double volume, MaterialClass cls, const ContinuousParams& params) {
  if (cls == MaterialClass::Background) throw Error(ErrorCode::InvalidArgument, "particle cannot be background");
  params.validate();
  if (!(volume > 0.0)) throw Error(ErrorCode::InvalidArgument, "particle volume must be > 0");
  Particle p;
  p.x = x;
  p.volume = volume;
  p.mass = params.density * volume;
  p.cls = cls;
  p.params = params;
  p.kinematic = cls == MaterialClass::Rigid;
  return p;
}

PolarSvd polar_svd(const Mat3& F) {
  if (!F.allFinite()) throw Error(ErrorCode::SingularMatrix, "SVD of a non-finite matrix");
  Eigen::JacobiSVD<Mat3> svd(F, Eigen::ComputeFullU | Eigen::ComputeFullV);
  PolarSvd out{svd.matrixU(), svd.matrixV(), svd.singularValues()};
  if (out.U.determinant() < 0.0) {
    out.U.col(2) *= -1.0;
    out.sigma[2] *= -1.0;
  }
  if (out.V.determinant() < 0.0) {
    out.V.col(2) *= -1.0;
    out.sigma[2] *= -1.0;
  }
  return out;
}

Mat3 elastic_stress(const Mat3& F, double mu, double lambda) {
  const double J = F.determinant();
  if (!(J > 0.0) || !std::isfinite(J)) {
    throw Error(ErrorCode::SingularMatrix, "elastic_stress: det(F) must be positive, got " + std::to_string(J));
  }
  const PolarSvd svd = polar_svd(F);
  const Mat3 R = svd.U * svd.V.transpose();
  return 2.0 * mu * (F - R) + lambda * (J - 1.0) * J * F.inverse().transpose();
}

ReturnMapResult return_map(MaterialClass cls, const Mat3& F_trial, const ContinuousParams& params,
                           const PlasticState& aux, const PlasticityTable& table) {
  const double J = F_trial.determinant();
  if (!(J > 0.0) || !std::isfinite(J)) {
    throw Error(ErrorCode::SingularMatrix, "return_map: det(F_trial) must be positive, got " + std::to_string(J));
  }
  switch (cls) {
    case MaterialClass::Background:
    case MaterialClass::Elastic:
    case MaterialClass::Foam:
    case MaterialClass::Rigid:
      return {F_trial, aux};
    case MaterialClass::Metal:
      return von_mises(F_trial, params, table.metal_yield_stress, aux);
    case MaterialClass::Plasticine:
      return von_mises(F_trial, params, table.plasticine_yield_stress, aux);
    case MaterialClass::Sand:
      return drucker_prager(F_trial, params, table.sand_friction_angle_deg, aux);
    case MaterialClass::Snow:
      return snow(F_trial, table, aux);
  }
  throw Error(ErrorCode::InvalidArgument, "return_map: unknown material class");
}

LameParams effective_lame(MaterialClass cls, const ContinuousParams& params, const PlasticState& aux,
                          const PlasticityTable& table) {
  LameParams l = lame_from(params.young_modulus, params.poisson_ratio, cls);
  if (cls == MaterialClass::Snow) {
    const double h = std::exp(table.snow_hardening * (1.0 - aux.jp));
    l.mu *= h;
    l.lambda *= h;
  }
  return l;
}

void SimConfig::validate() const {
  auto bad = [](const std::string& why) { throw Error(ErrorCode::InvalidArgument, "sim config: " + why); };
  if (grid_res < 4) bad("grid_res must be >= 4");
  if (!(dx > 0.0)) bad("dx must be > 0");
  if (!(dt > 0.0)) bad("dt must be > 0");
  if (frames < 1) bad("frames must be >= 1");
  if (substeps < 1) bad("substeps must be >= 1");
  if (wind_ramp_frames < 0) bad("wind_ramp_frames must be >= 0");
  if (boundary_cells < 0 || 2 * boundary_cells >= grid_res) bad("boundary_cells out of range");
  if (!(damping >= 0.0)) bad("damping must be >= 0");
  if (!(cfl > 0.0)) bad("cfl must be > 0");
  if (!origin.allFinite() || !gravity.allFinite() || !wind.allFinite()) bad("vectors must be finite");
}

// ---------------------------------------------------------------------------
// Solver

Solver::Solver(SimConfig cfg, std::vector<Particle> particles) : cfg_(std::move(cfg)), particles_(std::move(particles)) {
  cfg_.validate();
  const std::size_t nodes = static_cast<std::size_t>(cfg_.grid_res) * cfg_.grid_res * cfg_.grid_res;
  nodes_.assign(nodes, Node{});
  touched_flag_.assign(nodes, 0);
  for (std::size_t i = 0; i < particles_.size(); ++i) {
    const auto& p = particles_[i];
    if (!(p.mass > 0.0) || !(p.volume > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "particle " + std::to_string(i) + " needs positive mass and volume");
    }
    if (!p.kinematic) lame_from(p.params.young_modulus, p.params.poisson_ratio, p.cls);
  }
}

double Solver::stable_dt() const {
  double vmax = 0.0, cmax = 0.0;
  for (const auto& p : particles_) {
    if (p.kinematic) continue;
    vmax = std::max(vmax, p.v.norm());
    const LameParams l = effective_lame(p.cls, p.params, p.aux, cfg_.plasticity);
    cmax = std::max(cmax, std::sqrt((l.lambda + 2.0 * l.mu) / (p.mass / p.volume)));
  }
  const double speed = vmax + cmax;
  return speed > 0.0 ? cfg_.cfl * cfg_.dx / speed : std::numeric_limits<double>::infinity();
}

Vec3 Solver::total_momentum() const {
  Vec3 m = Vec3::Zero();
  for (const auto& p : particles_) m += p.mass * p.v;
  return m;
}

StepStats Solver::step(double wind_scale) {
  const double limit = stable_dt();
  int count = 1;
  if (cfg_.dt > limit) count = static_cast<int>(std::ceil(cfg_.dt / limit));
  const double h = cfg_.dt / count;
  StepStats stats;
  for (int i = 0; i < count; ++i) stats = substep(h, wind_scale);
  stats.substeps = count;
  return stats;
}

void Solver::clear_grid() {
  for (std::size_t idx : touched_) {
    nodes_[idx] = Node{};
    touched_flag_[idx] = 0;
  }
  touched_.clear();
}

StepStats Solver::substep(double dt, double wind_scale) {
  clear_grid();
  const double dx = cfg_.dx;
  const double inv_dx = 1.0 / dx;
  StepStats stats;

  // P2G
  for (std::size_t pi = 0; pi < particles_.size(); ++pi) {
    const Particle& p = particles_[pi];
    const Stencil s = make_stencil(p.x, cfg_, pi);
    stats.particle_mass += p.mass;
    Mat3 stress_term = Mat3::Zero();
    if (!p.kinematic) {
      const LameParams l = effective_lame(p.cls, p.params, p.aux, cfg_.plasticity);
      stress_term = -p.volume * elastic_stress(p.F, l.mu, l.lambda) * p.F.transpose();
    }
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        for (int c = 0; c < 3; ++c) {
          const double w = s.w[0][a] * s.w[1][b] * s.w[2][c];
          const Vec3 grad_w(s.dw[0][a] * s.w[1][b] * s.w[2][c] * inv_dx, s.w[0][a] * s.dw[1][b] * s.w[2][c] * inv_dx,
                            s.w[0][a] * s.w[1][b] * s.dw[2][c] * inv_dx);
          const Vec3 dpos = (Vec3(a, b, c) - s.fx) * dx;
          const std::size_t idx = node_index(s.base[0] + a, s.base[1] + b, s.base[2] + c);
          Node& node = nodes_[idx];
          if (!touched_flag_[idx]) {
            touched_flag_[idx] = 1;
            touched_.push_back(idx);
          }
          const Vec3 mv = w * p.mass * (p.v + p.C * dpos);
          node.mass += w * p.mass;
          node.momentum += mv;
          if (p.kinematic) {
            node.kin_mass += w * p.mass;
            node.kin_momentum += w * p.mass * p.v;
          } else {
            node.force += stress_term * grad_w;
          }
        }
      }
    }
  }

  // Grid update
  const Vec3 accel = cfg_.gravity + wind_scale * cfg_.wind;
  const double damp = cfg_.damping > 0.0 ? std::exp(-cfg_.damping * dt) : 1.0;
  const int res = cfg_.grid_res, bc = cfg_.boundary_cells;
  for (std::size_t idx : touched_) {
    Node& node = nodes_[idx];
    stats.grid_mass += node.mass;
    if (node.mass <= 0.0) {
      node.velocity.setZero();
      continue;
    }
    Vec3 v = (node.momentum + dt * node.force) / node.mass + dt * accel;
    v *= damp;
    if (node.kin_mass > 0.0) v = node.kin_momentum / node.kin_mass;
    const int ijk[3] = {static_cast<int>(idx / (static_cast<std::size_t>(res) * res)),
                        static_cast<int>((idx / res) % res), static_cast<int>(idx % res)};
    for (int a = 0; a < 3; ++a) {
      const bool low = ijk[a] < bc;
      const bool high = ijk[a] >= res - bc;
      if (!low && !high) continue;
      const Boundary kind = cfg_.boundary[2 * a + (high ? 1 : 0)];
      if (kind == Boundary::Sticky) {
        v.setZero();
      } else if (kind == Boundary::Slip) {
        v[a] = 0.0;
      }
    }
    node.velocity = v;
  }

  // G2P
  const Mat3 I = Mat3::Identity();
  for (std::size_t pi = 0; pi < particles_.size(); ++pi) {
    Particle& p = particles_[pi];
    if (p.kinematic) {
      stats.momentum += p.mass * p.v;
      continue;
    }
    const Stencil s = make_stencil(p.x, cfg_, pi);
    Vec3 v = Vec3::Zero();
    Mat3 B = Mat3::Zero();
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        for (int c = 0; c < 3; ++c) {
          const double w = s.w[0][a] * s.w[1][b] * s.w[2][c];
          const Vec3 dpos = (Vec3(a, b, c) - s.fx) * dx;
          const Vec3& vi = nodes_[node_index(s.base[0] + a, s.base[1] + b, s.base[2] + c)].velocity;
          v += w * vi;
          B += w * vi * dpos.transpose();
        }
      }
    }
    p.v = v;
    p.C = (4.0 * inv_dx * inv_dx) * B;
    p.x += dt * v;
    if (!p.v.allFinite() || !p.x.allFinite() || !p.C.allFinite()) {
      throw Error(ErrorCode::NonFinite, "NaN detected at particle " + std::to_string(pi));
    }
    const Mat3 F_trial = (I + dt * p.C) * p.F;
    try {
      const ReturnMapResult r = return_map(p.cls, F_trial, p.params, p.aux, cfg_.plasticity);
      p.F = r.F;
      p.aux = r.aux;
    } catch (const Error& e) {
      throw Error(e.code(), "particle " + std::to_string(pi) + ": " + e.what());
    }
    stats.momentum += p.mass * p.v;
  }
  time_ += dt;
  return stats;
}

Trajectory run(const SimConfig& cfg, std::vector<Particle> particles) {
  Solver solver(cfg, std::move(particles));
  Trajectory traj;
  traj.positions.reserve(cfg.frames);
  for (int f = 0; f < cfg.frames; ++f) {
    const double wind_scale =
        cfg.wind_ramp_frames > 0 ? std::min(1.0, static_cast<double>(f + 1) / cfg.wind_ramp_frames) : 1.0;
    for (int s = 0; s < cfg.substeps; ++s) solver.step(wind_scale);
    std::vector<Vec3> x;
    x.reserve(solver.particles().size());
    for (const auto& p : solver.particles()) x.push_back(p.x);
    traj.positions.push_back(std::move(x));
    if (cfg.record_velocity) {
      std::vector<Vec3> v;
      v.reserve(solver.particles().size());
      for (const auto& p : solver.particles()) v.push_back(p.v);
      traj.velocities.push_back(std::move(v));
    }
  }
  return traj;
}

std::vector<Particle> sample_particles(const OccupancyMask& mask, const MaterialGrid& material,
                                       const SceneBounds& bounds, int ppv, std::uint64_t seed) {
  if (ppv < 1) throw Error(ErrorCode::InvalidArgument, "particles per voxel must be >= 1");
  if (mask.n() != material.n()) throw Error(ErrorCode::DimensionMismatch, "mask and material grid differ in n");
  const int n = mask.n();
  const Vec3 h = bounds.voxel_size(n);
  const double voxel_volume = h.prod();
  int k = 1;
  while (k * k * k < ppv) ++k;
  const int strata = k * k * k;

  Rng rng(seed);
  std::vector<Particle> out;
  std::vector<int> order(strata);
  for (std::size_t v = 0; v < mask.voxel_count(); ++v) {
    if (!mask.occupied(v)) continue;
    if (!material.occupied(v)) {
      throw Error(ErrorCode::InvalidArgument, "occupied voxel " + std::to_string(v) + " has no material");
    }
    const VoxelIndex idx = mask.unflatten(v);
    for (int i = 0; i < strata; ++i) order[i] = i;
    if (ppv < strata) {
      // Partial Fisher-Yates picks which strata receive a point.
      for (int i = 0; i < ppv; ++i) std::swap(order[i], order[i + static_cast<int>(rng.below(strata - i))]);
    }
    for (int i = 0; i < ppv; ++i) {
      const int cell = order[i];
      const int sx = cell / (k * k), sy = (cell / k) % k, sz = cell % k;
      const Vec3 local((sx + rng.uniform()) / k, (sy + rng.uniform()) / k, (sz + rng.uniform()) / k);
      const Vec3 x = bounds.min_corner + Vec3((idx[0] + local[0]) * h[0], (idx[1] + local[1]) * h[1],
                                              (idx[2] + local[2]) * h[2]);
      out.push_back(make_particle(x, voxel_volume / ppv, material.material_class(v), material.params(v)));
    }
  }
  return out;
}

}  // namespace pixie::mpm
