#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "pixie/grid.hpp"
#include "pixie/materials.hpp"

namespace pixie::mpm {

using Mat3 = Eigen::Matrix3d;

// Class-default plasticity constants. The learned parameter vector is only
// (class, E, nu, rho); everything else a return mapping needs lives here.
struct PlasticityTable {
  double metal_yield_stress = 1e7;       // Pa, von Mises
  double plasticine_yield_stress = 5e3;  // Pa, von Mises
  double sand_friction_angle_deg = 30.0;  // Drucker-Prager
  double snow_theta_c = 2.5e-2;           // critical compression
  double snow_theta_s = 7.5e-3;           // critical stretch
  double snow_hardening = 10.0;
  double snow_min_jp = 0.6;
  double snow_max_jp = 20.0;
};

// Per-particle plastic state. For snow, jp is the plastic volume ratio that
// drives hardening; other classes leave it at 1.
struct PlasticState {
  double jp = 1.0;
  bool operator==(const PlasticState&) const = default;
};

struct Particle {
  Vec3 x = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Mat3 F = Mat3::Identity();
  Mat3 C = Mat3::Zero();
  double mass = 0.0;
  double volume = 0.0;
  MaterialClass cls = MaterialClass::Elastic;
  ContinuousParams params;
  PlasticState aux;
  bool kinematic = false;
};

// Builds a particle with the given material; Rigid becomes kinematic.
Particle make_particle(const Vec3& x, double volume, MaterialClass cls, const ContinuousParams& params);

// SVD with proper rotations: F = U diag(sigma) V^T, det U = det V = 1.
struct PolarSvd {
  Mat3 U, V;
  Vec3 sigma;
};
PolarSvd polar_svd(const Mat3& F);

// Fixed-corotated first Piola-Kirchhoff stress.
Mat3 elastic_stress(const Mat3& F, double mu, double lambda);

struct ReturnMapResult {
  Mat3 F;
  PlasticState aux;
};

ReturnMapResult return_map(MaterialClass cls, const Mat3& F_trial, const ContinuousParams& params,
                           const PlasticState& aux, const PlasticityTable& table = {});

// Lamé parameters after snow hardening (identity scaling for other classes).
LameParams effective_lame(MaterialClass cls, const ContinuousParams& params, const PlasticState& aux,
                          const PlasticityTable& table);

enum class Boundary { Sticky, Slip, Open };

struct SimConfig {
  int grid_res = 64;      // nodes per axis
  double dx = 1.0 / 64;   // node spacing, m
  Vec3 origin = Vec3::Zero();
  double dt = 1e-4;       // s per step
  Vec3 gravity = Vec3(0.0, 0.0, -9.8);
  Vec3 wind = Vec3::Zero();  // body acceleration, m/s^2
  int wind_ramp_frames = 0;  // linear ramp length; 0 = full strength at once
  int frames = 50;
  int substeps = 10;  // steps per frame
  // Faces in order x-, x+, y-, y+, z-, z+.
  std::array<Boundary, 6> boundary = {Boundary::Sticky, Boundary::Sticky, Boundary::Sticky,
                                      Boundary::Sticky, Boundary::Sticky, Boundary::Sticky};
  int boundary_cells = 3;
  double damping = 0.0;  // 1/s
  double cfl = 0.5;
  PlasticityTable plasticity;
  bool record_velocity = false;

  void validate() const;
};

struct StepStats {
  int substeps = 1;
  double grid_mass = 0.0;      // after the last P2G
  double particle_mass = 0.0;
  Vec3 momentum = Vec3::Zero();  // sum m v after the last G2P
};

class Solver {
 public:
  Solver(SimConfig cfg, std::vector<Particle> particles);

  // Advances by cfg.dt, splitting into equal substeps when the CFL bound
  // dt * (max|v| + wave speed) <= cfl * dx would be violated.
  StepStats step(double wind_scale = 1.0);

  const std::vector<Particle>& particles() const { return particles_; }
  std::vector<Particle>& particles() { return particles_; }
  const SimConfig& config() const { return cfg_; }
  double time() const { return time_; }

  // Largest stable dt for the current state.
  double stable_dt() const;
  Vec3 total_momentum() const;

 private:
  struct Node {
    double mass = 0.0;
    Vec3 momentum = Vec3::Zero();
    Vec3 force = Vec3::Zero();
    double kin_mass = 0.0;
    Vec3 kin_momentum = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
  };

  StepStats substep(double dt, double wind_scale);
  void clear_grid();
  std::size_t node_index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * cfg_.grid_res + j) * cfg_.grid_res + k;
  }

  SimConfig cfg_;
  std::vector<Particle> particles_;
  std::vector<Node> nodes_;
  std::vector<std::uint8_t> touched_flag_;
  std::vector<std::size_t> touched_;
  double time_ = 0.0;
};

struct Trajectory {
  std::vector<std::vector<Vec3>> positions;   // per frame
  std::vector<std::vector<Vec3>> velocities;  // per frame when recorded
  std::size_t frame_count() const { return positions.size(); }
};

Trajectory run(const SimConfig& cfg, std::vector<Particle> particles);

// Jittered stratified sampling: ppv points per occupied voxel, material copied
// from the voxel, mass = rho * voxel volume / ppv.
std::vector<Particle> sample_particles(const OccupancyMask& mask, const MaterialGrid& material,
                                       const SceneBounds& bounds, int ppv, std::uint64_t seed);

}  // namespace pixie::mpm
