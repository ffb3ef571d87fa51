#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include <Eigen/Dense>

#include "doctest.h"
#include "pixie/mpm.hpp"
#include "pixie/random.hpp"
#include "pixie/trajectory_io.hpp"

using namespace pixie;
using namespace pixie::mpm;

namespace {

Mat3 random_rotation(Rng& rng) {
  Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  return q.normalized().toRotationMatrix();
}

Mat3 random_matrix(Rng& rng) {
  Mat3 a;
  for (int i = 0; i < 9; ++i) a(i / 3, i % 3) = rng.normal();
  return a;
}

ContinuousParams soft() { return {1e4, 0.3, 1000.0}; }

SimConfig open_config(int res, double dx, double dt) {
  SimConfig cfg;
  cfg.grid_res = res;
  cfg.dx = dx;
  cfg.dt = dt;
  cfg.gravity = Vec3::Zero();
  cfg.boundary.fill(Boundary::Open);
  cfg.frames = 1;
  cfg.substeps = 1;
  return cfg;
}

std::vector<Particle> block(const Vec3& lo, int per_axis, double spacing, MaterialClass cls,
                            const ContinuousParams& params) {
  std::vector<Particle> out;
  const double vol = spacing * spacing * spacing;
  for (int i = 0; i < per_axis; ++i) {
    for (int j = 0; j < per_axis; ++j) {
      for (int k = 0; k < per_axis; ++k) {
        out.push_back(make_particle(lo + spacing * Vec3(i + 0.5, j + 0.5, k + 0.5), vol, cls, params));
      }
    }
  }
  return out;
}

Vec3 log_sigma(const Mat3& F) { return polar_svd(F).sigma.array().log().matrix(); }

}  // namespace

TEST_CASE("rest configuration is stress free") {
  CHECK(elastic_stress(Mat3::Identity(), 3.0, 5.0).norm() == 0.0);
}

TEST_CASE("uniaxial stretch matches the closed form") {
  const Vec3 s(1.1, 1.0, 1.0);
  const Mat3 P = elastic_stress(s.asDiagonal(), 1.0, 1.0);
  // R = I, J = 1.1: P = 2(F - I) + (J - 1) J F^{-T}.
  Mat3 expected = Mat3::Zero();
  expected(0, 0) = 2.0 * 0.1 + 0.1 * 1.1 / 1.1;
  expected(1, 1) = 0.1 * 1.1;
  expected(2, 2) = 0.1 * 1.1;
  CHECK((P - expected).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(P(0, 0) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(P(1, 1) == doctest::Approx(0.11).epsilon(1e-12));
}

TEST_CASE("small strains reproduce linear elasticity") {
  Rng rng(1);
  const double mu = 2.0, lambda = 3.0, eps = 1e-6;
  for (int trial = 0; trial < 20; ++trial) {
    const Mat3 A = random_matrix(rng);
    const Mat3 P = elastic_stress(Mat3::Identity() + eps * A, mu, lambda);
    const Mat3 e = 0.5 * eps * (A + A.transpose());
    const Mat3 linear = 2.0 * mu * e + lambda * e.trace() * Mat3::Identity();
    CHECK((P - linear).norm() <= 1e-3 * linear.norm() + 1e-12);
  }
}

TEST_CASE("stress is frame indifferent") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat3 F = Mat3::Identity() + 0.2 * random_matrix(rng);
    if (F.determinant() <= 0.1) continue;
    const Mat3 Q = random_rotation(rng);
    CHECK((elastic_stress(Q * F, 1.5, 0.7) - Q * elastic_stress(F, 1.5, 0.7)).norm() <= 1e-10);
  }
}

TEST_CASE("inverted or singular deformation is rejected") {
  Mat3 F = Mat3::Identity();
  F(2, 2) = -1.0;
  CHECK_THROWS_AS(elastic_stress(F, 1.0, 1.0), Error);
  CHECK_THROWS_AS(elastic_stress(Mat3::Zero(), 1.0, 1.0), Error);
  CHECK_THROWS_AS(return_map(MaterialClass::Sand, F, soft(), {}), Error);
}

TEST_CASE("polar svd returns proper rotations") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Mat3 F = random_matrix(rng);
    const auto s = polar_svd(F);
    CHECK(s.U.determinant() == doctest::Approx(1.0));
    CHECK(s.V.determinant() == doctest::Approx(1.0));
    CHECK((s.U * s.sigma.asDiagonal() * s.V.transpose() - F).norm() <= 1e-10 * F.norm());
  }
}

TEST_CASE("snow clamps stretch to the critical value") {
  Vec3 s(1.2, 1.0, 1.0);
  const auto r = return_map(MaterialClass::Snow, Mat3(s.asDiagonal()), {1.4e5, 0.2, 400.0}, {});
  const auto sigma = polar_svd(r.F).sigma;
  std::array<double, 3> got{sigma[0], sigma[1], sigma[2]};
  std::sort(got.begin(), got.end());
  CHECK(got[2] == doctest::Approx(1.0075).epsilon(1e-12));
  CHECK(got[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(got[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.aux.jp == doctest::Approx(1.2 / 1.0075).epsilon(1e-12));
}

TEST_CASE("sand in hydrostatic tension returns to the cone apex") {
  Rng rng(4);
  const ContinuousParams sand{3.5e7, 0.3, 2000.0};
  const LameParams l = lame_from(sand.young_modulus, sand.poisson_ratio);
  const double s = std::sin(30.0 * std::numbers::pi / 180.0);
  const double alpha = std::sqrt(2.0 / 3.0) * 2.0 * s / (3.0 - s);
  const double k = alpha * (3.0 * l.lambda + 2.0 * l.mu) / (2.0 * l.mu);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat3 U = random_rotation(rng), V = random_rotation(rng);
    const Vec3 sig = Vec3::Constant(1.0 + rng.uniform(0.01, 0.2));
    const Mat3 F = U * sig.asDiagonal() * V.transpose();
    const auto r = return_map(MaterialClass::Sand, F, sand, {});
    CHECK((r.F - U * V.transpose()).norm() <= 1e-10);

    // Brute force: no feasible log strain is closer to the trial than the result.
    const Vec3 trial_eps = sig.array().log().matrix();
    const double got = (log_sigma(r.F) - trial_eps).norm();
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 20000; ++i) {
      const double tr = -rng.uniform(0.0, 0.5);
      Vec3 dev(rng.normal(), rng.normal(), rng.normal());
      dev -= Vec3::Constant(dev.sum() / 3.0);
      const double len = rng.uniform(0.0, -k * tr);
      if (dev.norm() > 0.0) dev *= len / dev.norm();
      const Vec3 eps = dev + Vec3::Constant(tr / 3.0);
      best = std::min(best, (eps - trial_eps).norm());
    }
    CHECK(got <= best + 1e-9);
  }
}

TEST_CASE("von Mises projection lands on the yield surface and keeps volume") {
  Rng rng(5);
  const ContinuousParams clay{2e5, 0.35, 1800.0};
  const LameParams l = lame_from(clay.young_modulus, clay.poisson_ratio);
  const double limit = std::sqrt(2.0 / 3.0) * PlasticityTable{}.plasticine_yield_stress / (2.0 * l.mu);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat3 U = random_rotation(rng), V = random_rotation(rng);
    const Vec3 sig(1.2, 0.9, 1.05);
    const Mat3 F = U * sig.asDiagonal() * V.transpose();
    const auto r = return_map(MaterialClass::Plasticine, F, clay, {});
    const Vec3 e = log_sigma(r.F);
    const Vec3 dev = e - Vec3::Constant(e.sum() / 3.0);
    CHECK(dev.norm() == doctest::Approx(limit).epsilon(1e-9));
    CHECK(r.F.determinant() == doctest::Approx(F.determinant()).epsilon(1e-9));
  }
}

TEST_CASE("return mapping is a projection for every class") {
  Rng rng(6);
  const PlasticityTable table;
  for (MaterialClass cls : kAllMaterialClasses) {
    const ContinuousParams params = cls == MaterialClass::Metal ? ContinuousParams{2e9, 0.3, 7800.0} : soft();
    for (int trial = 0; trial < 100; ++trial) {
      const Mat3 U = random_rotation(rng), V = random_rotation(rng);
      const Vec3 sig(std::exp(rng.uniform(-0.3, 0.3)), std::exp(rng.uniform(-0.3, 0.3)),
                     std::exp(rng.uniform(-0.3, 0.3)));
      const Mat3 F = U * sig.asDiagonal() * V.transpose();
      const auto once = return_map(cls, F, params, {}, table);
      const auto twice = return_map(cls, once.F, params, once.aux, table);
      CHECK((twice.F - once.F).norm() <= 1e-9 * once.F.norm());
      CHECK(twice.aux.jp == doctest::Approx(once.aux.jp).epsilon(1e-9));
    }
  }
}

TEST_CASE("feasible trial states are unchanged") {
  const Mat3 F = Vec3(1.001, 0.999, 1.0).asDiagonal();
  for (MaterialClass cls : {MaterialClass::Elastic, MaterialClass::Foam, MaterialClass::Metal, MaterialClass::Snow}) {
    const ContinuousParams p = cls == MaterialClass::Metal ? ContinuousParams{2e9, 0.3, 7800.0} : soft();
    CHECK(return_map(cls, F, p, {}).F == F);
  }
  // Sand under mild compression with little shear stays inside the cone.
  const Mat3 G = Vec3(0.99, 0.991, 0.99).asDiagonal();
  CHECK(return_map(MaterialClass::Sand, G, {3.5e7, 0.3, 2000.0}, {}).F == G);
}

TEST_CASE("a free particle falls by the discrete symplectic sum") {
  auto cfg = open_config(32, 0.05, 1e-3);
  cfg.gravity = Vec3(0, 0, -9.8);
  std::vector<Particle> ps{make_particle(Vec3(0.8, 0.8, 0.8), 1e-6, MaterialClass::Elastic, soft())};
  Solver solver(cfg, ps);
  for (int i = 0; i < 100; ++i) solver.step();
  const double dz = solver.particles()[0].x.z() - 0.8;
  CHECK(std::abs(dz - (-9.8 * 1e-6 * 5050.0)) <= 1e-9);
  CHECK(std::abs(dz + 0.049490) <= 1e-9);
  CHECK(std::abs(solver.particles()[0].x.x() - 0.8) <= 1e-15);
}

TEST_CASE("momentum and mass are conserved without forcing") {
  Rng rng(7);
  auto cfg = open_config(24, 0.05, 2e-4);
  auto ps = block(Vec3(0.4, 0.4, 0.4), 6, 0.025, MaterialClass::Elastic, {5e4, 0.3, 1000.0});
  for (auto& p : ps) {
    p.v = Vec3(0.1, -0.05, 0.02) + 0.2 * Vec3(rng.normal(), rng.normal(), rng.normal());
    p.F = Mat3::Identity() + 0.02 * random_matrix(rng);
  }
  double total_mass = 0.0;
  for (const auto& p : ps) total_mass += p.mass;
  Solver solver(cfg, ps);
  const Vec3 m0 = solver.total_momentum();
  for (int i = 0; i < 200; ++i) {
    const auto stats = solver.step();
    CHECK(std::abs(stats.grid_mass - total_mass) <= 1e-12 * total_mass);
    CHECK((stats.momentum - m0).norm() <= 1e-10 * m0.norm());
  }
  CHECK((solver.total_momentum() - m0).norm() <= 1e-8 * m0.norm());
}

TEST_CASE("an unstressed block at rest stays at rest") {
  auto cfg = open_config(16, 0.05, 1e-3);
  cfg.boundary.fill(Boundary::Sticky);
  auto ps = block(Vec3(0.3, 0.3, 0.3), 4, 0.025, MaterialClass::Elastic, soft());
  Solver solver(cfg, ps);
  for (int i = 0; i < 50; ++i) solver.step();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    CHECK(solver.particles()[i].v.norm() <= 1e-14);
    CHECK((solver.particles()[i].x - ps[i].x).norm() <= 1e-14);
  }
}

TEST_CASE("rigid translation is Galilean invariant") {
  auto cfg = open_config(32, 0.05, 1e-3);
  const Vec3 v0(0.3, -0.2, 0.1);
  auto ps = block(Vec3(0.6, 0.6, 0.6), 4, 0.025, MaterialClass::Elastic, soft());
  for (auto& p : ps) p.v = v0;
  Solver solver(cfg, ps);
  for (int i = 0; i < 200; ++i) solver.step();
  const double t = solver.time();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const Vec3 expected = ps[i].x + v0 * t;
    CHECK((solver.particles()[i].x - expected).norm() <= 1e-8 * expected.norm());
  }
}

TEST_CASE("sticky and slip faces constrain velocity near the wall") {
  auto cfg = open_config(16, 0.05, 1e-3);
  cfg.gravity = Vec3(0, 0, -9.8);
  cfg.boundary[4] = Boundary::Sticky;
  std::vector<Particle> ps{make_particle(Vec3(0.4, 0.4, 0.07), 1e-6, MaterialClass::Elastic, soft())};
  Solver sticky(cfg, ps);
  for (int i = 0; i < 20; ++i) sticky.step();
  CHECK(sticky.particles()[0].v.norm() <= 1e-14);

  cfg.boundary[4] = Boundary::Slip;
  ps[0].v = Vec3(0.5, 0, 0);
  Solver slip(cfg, ps);
  for (int i = 0; i < 20; ++i) slip.step();
  CHECK(std::abs(slip.particles()[0].v.z()) <= 1e-14);
  CHECK(slip.particles()[0].v.x() == doctest::Approx(0.5));
}

TEST_CASE("kinematic particles never move under gravity") {
  auto cfg = open_config(16, 0.05, 1e-3);
  cfg.gravity = Vec3(0, 0, -9.8);
  std::vector<Particle> ps{make_particle(Vec3(0.4, 0.4, 0.4), 1e-6, MaterialClass::Rigid, {1e9, 0.3, 1000.0})};
  CHECK(ps[0].kinematic);
  Solver solver(cfg, ps);
  for (int i = 0; i < 20; ++i) solver.step();
  CHECK(solver.particles()[0].x == ps[0].x);
}

TEST_CASE("leaving the grid through an open face is reported") {
  auto cfg = open_config(8, 0.1, 1e-2);
  std::vector<Particle> ps{make_particle(Vec3(0.6, 0.4, 0.4), 1e-6, MaterialClass::Elastic, soft())};
  ps[0].v = Vec3(2.0, 0, 0);
  Solver solver(cfg, ps);
  try {
    for (int i = 0; i < 100; ++i) solver.step();
    FAIL("expected DomainExit");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DomainExit);
    CHECK(std::string(e.what()).find("particle 0") != std::string::npos);
  }
}

TEST_CASE("large steps are split to respect the CFL bound") {
  auto cfg = open_config(16, 0.05, 1e-2);
  std::vector<Particle> ps{make_particle(Vec3(0.4, 0.4, 0.4), 1e-6, MaterialClass::Elastic, {1e7, 0.3, 1000.0})};
  Solver solver(cfg, ps);
  const double limit = solver.stable_dt();
  const auto stats = solver.step();
  CHECK(stats.substeps == static_cast<int>(std::ceil(1e-2 / limit)));
  CHECK(stats.substeps > 1);
  CHECK(solver.time() == doctest::Approx(1e-2));
}

TEST_CASE("run records one snapshot per frame and is reproducible") {
  auto cfg = open_config(16, 0.05, 1e-3);
  cfg.gravity = Vec3(0, 0, -1.0);
  cfg.frames = 7;
  cfg.substeps = 3;
  cfg.record_velocity = true;
  const auto ps = block(Vec3(0.3, 0.3, 0.3), 3, 0.025, MaterialClass::Snow, {1.4e5, 0.2, 400.0});
  const auto a = run(cfg, ps);
  const auto b = run(cfg, ps);
  CHECK(a.frame_count() == 7);
  CHECK(a.velocities.size() == 7);
  CHECK(a.positions == b.positions);
}

TEST_CASE("stratified sampling sets mass from density and voxel volume") {
  OccupancyMask mask(64);
  MaterialGrid material(64);
  const std::size_t v = mask.flat_voxel(10, 20, 30);
  mask.at(v) = 1;
  material.set(v, MaterialClass::Elastic, {2e4, 0.4, 200.0});
  const auto ps = sample_particles(mask, material, SceneBounds{}, 8, 42);
  REQUIRE(ps.size() == 8);
  const double h = 1.0 / 64;
  for (const auto& p : ps) {
    CHECK(p.mass == doctest::Approx(200.0 * h * h * h / 8).epsilon(1e-6));
    CHECK(p.volume == doctest::Approx(h * h * h / 8).epsilon(1e-12));
    CHECK(p.F == Mat3::Identity());
    CHECK(p.v == Vec3::Zero());
    CHECK_FALSE(p.kinematic);
    CHECK(p.x.x() >= 10 * h);
    CHECK(p.x.x() <= 11 * h);
    CHECK(p.x.z() >= 30 * h);
    CHECK(p.x.z() <= 31 * h);
  }
  // One point per octant of the voxel.
  std::set<int> octants;
  for (const auto& p : ps) {
    const Vec3 local = (p.x - Vec3(10, 20, 30) * h) / h;
    octants.insert((local.x() >= 0.5) * 4 + (local.y() >= 0.5) * 2 + (local.z() >= 0.5));
  }
  CHECK(octants.size() == 8);

  const auto again = sample_particles(mask, material, SceneBounds{}, 8, 42);
  for (std::size_t i = 0; i < ps.size(); ++i) CHECK(again[i].x == ps[i].x);
  const auto other = sample_particles(mask, material, SceneBounds{}, 8, 43);
  CHECK(other[0].x != ps[0].x);

  material.set(v, MaterialClass::Rigid, {1e9, 0.3, 500.0});
  for (const auto& p : sample_particles(mask, material, SceneBounds{}, 5, 1)) CHECK(p.kinematic);
  CHECK(sample_particles(OccupancyMask(64), MaterialGrid(64), SceneBounds{}, 8, 1).empty());
  CHECK_THROWS_AS(sample_particles(mask, material, SceneBounds{}, 0, 1), Error);
}

TEST_CASE("trajectories round-trip through PXFRAME1 and export text formats") {
  Trajectory t;
  t.positions = {{Vec3(0.5, 0.25, 0.125), Vec3(1, 2, 3)}, {Vec3(0.75, 0.5, 0.25), Vec3(-1, 0, 1)}};
  const auto bytes = encode_trajectory(t);
  CHECK(bytes.size() == 2 * (8 + 4 + 2 * 12));
  CHECK(std::string(bytes.begin(), bytes.begin() + 8) == std::string("PXFRAME1"));
  const auto back = decode_trajectory(bytes);
  CHECK(back.positions == t.positions);
  auto broken = bytes;
  broken[8 + 4 + 2 * 12] = 'X';
  CHECK_THROWS_AS(decode_trajectory(broken), Error);

  const auto dir = std::filesystem::temp_directory_path() / "pixie_traj_test";
  std::filesystem::create_directories(dir);
  write_trajectory_csv(dir / "t.csv", t);
  std::ifstream csv(dir / "t.csv");
  std::string header, first;
  std::getline(csv, header);
  std::getline(csv, first);
  CHECK(header == "frame,id,x,y,z");
  CHECK(first == "0,0,0.5,0.25,0.125");
  write_trajectory_ply(dir, "f", t);
  CHECK(std::filesystem::exists(dir / "f_0000.ply"));
  CHECK(std::filesystem::exists(dir / "f_0001.ply"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("config validation rejects nonsense") {
  SimConfig cfg;
  cfg.dt = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = SimConfig{};
  cfg.grid_res = 2;
  CHECK_THROWS_AS(cfg.validate(), Error);
  CHECK_NOTHROW(SimConfig{}.validate());
}
