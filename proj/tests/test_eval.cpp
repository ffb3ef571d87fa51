#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "pixie/eval.hpp"

using namespace pixie;

namespace {

mpm::Trajectory random_traj(std::mt19937_64& rng, int frames, int particles) {
  std::normal_distribution<double> g;
  mpm::Trajectory t;
  for (int f = 0; f < frames; ++f) {
    std::vector<Vec3> x;
    for (int p = 0; p < particles; ++p) x.emplace_back(g(rng), g(rng), g(rng));
    t.positions.push_back(x);
  }
  return t;
}

}  // namespace

TEST_CASE("trajectory_rmse identity, offset and recomputation") {
  std::mt19937_64 rng(4);
  const auto a = random_traj(rng, 5, 10);
  const auto same = trajectory_rmse(a, a);
  for (double r : same.per_frame) CHECK(r == 0.0);

  auto b = a;
  for (auto& frame : b.positions)
    for (auto& x : frame) x += Vec3(0.1, 0, 0);
  for (double r : trajectory_rmse(a, b).per_frame) CHECK(r == doctest::Approx(0.1).epsilon(1e-12));

  const auto c = random_traj(rng, 5, 10);
  const auto r = trajectory_rmse(a, c);
  double mean = 0;
  for (int f = 0; f < 5; ++f) {
    double s = 0;
    for (int p = 0; p < 10; ++p)
      for (int k = 0; k < 3; ++k) s += std::pow(a.positions[f][p][k] - c.positions[f][p][k], 2);
    const double want = std::sqrt(s / 10);
    CHECK(std::abs(r.per_frame[f] - want) <= 1e-12);
    mean += want / 5;
  }
  CHECK(std::abs(r.mean - mean) <= 1e-12);

  auto short_traj = a;
  short_traj.positions.pop_back();
  CHECK_THROWS_AS(trajectory_rmse(a, short_traj), Error);
  auto fewer = a;
  fewer.positions[2].pop_back();
  CHECK_THROWS_AS(trajectory_rmse(a, fewer), Error);
}

TEST_CASE("trajectory_rmse satisfies the triangle inequality per frame") {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 50; ++t) {
    const auto a = random_traj(rng, 3, 7), b = random_traj(rng, 3, 7), c = random_traj(rng, 3, 7);
    const auto ab = trajectory_rmse(a, b), bc = trajectory_rmse(b, c), ac = trajectory_rmse(a, c);
    for (int f = 0; f < 3; ++f) CHECK(ac.per_frame[f] <= ab.per_frame[f] + bc.per_frame[f] + 1e-12);
  }
}

TEST_CASE("aggregate mean and standard error") {
  Metrics a, b;
  a.mat_acc = 0.5;
  b.mat_acc = 1.0;
  const auto r = aggregate({a, b});
  CHECK(r.mat_acc.mean == doctest::Approx(0.75));
  CHECK(r.mat_acc.stderr_ == doctest::Approx(0.25));
  CHECK(aggregate({a}).mat_acc.stderr_ == 0.0);
  CHECK(aggregate({a, a, a}).mat_acc.stderr_ == 0.0);
  CHECK_THROWS_AS(aggregate({}), Error);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u;
  std::vector<Metrics> ms(6);
  for (auto& m : ms) m.mse_nu = u(rng);
  const auto r1 = aggregate(ms);
  std::reverse(ms.begin(), ms.end());
  const auto r2 = aggregate(ms);
  CHECK(r1.mse_nu.mean == doctest::Approx(r2.mse_nu.mean).epsilon(1e-15));
  CHECK(r1.mse_nu.stderr_ == doctest::Approx(r2.mse_nu.stderr_).epsilon(1e-12));
}

TEST_CASE("report formats") {
  Metrics a;
  a.mat_acc = 1.0;
  const auto r = aggregate({a, a});
  const std::string csv = report_csv(r);
  CHECK(csv.rfind("scene,mat_acc,mse_log_e,mse_nu,mse_log_rho,avg_cont_mse\n", 0) == 0);
  CHECK(csv.find("\nmean,1,") != std::string::npos);
  CHECK(csv.find("\nstderr,0,") != std::string::npos);
  const std::string json = report_json(r);
  CHECK(json.find("\"scene_count\": 2") != std::string::npos);
}
