#include <cmath>
#include <random>

#include "doctest.h"
#include "pixie/materials.hpp"

using namespace pixie;

TEST_CASE("material class roster") {
  CHECK(kMaterialClassCount == 8);
  CHECK(static_cast<int>(MaterialClass::Foam) == 7);
  for (auto c : kAllMaterialClasses) CHECK(parse_material_class(material_class_name(c)) == c);
  CHECK_FALSE(parse_material_class("rubber").has_value());
  CHECK_THROWS_AS(material_class_from_index(8), Error);
}

TEST_CASE("continuous params invariants") {
  CHECK(ContinuousParams{2e4, 0.4, 200}.valid());
  CHECK_FALSE(ContinuousParams{0, 0.4, 200}.valid());
  CHECK_FALSE(ContinuousParams{1, 0.5, 200}.valid());
  CHECK_FALSE(ContinuousParams{1, 0.0, 200}.valid());
  CHECK_FALSE(ContinuousParams{1, 0.3, -1}.valid());
  MaterialGrid g(2);
  CHECK_THROWS_AS(g.set(0, MaterialClass::Background, {1, 0.3, 1}), Error);
  CHECK_THROWS_AS(g.set(0, MaterialClass::Elastic, {1, 0.7, 1}), Error);
}

TEST_CASE("normalize endpoints and a hand-computed interior value") {
  const NormStats s = NormStats::defaults();
  CHECK(normalize({8e2, 0.3, 100}, s).value.e == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(normalize({8e10, 0.3, 100}, s).value.e == doctest::Approx(1.0).epsilon(1e-12));
  const double want = 2.0 * (std::log10(2e4) - std::log10(8e2)) / (std::log10(8e10) - std::log10(8e2)) - 1.0;
  CHECK(want == doctest::Approx(-0.65052).epsilon(1e-5));
  CHECK(normalize({2e4, 0.3, 100}, s).value.e == doctest::Approx(want).epsilon(1e-12));
  CHECK(normalize({2e4, 0.15, 40}, s).value.nu == doctest::Approx(-1.0));
  CHECK(normalize({2e4, 0.45, 3000}, s).value.rho == doctest::Approx(1.0));
}

TEST_CASE("normalize clamps and counts out-of-range channels") {
  const auto r = normalize({1e12, 0.49, 10}, NormStats::defaults());
  CHECK(r.clamped == 3);
  CHECK(r.value.e == 1.0);
  CHECK(r.value.nu == 1.0);
  CHECK(r.value.rho == -1.0);
}

TEST_CASE("degenerate stats are rejected") {
  NormStats s = NormStats::defaults();
  s.nu_max = s.nu_min;
  try {
    normalize({1e4, 0.3, 100}, s);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateStats);
  }
}

TEST_CASE("normalize and denormalize are inverses on random in-range samples") {
  const NormStats s = NormStats::defaults();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const ContinuousParams p{std::pow(10.0, s.log_e_min + u(rng) * (s.log_e_max - s.log_e_min)),
                             s.nu_min + u(rng) * (s.nu_max - s.nu_min),
                             std::pow(10.0, s.log_rho_min + u(rng) * (s.log_rho_max - s.log_rho_min))};
    const auto q = denormalize(normalize(p, s).value, s);
    CHECK(std::abs(q.young_modulus / p.young_modulus - 1.0) <= 1e-9);
    CHECK(std::abs(q.poisson_ratio / p.poisson_ratio - 1.0) <= 1e-9);
    CHECK(std::abs(q.density / p.density - 1.0) <= 1e-9);
  }
}

TEST_CASE("lame_from closed forms") {
  auto l = lame_from(2e4, 0.4);
  CHECK(l.mu == doctest::Approx(7142.857142857).epsilon(1e-12));
  CHECK(l.lambda == doctest::Approx(28571.42857142857).epsilon(1e-12));
  l = lame_from(1e6, 0.3);
  CHECK(l.mu == doctest::Approx(384615.3846153846).epsilon(1e-12));
  CHECK(l.lambda == doctest::Approx(576923.0769230769).epsilon(1e-12));
  for (double nu : {0.1, 0.25, 0.45}) CHECK(lame_from(2.0 * (1.0 + nu), nu).mu == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(lame_from(1e4, 0.495), Error);
  CHECK_NOTHROW(lame_from(1e4, 0.495, MaterialClass::Rigid));
}

TEST_CASE("lame_from agrees with the bulk/shear route") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double e = std::pow(10.0, 2 + 9 * u(rng)), nu = 0.01 + 0.47 * u(rng);
    const double bulk = e / (3.0 * (1.0 - 2.0 * nu));
    const double shear = e / (2.0 * (1.0 + nu));
    const double lambda = bulk - 2.0 * shear / 3.0;
    const auto l = lame_from(e, nu);
    CHECK(std::abs(l.mu / shear - 1.0) <= 1e-12);
    CHECK(std::abs(l.lambda / lambda - 1.0) <= 1e-12);
  }
}

namespace {

MaterialSpec tree_spec() {
  MaterialSpec spec;
  spec.parts["leaves"] = {MaterialClass::Elastic, {2e4, 2e4}, {0.4, 0.4}, {100, 300}};
  spec.parts["trunk"] = {MaterialClass::Elastic, {2e6, 2e6}, {0.4, 0.4}, {200, 400}};
  spec.add_constraint("leaves.density < trunk.density");
  return spec;
}

}  // namespace

TEST_CASE("sample_spec respects constraints and is reproducible") {
  const MaterialSpec spec = tree_spec();
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const auto s = sample_spec(spec, seed);
    CHECK(s.at("leaves").params.density < s.at("trunk").params.density);
    CHECK(s.at("leaves").params.density >= 100);
    CHECK(s.at("trunk").params.density <= 400);
    CHECK(s == sample_spec(spec, seed));
  }
  CHECK(sample_spec(spec, 1) != sample_spec(spec, 2));
}

TEST_CASE("degenerate ranges come back verbatim") {
  MaterialSpec spec;
  spec.parts["pot"] = {MaterialClass::Rigid, {2e8, 2e8}, {0.4, 0.4}, {400, 400}};
  const auto s = sample_spec(spec, 42);
  CHECK(s.at("pot").cls == MaterialClass::Rigid);
  CHECK(s.at("pot").params == ContinuousParams{2e8, 0.4, 400});
}

TEST_CASE("log-uniform draws for E: median near the geometric mean") {
  MaterialSpec spec;
  spec.parts["a"] = {MaterialClass::Elastic, {1e2, 1e6}, {0.2, 0.3}, {10, 1000}};
  int below = 0;
  for (std::uint64_t seed = 0; seed < 2000; ++seed) below += sample_spec(spec, seed).at("a").params.young_modulus < 1e4;
  CHECK(below > 900);
  CHECK(below < 1100);
}

TEST_CASE("unsatisfiable constraint exhausts max_tries") {
  MaterialSpec spec;
  spec.parts["a"] = {MaterialClass::Elastic, {1e3, 1e4}, {0.2, 0.3}, {10, 1000}};
  spec.add_constraint("a.E < a.E");
  try {
    sample_spec(spec, 0, 25);
    FAIL("expected throw");
  } catch (const SamplingExhausted& e) {
    CHECK(e.code() == ErrorCode::SamplingExhausted);
    CHECK(e.violated_constraint() == "a.E < a.E");
  }
  CHECK_THROWS_AS(sample_spec(spec, 0, 0), Error);
}

TEST_CASE("spec validation") {
  MaterialSpec spec;
  spec.parts["a"] = {MaterialClass::Elastic, {1e4, 1e3}, {0.2, 0.3}, {10, 1000}};
  CHECK_THROWS_AS(spec.validate(), Error);
  spec.parts["a"].e = {1e3, 1e4};
  spec.add_constraint("b.E > 1");
  CHECK_THROWS_AS(spec.validate(), Error);
}
