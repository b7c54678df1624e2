#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "frsmon/frs_set.hpp"
#include "oracles.hpp"

#include <cmath>
#include <random>

using namespace frsmon;
using doctest::Approx;

namespace {

FrsSet single(double level, double scale) {
  return FrsSet({FrsComponent{GaussianMode(Vec2(1, 1), Mat2::Identity()), level}}, scale);
}

}  // namespace

TEST_CASE("membership examples") {
  const Vec2 mean(1, 1);
  CHECK(single(4.0, 1.0).contains(mean));
  CHECK_FALSE(single(4.0, 1.0).contains(mean + Vec2(2.1, 0)));
  CHECK(single(4.0, 1.21).contains(mean + Vec2(2.1, 0)));
  CHECK(frs_contains(single(4.0, 1.0), mean + Vec2(2.0, 0)));
}

TEST_CASE("zero-level components are empty") {
  const FrsSet s({FrsComponent{GaussianMode(Vec2(0, 0), Mat2::Identity()), 0.0},
                  FrsComponent{GaussianMode(Vec2(10, 0), Mat2::Identity()), 1.0}});
  CHECK_FALSE(s.contains(Vec2(0, 0)));
  CHECK(s.contains(Vec2(10, 0)));
}

TEST_CASE("semi-axes and summed area") {
  Mat2 c;
  c << 4, 0, 0, 1;
  const FrsSet s({FrsComponent{GaussianMode(Vec2(0, 0), c), 2.0},
                  FrsComponent{GaussianMode(Vec2(5, 0), Mat2::Identity()), 1.0}},
                 3.0);
  CHECK(s.semi_axes(0).x() == Approx(std::sqrt(3.0 * 4.0 * 2.0)));
  CHECK(s.semi_axes(0).y() == Approx(std::sqrt(3.0 * 1.0 * 2.0)));
  CHECK(s.summed_area() == Approx(3.0 * (4 * std::numbers::pi + std::numbers::pi)));
}

TEST_CASE("build_frs reuses levels at every scale") {
  std::mt19937_64 rng(20);
  const GmmPrediction g({GaussianMode(Vec2(0, 0), oracle::random_spd(rng)),
                         GaussianMode(Vec2(6, 1), oracle::random_spd(rng))},
                        {0.6, 0.4});
  const auto sol = solve_levels(g, 0.9);
  const auto raw = build_frs(g, sol);
  const auto wide = build_frs(g, sol, 2.5);
  CHECK(raw.scale() == 1.0);
  CHECK(wide.scale() == 2.5);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(raw.components()[i].level == sol.levels[i]);
    CHECK(wide.components()[i].level == sol.levels[i]);
  }
  const auto ci = build_uniform_level_frs(g, 9.21034);
  CHECK(ci.components()[0].level == 9.21034);
  CHECK(ci.components()[1].level == 9.21034);
}

TEST_CASE("membership is monotone in the scale") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int violations = 0;
  for (int n = 0; n < 10000; ++n) {
    const GmmPrediction g({GaussianMode(Vec2(0, 0), oracle::random_spd(rng)),
                           GaussianMode(Vec2(3, 0), oracle::random_spd(rng))},
                          oracle::random_weights(rng, 2));
    const auto sol = solve_levels(g, 0.9);
    const double a1 = 0.05 + 5 * u(rng);
    const double a2 = a1 * (1 + u(rng));
    const Vec2 x(10 * u(rng) - 4, 10 * u(rng) - 5);
    if (build_frs(g, sol, a1).contains(x) && !build_frs(g, sol, a2).contains(x)) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("membership agrees with a direct Mahalanobis check") {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(-6.0, 6.0);
  const GmmPrediction g({GaussianMode(Vec2(0, 0), oracle::random_spd(rng)),
                         GaussianMode(Vec2(2, 2), oracle::random_spd(rng)),
                         GaussianMode(Vec2(-3, 1), oracle::random_spd(rng))},
                        {0.5, 0.3, 0.2});
  const auto sol = solve_levels(g, 0.95);
  const double scale = 1.7;
  const auto frs = build_frs(g, sol, scale);
  for (int n = 0; n < 5000; ++n) {
    const Vec2 x(u(rng), u(rng));
    bool expect = false;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto& m = g.modes()[i];
      if (sol.levels[i] > 0 &&
          oracle::explicit_mahalanobis(x, m.mean(), scale * m.cov()) <= sol.levels[i]) {
        expect = true;
      }
    }
    CHECK(frs.contains(x) == expect);
  }
}

TEST_CASE("Monte-Carlo mass") {
  SUBCASE("single mode matches the chi-square mass") {
    const GmmPrediction g({GaussianMode(Vec2(0, 0), Mat2::Identity())}, {1.0});
    const auto est = frs_mass(build_frs(g, solve_levels(g, 0.95)), g, 200000, 7);
    CHECK(std::abs(est.mass - 0.95) <= 3 * est.std_error);
  }
  SUBCASE("disjoint modes hold at least tau") {
    const GmmPrediction g({GaussianMode(Vec2(0, 0), Mat2::Identity()),
                           GaussianMode(Vec2(50, 0), 2.0 * Mat2::Identity())},
                          {0.7, 0.3});
    const auto est = frs_mass(build_frs(g, solve_levels(g, 0.9)), g, 100000, 8);
    CHECK(est.mass >= 0.9 - 3 * est.std_error);
  }
  SUBCASE("overlapping modes hold at least the per-mode constraint") {
    const GmmPrediction g({GaussianMode(Vec2(0, 0), Mat2::Identity()),
                           GaussianMode(Vec2(0.5, 0), 1.5 * Mat2::Identity())},
                          {0.5, 0.5});
    const auto sol = solve_levels(g, 0.9);
    const auto est = frs_mass(build_frs(g, sol), g, 100000, 9);
    CHECK(est.mass >= sol.achieved_mass - 3 * est.std_error);
  }
  SUBCASE("deterministic for a seed") {
    const GmmPrediction g({GaussianMode(Vec2(0, 0), Mat2::Identity())}, {1.0});
    const auto frs = build_frs(g, solve_levels(g, 0.5));
    CHECK(frs_mass(frs, g, 5000, 3).mass == frs_mass(frs, g, 5000, 3).mass);
  }
}
