#include <stdexcept>
#include <random>

#include "doctest.h"
#include "sbmrecon/params.hpp"

using namespace sbm;

TEST_CASE("tree parameters from block-model intensities") {
  const TreeParams t = derive_tree_params({1000, 5.0, 1.0});
  CHECK(t.d == doctest::Approx(3.0));
  CHECK(t.eta == doctest::Approx(1.0 / 6.0));
  CHECK(t.theta == doctest::Approx(2.0 / 3.0));
  CHECK(t.delta == 0.0);

  const TreeParams u = derive_tree_params({1000, 30.0, 4.0}, 0.1);
  CHECK(u.d == doctest::Approx(17.0));
  CHECK(u.eta == doctest::Approx(2.0 / 17.0));
  CHECK(u.theta == doctest::Approx(13.0 / 17.0));
  CHECK(u.delta == 0.1);
}

TEST_CASE("equal intensities carry no signal") {
  CHECK_THROWS_WITH_AS(derive_tree_params({100, 3.0, 3.0}), doctest::Contains("degenerate signal"),
                       std::invalid_argument);
}

TEST_CASE("edge probabilities above one are rejected") {
  CHECK_THROWS_AS(ModelParams({2, 4.0, 1.0}).validate(), std::invalid_argument);
  CHECK_THROWS_AS(derive_tree_params({2, 1.0, 4.0}), std::invalid_argument);
  CHECK_NOTHROW(ModelParams({10, 10.0, 0.0}).validate());
}

TEST_CASE("signal strength on both sides of the threshold") {
  CHECK(ks_signal({1000, 5.0, 1.0}) == doctest::Approx(16.0 / 12.0));
  CHECK(ks_signal({1000, 3.0, 2.0}) == doctest::Approx(0.1));
}

TEST_CASE("a < b gives a negative theta") {
  const TreeParams t = derive_tree_params({1000, 1.0, 5.0});
  CHECK(t.theta == doctest::Approx(-2.0 / 3.0));
  CHECK(t.eta == doctest::Approx(5.0 / 6.0));
}

TEST_CASE("round trip through tree parameters (random intensities)") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.01, 50.0);
  for (int i = 0; i < 2000; ++i) {
    const double a = u(rng);
    const double b = u(rng);
    if (a == b) continue;
    const ModelParams m{1'000'000, a, b};
    const TreeParams t = derive_tree_params(m);
    CHECK(t.theta == 1.0 - 2.0 * t.eta);
    const EdgeIntensities back = intensities_from_tree(t.d, t.theta);
    CHECK(std::abs(back.a - a) <= 1e-12 * a);
    CHECK(std::abs(back.b - b) <= 1e-12 * b);
    CHECK(std::abs(ks_signal(m) - t.theta * t.theta * t.d) <= 1e-12 * ks_signal(m));
  }
}

TEST_CASE("tree parameter validation") {
  CHECK_NOTHROW(TreeParams::from_theta(3.0, 0.5, 0.2).validate());
  CHECK_THROWS_AS(TreeParams::from_theta(3.0, 0.5, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(TreeParams::from_theta(3.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(TreeParams::from_theta(0.0, 0.5), std::invalid_argument);
}
