#include <stdexcept>
#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "sbmrecon/bpcore.hpp"

using namespace sbm;

namespace {

std::vector<Spin> random_spins(std::mt19937_64& rng, std::size_t n) {
  std::vector<Spin> out(n);
  for (auto& s : out) s = (rng() & 1U) ? Spin{1} : Spin{-1};
  return out;
}

std::vector<int> as_ints(const std::vector<Spin>& s) { return {s.begin(), s.end()}; }

}  // namespace

TEST_CASE("combining child magnetizations: closed forms") {
  const double one[] = {0.8};
  CHECK(bp_combine(one, 0.5) == doctest::Approx(0.4).epsilon(1e-14));
  const double two[] = {1.0, 1.0};
  CHECK(bp_combine(two, 0.5) == doctest::Approx(0.8).epsilon(1e-11));
  const double mixed[] = {0.3, -0.9, 1.0};
  CHECK(bp_combine(mixed, 0.0) == 0.0);
  CHECK(bp_combine(std::span<const double>{}, 0.7) == 0.0);
}

TEST_CASE("product form and log-ratio form agree") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-0.99, 0.99);
  for (int rep = 0; rep < 500; ++rep) {
    const double theta = u(rng);
    std::vector<double> xs(1 + rng() % 6);
    for (auto& x : xs) x = u(rng);
    double p = 1.0;
    double m = 1.0;
    for (double x : xs) {
      p *= 1.0 + theta * x;
      m *= 1.0 - theta * x;
    }
    CHECK(bp_combine(xs, theta) == doctest::Approx((p - m) / (p + m)).epsilon(1e-12));
  }
}

TEST_CASE("combination is odd in values and theta, bounded and increasing for positive theta") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> pos(0.05, 0.95);
  for (int rep = 0; rep < 500; ++rep) {
    const double theta = pos(rng);
    std::vector<double> xs(1 + rng() % 5);
    for (auto& x : xs) x = u(rng) * 0.98;
    std::vector<double> neg(xs);
    for (auto& x : neg) x = -x;
    const double base = bp_combine(xs, theta);
    CHECK(bp_combine(neg, theta) == doctest::Approx(-base).epsilon(1e-14));
    CHECK(std::abs(base) <= 1.0);
    const std::size_t i = rng() % xs.size();
    std::vector<double> bumped(xs);
    bumped[i] += 1e-3;
    CHECK(bp_combine(bumped, theta) >= base);
    CHECK(bp_combine(xs, -theta) == doctest::Approx(-base).epsilon(1e-14));
  }
}

TEST_CASE("clamping only matters at saturation") {
  const double sure[] = {1.0, 1.0, 1.0};
  CHECK(bp_combine(sure, 1.0, 0.0) == 1.0);
  const double clamped = bp_combine(sure, 1.0, 1e-9);
  CHECK(clamped < 1.0);
  CHECK(clamped == doctest::Approx(1.0 - 1e-9).epsilon(1e-12));
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-0.9, 0.9);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> xs(1 + rng() % 4);
    for (auto& x : xs) x = u(rng);
    CHECK(std::abs(bp_combine(xs, 0.6, 1e-12) - bp_combine(xs, 0.6, 0.0)) <= 1e-11);
  }
}

TEST_CASE("enumeration in the library matches an independent enumerator") {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 80; ++rep) {
    const int k = 1 + static_cast<int>(rng() % 3);
    const TreeShape t = oracle::random_tree(rng, k, 12);
    const auto obs = random_spins(rng, static_cast<std::size_t>(t.level(k).size()));
    const double theta = std::uniform_real_distribution<double>(-0.95, 0.95)(rng);
    CHECK(exact_posterior(t, theta, obs, std::nullopt) ==
          doctest::Approx(oracle::brute_posterior(t, theta, as_ints(obs), std::nullopt)).epsilon(1e-12));
    CHECK(exact_posterior(t, theta, obs, 0.3) ==
          doctest::Approx(oracle::brute_posterior(t, theta, as_ints(obs), 0.3)).epsilon(1e-12));
  }
}

TEST_CASE("recursion equals the exact posterior on random small trees") {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 200; ++rep) {
    const int k = 1 + static_cast<int>(rng() % 4);
    const TreeShape t = oracle::random_tree(rng, k, 15);
    const auto obs = random_spins(rng, static_cast<std::size_t>(t.level(k).size()));
    for (double theta : {0.9, -0.9, 0.5, -0.5, 0.1}) {
      CHECK(std::abs(bp_root(t, {theta, kDefaultClamp, LeafMode::Exact, 0.0}, obs) -
                     exact_posterior(t, theta, obs, std::nullopt)) <= 1e-9);
      CHECK(std::abs(bp_root(t, {theta, kDefaultClamp, LeafMode::Noisy, 0.3}, obs) -
                     exact_posterior(t, theta, obs, 0.3)) <= 1e-9);
    }
  }
}

TEST_CASE("an observation vector of the wrong length is rejected") {
  const std::int32_t counts[] = {2, 0, 0};
  const TreeShape t = TreeShape::from_child_counts(counts, 1);
  const std::vector<Spin> three{1, 1, 1};
  CHECK_THROWS_AS(bp_root(t, {0.5}, three), std::invalid_argument);
  CHECK_THROWS_AS(exact_posterior(t, 0.5, three), std::invalid_argument);
}

TEST_CASE("contradictory noiseless observations have zero likelihood") {
  // theta = 1 forbids any flip, so two disagreeing children are impossible.
  const std::int32_t counts[] = {2, 0, 0};
  const TreeShape t = TreeShape::from_child_counts(counts, 1);
  const std::vector<Spin> obs{1, -1};
  CHECK_THROWS_AS(exact_posterior(t, 1.0, obs), std::domain_error);
}

TEST_CASE("stable tanh difference") {
  for (double a : {-3.0, -0.2, 0.0, 0.4, 2.5})
    for (double b : {-1.0, 0.0, 0.1, 3.0})
      CHECK(tanh_difference(a, b) == doctest::Approx(std::tanh(a) - std::tanh(b)).epsilon(1e-12));
  const double tiny = tanh_difference(31.0, 30.0);
  CHECK(tiny > 0.0);
  CHECK(tiny == doctest::Approx(2.0 * (std::exp(-60.0) - std::exp(-62.0))).epsilon(1e-9));
  CHECK(tanh_difference(-31.0, -30.0) == doctest::Approx(-tiny));
}

TEST_CASE("noiseless coupled trial has identical magnetizations") {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const CoupledTrial t = coupled_trial(TreeKind::galton_watson(2.0), 0.7, 0.0, 4, s, kDefaultClamp);
    CHECK(t.x == t.y);
  }
}

TEST_CASE("zero theta gives accuracy one half") {
  MagnetizationQuery q;
  q.kind = TreeKind::galton_watson(3.0);
  q.theta = 0.0;
  q.k = 4;
  q.trials = 200;
  q.seed = 3;
  CHECK(magnetization_stats(q).p_hat.value == 0.5);
  q.method = SamplingMethod::Population;
  CHECK(magnetization_stats(q).p_hat.value == 0.5);
}

TEST_CASE("population sampler agrees with explicit trees") {
  for (const TreeKind kind : {TreeKind::galton_watson(2.0), TreeKind::d_ary(3)}) {
    for (double delta : {0.0, 0.2}) {
      MagnetizationQuery q;
      q.kind = kind;
      q.theta = 0.7;
      q.delta = delta;
      q.k = 5;
      q.trials = 40000;
      q.seed = 10;
      q.method = SamplingMethod::Explicit;
      const auto ex = magnetization_stats(q);
      q.method = SamplingMethod::Population;
      q.seed = 11;
      const auto pop = magnetization_stats(q);
      CHECK(ex.method == SamplingMethod::Explicit);
      CHECK(pop.method == SamplingMethod::Population);
      CHECK(std::abs(ex.p_hat.value - pop.p_hat.value) <= 4.0 / kZ99 * std::hypot(ex.p_hat.ci, pop.p_hat.ci));
      CHECK(std::abs(ex.signed_mean.value - pop.signed_mean.value) <=
            4.0 / kZ99 * std::hypot(ex.signed_mean.ci, pop.signed_mean.ci));
    }
  }
}

TEST_CASE("signed mean equals mean square magnetization") {
  // Conditioned on a + root, E X = E X^2 for the exact posterior.
  MagnetizationQuery q;
  q.kind = TreeKind::d_ary(2);
  q.theta = 0.6;
  q.k = 4;
  q.trials = 40000;
  q.seed = 21;
  q.method = SamplingMethod::Explicit;
  const auto est = magnetization_stats(q);
  std::vector<double> sq(static_cast<std::size_t>(q.trials));
  for (std::size_t i = 0; i < sq.size(); ++i) {
    const double x = coupled_trial(q.kind, q.theta, 0.0, q.k, derive_seed(q.seed, stream::kTrial, i), q.clamp_eps).x;
    sq[i] = x * x;
  }
  const Estimate m2 = mean_estimate(sq);
  CHECK(std::abs(est.signed_mean.value - m2.value) <= std::hypot(est.signed_mean.ci, m2.ci));
}

TEST_CASE("results do not depend on the thread count") {
  MagnetizationQuery q;
  q.kind = TreeKind::galton_watson(2.5);
  q.theta = 0.6;
  q.delta = 0.1;
  q.k = 4;
  q.trials = 3000;
  q.seed = 5;
  for (SamplingMethod m : {SamplingMethod::Explicit, SamplingMethod::Population}) {
    q.method = m;
    q.threads = 1;
    const auto one = magnetization_stats(q);
    q.threads = 4;
    const auto four = magnetization_stats(q);
    CHECK(one.p_hat.value == four.p_hat.value);
    CHECK(one.signed_mean.value == four.signed_mean.value);
  }
}

TEST_CASE("method resolution respects the node budget") {
  CHECK(resolve_method(TreeKind::galton_watson(3.0), 8, SamplingMethod::Auto) == SamplingMethod::Explicit);
  CHECK(resolve_method(TreeKind::galton_watson(17.0), 4, SamplingMethod::Auto) == SamplingMethod::Population);
  CHECK(resolve_method(TreeKind::galton_watson(17.0), 4, SamplingMethod::Explicit) == SamplingMethod::Explicit);
}

TEST_CASE("log gap of tanh matches the derivative far below resolution") {
  const double a = 30.0;
  const double log_gap = std::log(1e-20);
  // d/dh tanh = 1 - tanh^2 = 4 e^{-2h} / (1 + e^{-2h})^2
  const double expected = log_gap + std::log(4.0) - 2.0 * a - 2.0 * std::log1p(std::exp(-2.0 * a));
  CHECK(log_tanh_difference(a, a, log_gap) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(std::isinf(log_tanh_difference(1.0, 1.0, -std::numeric_limits<double>::infinity())));
  CHECK(std::exp(log_tanh_difference(0.3, 0.1, std::log(0.2))) == doctest::Approx(std::tanh(0.3) - std::tanh(0.1)));
}

TEST_CASE("tracked population gaps agree with direct differences where resolvable") {
  for (const TreeKind kind : {TreeKind::galton_watson(3.0), TreeKind::d_ary(4)}) {
    for (double theta : {0.7, -0.7}) {
      const PopulationLevels pop = population_levels(kind, theta, 0.3, 5, 5000, 21, 0.0, 1, true);
      int compared = 0;
      for (std::size_t j = 1; j < pop.hx.size(); ++j) {
        for (std::size_t i = 0; i < pop.hx[j].size(); ++i) {
          const double direct = pop.hx[j][i] - pop.hy[j][i];
          const double scale = std::max(1.0, std::abs(pop.hx[j][i]));
          if (std::abs(direct) < 1e-6 * scale) continue;
          const double tracked = pop.gap_sign[j][i] * std::exp(pop.log_gap[j][i]);
          CHECK(tracked == doctest::Approx(direct).epsilon(1e-6));
          ++compared;
        }
      }
      CHECK(compared > 10000);
    }
  }
}

TEST_CASE("saturated gaps shrink without hitting zero") {
  const PopulationLevels pop = population_levels(TreeKind::d_ary(40), 0.9, 0.4, 6, 200, 5, 0.0, 1, true);
  for (std::size_t j = 1; j < pop.hx.size(); ++j) {
    for (std::size_t i = 0; i < pop.hx[j].size(); ++i) {
      CHECK(std::isfinite(pop.log_gap[j][i]));
    }
  }
  CHECK(pop.log_gap[6][0] < -200.0);
}
