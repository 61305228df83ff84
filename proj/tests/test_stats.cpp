#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "sbmrecon/parallel.hpp"
#include "sbmrecon/rng.hpp"
#include "sbmrecon/stats.hpp"

using namespace sbm;

TEST_CASE("confidence intervals cover at the nominal rate") {
  const int streams = 4000;
  const int length = 1000;
  const double p = 0.3;
  int covered = 0;
  for (int s = 0; s < streams; ++s) {
    Rng rng = make_rng(77, stream::kTrial, static_cast<std::uint64_t>(s));
    std::vector<double> xs(length);
    for (auto& x : xs) x = bernoulli(rng, p) ? 1.0 : 0.0;
    const Estimate e = mean_estimate(xs);
    covered += std::abs(e.value - p) <= e.ci;
  }
  const double rate = static_cast<double>(covered) / streams;
  CHECK(rate >= 0.98);
  CHECK(rate <= 1.0);
}

TEST_CASE("accumulators merge associatively") {
  MomentAccumulator a;
  MomentAccumulator b;
  MomentAccumulator all;
  for (int i = 0; i < 100; ++i) {
    const double x = std::sin(i);
    (i % 3 == 0 ? a : b).add(x);
    all.add(x);
  }
  a.merge(b);
  CHECK(a.count == all.count);
  CHECK(a.mean() == doctest::Approx(all.mean()));
  CHECK(a.variance() == doctest::Approx(all.variance()));
}

TEST_CASE("variance estimate of a known law") {
  Rng rng(3);
  std::vector<double> xs(200000);
  for (auto& x : xs) x = uniform01(rng);
  const VarianceEstimate v = variance_estimate(xs);
  CHECK(std::abs(v.mean - 0.5) <= 4.0 * v.mean_se);
  CHECK(std::abs(v.variance - 1.0 / 12.0) <= 4.0 * v.variance_se);
  CHECK(v.variance_se > 0.0);
}

TEST_CASE("ratio of means") {
  const double num[] = {1.0, 2.0, 3.0};
  const double den[] = {2.0, 4.0, 6.0};
  const Estimate r = ratio_estimate(num, den);
  CHECK(r.value == doctest::Approx(0.5));
  CHECK(r.ci == doctest::Approx(0.0).epsilon(1e-12));
  const double zero[] = {0.0, 0.0, 0.0};
  CHECK(std::isnan(ratio_estimate(num, zero).value));
}

TEST_CASE("seed derivation separates streams") {
  CHECK(derive_seed(1, 2, 3) != derive_seed(1, 2, 4));
  CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 3));
  CHECK(derive_seed(1, 2, 3) != derive_seed(2, 2, 3));
  CHECK(derive_seed(5, 6, 7) == derive_seed(5, 6, 7));
}

TEST_CASE("poisson sampler mean and variance on both branches") {
  for (double mean : {0.5, 3.0, 17.0, 64.0}) {
    Rng rng(static_cast<std::uint64_t>(mean * 10));
    MomentAccumulator acc;
    for (int i = 0; i < 100000; ++i) acc.add(static_cast<double>(poisson(rng, mean)));
    CHECK(std::abs(acc.mean() - mean) <= 4.0 * std::sqrt(mean / 100000.0));
    CHECK(acc.variance() == doctest::Approx(mean).epsilon(0.03));
  }
}

TEST_CASE("parallel loop visits every index once and rethrows") {
  std::vector<int> hits(10000, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; }, 100);
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(
                      1000, 4,
                      [](std::size_t i) {
                        if (i == 500) throw std::runtime_error("boom");
                      },
                      10),
                  std::runtime_error);
}
