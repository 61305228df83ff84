#include <stdexcept>
#include <cmath>

#include "doctest.h"
#include "sbmrecon/broadcast.hpp"
#include "sbmrecon/stats.hpp"

using namespace sbm;

namespace {

// |observed - expected| <= z * sqrt(p (1 - p) / n) for a binomial proportion.
bool within_binomial(double observed, double p, double n, double z = 3.0) {
  return std::abs(observed - p) <= z * std::sqrt(p * (1.0 - p) / n);
}

}  // namespace

TEST_CASE("tree shape bookkeeping") {
  const std::int32_t counts[] = {2, 1, 3, 0, 0, 0, 0};
  const TreeShape t = TreeShape::from_child_counts(counts, 2);
  CHECK(t.size() == 7);
  CHECK(t.level(0).size() == 1);
  CHECK(t.level(1).size() == 2);
  CHECK(t.level(2).size() == 4);
  CHECK(t.level(3).empty());
  CHECK(t.parent(3) == 1);
  CHECK(t.parent(4) == 2);
  CHECK(t.depth(6) == 2);
  CHECK(t.descendants(2, 1).begin == 4);
  CHECK(t.descendants(2, 1).end == 7);
  CHECK(t.descendants(0, 2).size() == 4);
  for (NodeId u = 1; u < static_cast<NodeId>(t.size()); ++u) CHECK(t.depth(u) == t.depth(t.parent(u)) + 1);
}

TEST_CASE("a node at the depth limit cannot have children") {
  TreeShape t(0);
  const std::int32_t one[] = {1};
  CHECK_THROWS_AS(t.add_level(one), std::invalid_argument);
}

TEST_CASE("d-ary trees are complete") {
  Rng rng(1);
  const TreeShape t = sample_tree(TreeKind::d_ary(2), 3, rng);
  CHECK(t.size() == 15);
  CHECK(t.level(3).size() == 8);
  CHECK_THROWS_AS(sample_tree(TreeKind{TreeKind::Family::DAry, 2.5}, 2, rng), std::invalid_argument);
}

TEST_CASE("Galton-Watson mean size matches d^j per level") {
  Rng rng(2);
  const int trials = 100000;
  MomentAccumulator size;
  for (int i = 0; i < trials; ++i) size.add(static_cast<double>(sample_tree(TreeKind::galton_watson(3.0), 2, rng).size()));
  CHECK(std::abs(size.mean() - 13.0) <= 3.0 * size.std_error());
}

TEST_CASE("subcritical trees die out") {
  Rng rng(3);
  int alive = 0;
  for (int i = 0; i < 2000; ++i) alive += !sample_tree(TreeKind::galton_watson(0.5), 20, rng).level(20).empty();
  CHECK(alive <= 2);
}

TEST_CASE("zero flip probability copies the root spin") {
  BroadcastTree t = sample_broadcast(TreeKind::d_ary(3), 4, 0.0, 11);
  for (Spin s : t.sigma) CHECK(s == t.sigma[0]);
}

TEST_CASE("certain flips alternate by level") {
  BroadcastTree t = sample_broadcast(TreeKind::d_ary(2), 5, 1.0, 12);
  for (NodeId u = 0; u < static_cast<NodeId>(t.shape.size()); ++u)
    CHECK(t.sigma[u] == (t.shape.depth(u) % 2 == 0 ? t.sigma[0] : -t.sigma[0]));
}

TEST_CASE("edge agreement and two-step agreement rates") {
  const double eta = 1.0 / 6.0;
  const double theta = 1.0 - 2.0 * eta;
  std::int64_t child_agree = 0;
  std::int64_t children = 0;
  std::int64_t grand_agree = 0;
  std::int64_t grand = 0;
  std::int64_t root_plus = 0;
  const int trials = 100000;
  for (int i = 0; i < trials; ++i) {
    const BroadcastTree t = sample_broadcast(TreeKind::d_ary(3), 2, eta, static_cast<std::uint64_t>(i));
    root_plus += t.sigma[0] > 0;
    for (NodeId u = t.level(1).begin; u < t.level(1).end; ++u) {
      child_agree += t.sigma[u] == t.sigma[0];
      ++children;
    }
    for (NodeId u = t.level(2).begin; u < t.level(2).end; ++u) {
      grand_agree += t.sigma[u] == t.sigma[0];
      ++grand;
    }
  }
  CHECK(within_binomial(static_cast<double>(child_agree) / children, 5.0 / 6.0, children));
  CHECK(within_binomial(static_cast<double>(grand_agree) / grand, (1.0 + theta * theta) / 2.0, grand));
  CHECK(within_binomial(static_cast<double>(root_plus) / trials, 0.5, trials));
}

TEST_CASE("leaf noise flip rate") {
  BroadcastTree t = sample_broadcast(TreeKind::d_ary(10), 5, 0.2, 5);
  Rng rng(6);
  add_leaf_noise(t, 0.3, 5, rng);
  const NodeRange lv = t.level(5);
  REQUIRE(t.tau.size() == static_cast<std::size_t>(lv.size()));
  std::int64_t flips = 0;
  for (NodeId u = lv.begin; u < lv.end; ++u) flips += t.tau[u - lv.begin] != t.sigma[u];
  CHECK(within_binomial(static_cast<double>(flips) / lv.size(), 0.3, lv.size()));

  add_leaf_noise(t, 0.0, 5, rng);
  for (NodeId u = lv.begin; u < lv.end; ++u) CHECK(t.tau[u - lv.begin] == t.sigma[u]);
}

TEST_CASE("noise on an extinct level is a no-op") {
  BroadcastTree t;
  const std::int32_t none[] = {0};
  t.shape = TreeShape::from_child_counts(none, 2);
  t.sigma = {1};
  Rng rng(1);
  add_leaf_noise(t, 0.3, 2, rng);
  CHECK(t.tau.empty());
}

TEST_CASE("sampling is reproducible from the seed") {
  const BroadcastTree a = sample_broadcast(TreeKind::galton_watson(2.5), 6, 0.2, 99);
  const BroadcastTree b = sample_broadcast(TreeKind::galton_watson(2.5), 6, 0.2, 99);
  CHECK(a.sigma == b.sigma);
  CHECK(a.shape.size() == b.shape.size());
}

TEST_CASE("global spin flip symmetry of level sums") {
  // E[sum of level spins] = 0 unconditionally.
  MomentAccumulator acc;
  for (int i = 0; i < 50000; ++i) {
    const BroadcastTree t = sample_broadcast(TreeKind::d_ary(2), 3, 0.25, static_cast<std::uint64_t>(i) + 1000);
    double s = 0.0;
    for (Spin x : level_spins(t, 3)) s += x;
    acc.add(s);
  }
  CHECK(std::abs(acc.mean()) <= 4.0 * acc.std_error());
}
