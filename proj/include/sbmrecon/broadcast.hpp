#pragma once

#include <cstdint>
#include <vector>

#include "sbmrecon/rng.hpp"
#include "sbmrecon/tree_shape.hpp"

namespace sbm {

/// Offspring law of the broadcast tree.
struct TreeKind {
  enum class Family { DAry, GaltonWatson };
  Family family = Family::GaltonWatson;
  double mean = 0.0;  // d; integral for DAry

  static TreeKind d_ary(int d) { return {Family::DAry, static_cast<double>(d)}; }
  static TreeKind galton_watson(double d) { return {Family::GaltonWatson, d}; }
  bool is_d_ary() const { return family == Family::DAry; }
};

/// Spins are stored as int8 values in {+1, -1}.
using Spin = std::int8_t;

struct BroadcastTree {
  TreeShape shape;
  TreeKind kind;
  std::vector<Spin> sigma;  // empty until run_broadcast
  std::vector<Spin> tau;    // one entry per node of tau_level; empty when absent
  int tau_level = -1;

  NodeRange level(int k) const { return shape.level(k); }
};

/// Largest tree sample_tree will build before throwing std::length_error.
inline constexpr std::size_t kMaxTreeNodes = 50'000'000;

/// Structure only. d-ary: every node above depth k has exactly d children.
/// Galton-Watson: i.i.d. Poisson(d) child counts, nodes below depth k never
/// sampled.
TreeShape sample_tree(const TreeKind& kind, int k, Rng& rng);

/// Root spin uniform, each edge flips independently with probability eta.
void run_broadcast(BroadcastTree& t, double eta, Rng& rng);

/// Sets tau on level k: tau_u = -sigma_u with probability delta.
void add_leaf_noise(BroadcastTree& t, double delta, int k, Rng& rng);

/// Convenience: sample_tree + run_broadcast, each from its own stream of seed.
BroadcastTree sample_broadcast(const TreeKind& kind, int k, double eta, std::uint64_t seed);

/// Spins of level k in arena order.
std::vector<Spin> level_spins(const BroadcastTree& t, int k);

}  // namespace sbm
