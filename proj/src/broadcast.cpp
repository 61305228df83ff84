#include "sbmrecon/broadcast.hpp"

#include <stdexcept>

namespace sbm {

TreeShape sample_tree(const TreeKind& kind, int k, Rng& rng) {
  if (k < 0) throw std::invalid_argument("negative tree depth");
  if (!(kind.mean > 0.0)) throw std::invalid_argument("mean offspring must be positive");
  const auto dary = static_cast<std::int32_t>(kind.mean);
  if (kind.is_d_ary() && static_cast<double>(dary) != kind.mean)
    throw std::invalid_argument("d-ary tree needs an integral d");

  TreeShape shape(k);
  std::vector<std::int32_t> counts;
  std::size_t total = 1;
  for (int j = 0; j < k; ++j) {
    const NodeRange lv = shape.level(j);
    counts.assign(static_cast<std::size_t>(lv.size()), 0);
    for (auto& c : counts) {
      c = kind.is_d_ary() ? dary : static_cast<std::int32_t>(poisson(rng, kind.mean));
      total += static_cast<std::size_t>(c);
    }
    if (total > kMaxTreeNodes) throw std::length_error("broadcast tree exceeds node budget");
    shape.add_level(counts);
  }
  return shape;
}

void run_broadcast(BroadcastTree& t, double eta, Rng& rng) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("eta outside [0, 1]");
  const auto n = static_cast<NodeId>(t.shape.size());
  t.sigma.assign(static_cast<std::size_t>(n), 1);
  t.sigma[0] = static_cast<Spin>(coin_sign(rng));
  for (NodeId u = 1; u < n; ++u) {
    const Spin p = t.sigma[static_cast<std::size_t>(t.shape.parent(u))];
    t.sigma[static_cast<std::size_t>(u)] = bernoulli(rng, eta) ? static_cast<Spin>(-p) : p;
  }
  t.tau.clear();
  t.tau_level = -1;
}

void add_leaf_noise(BroadcastTree& t, double delta, int k, Rng& rng) {
  if (!(delta >= 0.0 && delta < 0.5)) throw std::invalid_argument("delta outside [0, 1/2)");
  if (t.sigma.size() != t.shape.size()) throw std::logic_error("broadcast has not been run");
  const NodeRange lv = t.shape.level(k);
  t.tau.resize(static_cast<std::size_t>(lv.size()));
  t.tau_level = k;
  for (NodeId u = lv.begin; u < lv.end; ++u) {
    const Spin s = t.sigma[static_cast<std::size_t>(u)];
    // delta == 0 draws nothing, so noiseless runs share streams with noisy ones.
    t.tau[static_cast<std::size_t>(u - lv.begin)] =
        (delta > 0.0 && bernoulli(rng, delta)) ? static_cast<Spin>(-s) : s;
  }
}

BroadcastTree sample_broadcast(const TreeKind& kind, int k, double eta, std::uint64_t seed) {
  Rng tree_rng = make_rng(seed, stream::kTree);
  Rng spin_rng = make_rng(seed, stream::kBroadcast);
  BroadcastTree t{sample_tree(kind, k, tree_rng), kind, {}, {}, -1};
  run_broadcast(t, eta, spin_rng);
  return t;
}

std::vector<Spin> level_spins(const BroadcastTree& t, int k) {
  const NodeRange lv = t.shape.level(k);
  return {t.sigma.begin() + lv.begin, t.sigma.begin() + lv.end};
}

}  // namespace sbm
