#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sbmrecon/broadcast.hpp"
#include "sbmrecon/rng.hpp"
#include "sbmrecon/tree_shape.hpp"

namespace sbm {

/// Closed-form conditional moments (given sigma_root = +) of the level sum
/// S = sum sigma_v and its noisy version over L_k of a d-ary tree.
struct MajorityMoments {
  double mean_s = 0.0;
  double var_s = 0.0;
  double mean_noisy = 0.0;
  double var_noisy = 0.0;
};

/// E+S = (theta d)^k, Var+S = 4 eta(1-eta) d^k ((theta^2 d)^k - 1)/(theta^2 d - 1)
/// (the ratio becomes k when theta^2 d = 1), E+S~ = (1-2delta) E+S and
/// Var+S~ = 4 d^k delta(1-delta) + (1-2delta)^2 Var+S. eta = (1 - theta)/2.
MajorityMoments majority_moments(int d, double theta, double delta, int k);

/// Sign of the level-k sum of sigma (or of tau when use_noisy); 0 on a tie or
/// an empty level.
int majority_estimate(const BroadcastTree& t, int k, bool use_noisy);

/// Level-k sums of a d-ary broadcast sampled without building the tree: the
/// counts of + and - nodes evolve as
///   N+' = Bin(d N+, 1-eta) + Bin(d N-, eta),  N-' = d(N+ + N-) - N+'
/// and the noisy sum draws Bin(N+, delta) and Bin(N-, delta) flips. Root is +.
struct LevelSums {
  double s = 0.0;
  double s_noisy = 0.0;
};
LevelSums sample_dary_level_sums(int d, double eta, double delta, int k, Rng& rng);

/// Resistor network on a tree truncated at relative depth k below `root`:
/// the edge to a child in relative generation j carries (1 - theta^2) theta^{-2j};
/// with delta every level-k node gets an extra terminal resistor
/// 4 delta(1-delta)(1-2delta)^{-2} theta^{-2k}.
struct ConductanceNetwork {
  double ceff = 0.0;  // between root and the terminals; +inf when k = 0 without noise
  double reff = 0.0;  // 1 / ceff (+inf for dead trees)
  double terminal_resistance = 0.0;  // 0 without noise
};

/// Throws std::invalid_argument unless 0 < |theta| < 1.
ConductanceNetwork effective_conductance(const TreeShape& tree, double theta,
                                         std::optional<double> delta, int k, NodeId root = 0);

struct CurrentWeights {
  /// One weight per node of the level k descendants of root, in arena order.
  std::vector<double> weight;
  double reff = 0.0;
};

/// w(v) = theta^{-k} i(v), where i is the unit current flow from root to the
/// terminals; it splits at every node proportionally to child branch
/// conductances. Then sum w(v) sigma_v has conditional mean sigma_root and
/// conditional variance reff. Throws std::domain_error("no estimator") if no
/// level-k descendant exists.
CurrentWeights current_weights(const TreeShape& tree, double theta, std::optional<double> delta,
                               int k, NodeId root = 0);

/// Sign of sum w(v) obs_v over the level-k descendants of root; an exact zero
/// (including a dead subtree) is replaced by a fair coin from rng.
int weighted_majority_sign(const TreeShape& tree, std::span<const double> observations,
                           double theta, std::optional<double> delta, int k, Rng& rng,
                           NodeId root = 0);

}  // namespace sbm
