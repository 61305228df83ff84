#include "sbmrecon/estimators.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace sbm {

MajorityMoments majority_moments(int d, double theta, double delta, int k) {
  if (d < 1) throw std::invalid_argument("d must be positive");
  if (k < 0) throw std::invalid_argument("negative depth");
  const double eta = (1.0 - theta) / 2.0;
  const double dk = std::pow(static_cast<double>(d), k);
  const double signal = theta * theta * d;
  // sum_{l=0}^{k-1} (theta^2 d)^l
  const double geometric = std::abs(signal - 1.0) < 1e-12
                               ? static_cast<double>(k)
                               : (std::pow(signal, k) - 1.0) / (signal - 1.0);
  MajorityMoments m;
  m.mean_s = std::pow(theta * d, k);
  m.var_s = 4.0 * eta * (1.0 - eta) * dk * geometric;
  m.mean_noisy = (1.0 - 2.0 * delta) * m.mean_s;
  m.var_noisy = 4.0 * dk * delta * (1.0 - delta) + (1.0 - 2.0 * delta) * (1.0 - 2.0 * delta) * m.var_s;
  return m;
}

int majority_estimate(const BroadcastTree& t, int k, bool use_noisy) {
  std::int64_t sum = 0;
  if (use_noisy) {
    if (t.tau_level != k) throw std::logic_error("no noisy observations on this level");
    for (Spin s : t.tau) sum += s;
  } else {
    const NodeRange lv = t.level(k);
    for (NodeId u = lv.begin; u < lv.end; ++u) sum += t.sigma[static_cast<std::size_t>(u)];
  }
  return (sum > 0) - (sum < 0);
}

LevelSums sample_dary_level_sums(int d, double eta, double delta, int k, Rng& rng) {
  if (d < 1) throw std::invalid_argument("d must be positive");
  std::int64_t plus = 1;
  std::int64_t minus = 0;
  for (int j = 0; j < k; ++j) {
    const std::int64_t from_plus = plus * d;
    const std::int64_t from_minus = minus * d;
    const std::int64_t stay = std::binomial_distribution<std::int64_t>(from_plus, 1.0 - eta)(rng);
    const std::int64_t cross = std::binomial_distribution<std::int64_t>(from_minus, eta)(rng);
    plus = stay + cross;
    minus = from_plus + from_minus - plus;
  }
  LevelSums out;
  out.s = static_cast<double>(plus - minus);
  std::int64_t flipped_plus = 0;
  std::int64_t flipped_minus = 0;
  if (delta > 0.0) {
    flipped_plus = std::binomial_distribution<std::int64_t>(plus, delta)(rng);
    flipped_minus = std::binomial_distribution<std::int64_t>(minus, delta)(rng);
  }
  out.s_noisy = static_cast<double>((plus - flipped_plus + flipped_minus) -
                                    (minus - flipped_minus + flipped_plus));
  return out;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct SubtreeNetwork {
  std::vector<NodeRange> ranges;             // relative level -> arena block
  std::vector<std::vector<double>> cond;     // conductance to terminals per node
  std::vector<double> edge_resistance;       // index j: edge into relative generation j
  double terminal = 0.0;
};

/// 1 / (r + 1/c) with 1/inf = 0.
inline double through_edge(double r, double c) {
  if (c == 0.0) return 0.0;
  if (std::isinf(c)) return 1.0 / r;
  return c / (r * c + 1.0);
}

SubtreeNetwork build_network(const TreeShape& tree, double theta, std::optional<double> delta,
                             int k, NodeId root) {
  if (!(theta != 0.0 && std::abs(theta) < 1.0))
    throw std::invalid_argument("conductance needs 0 < |theta| < 1");
  if (k < 0) throw std::invalid_argument("negative depth");
  if (delta && !(*delta >= 0.0 && *delta < 0.5)) throw std::invalid_argument("delta outside [0, 1/2)");
  SubtreeNetwork net;
  const double t2 = theta * theta;
  net.edge_resistance.resize(static_cast<std::size_t>(k) + 1, 0.0);
  for (int j = 1; j <= k; ++j)
    net.edge_resistance[static_cast<std::size_t>(j)] = (1.0 - t2) * std::pow(t2, -j);
  if (delta) {
    const double q = 1.0 - 2.0 * *delta;
    net.terminal = 4.0 * *delta * (1.0 - *delta) / (q * q) * std::pow(t2, -k);
  }
  net.ranges.resize(static_cast<std::size_t>(k) + 1);
  for (int j = 0; j <= k; ++j) net.ranges[static_cast<std::size_t>(j)] = tree.descendants(root, j);
  net.cond.resize(static_cast<std::size_t>(k) + 1);

  const NodeRange leaves = net.ranges[static_cast<std::size_t>(k)];
  const double leaf_c = (delta && net.terminal > 0.0) ? 1.0 / net.terminal : kInf;
  net.cond[static_cast<std::size_t>(k)].assign(static_cast<std::size_t>(leaves.size()), leaf_c);
  for (int j = k - 1; j >= 0; --j) {
    const NodeRange lv = net.ranges[static_cast<std::size_t>(j)];
    const NodeRange below = net.ranges[static_cast<std::size_t>(j + 1)];
    const auto& cond_below = net.cond[static_cast<std::size_t>(j + 1)];
    auto& cond_here = net.cond[static_cast<std::size_t>(j)];
    cond_here.assign(static_cast<std::size_t>(lv.size()), 0.0);
    const double r = net.edge_resistance[static_cast<std::size_t>(j + 1)];
    for (NodeId u = lv.begin; u < lv.end; ++u) {
      const NodeRange ch = tree.children(u);
      double c = 0.0;
      for (NodeId v = ch.begin; v < ch.end; ++v)
        c += through_edge(r, cond_below[static_cast<std::size_t>(v - below.begin)]);
      cond_here[static_cast<std::size_t>(u - lv.begin)] = c;
    }
  }
  return net;
}

}  // namespace

ConductanceNetwork effective_conductance(const TreeShape& tree, double theta,
                                         std::optional<double> delta, int k, NodeId root) {
  const SubtreeNetwork net = build_network(tree, theta, delta, k, root);
  ConductanceNetwork out;
  out.terminal_resistance = net.terminal;
  const auto& top = net.cond[0];
  out.ceff = top.empty() ? 0.0 : top[0];
  out.reff = out.ceff == 0.0 ? kInf : (std::isinf(out.ceff) ? 0.0 : 1.0 / out.ceff);
  return out;
}

CurrentWeights current_weights(const TreeShape& tree, double theta, std::optional<double> delta,
                               int k, NodeId root) {
  const SubtreeNetwork net = build_network(tree, theta, delta, k, root);
  const double ceff = net.cond[0].empty() ? 0.0 : net.cond[0][0];
  if (!(ceff > 0.0)) throw std::domain_error("no estimator");

  std::vector<double> current{1.0};
  for (int j = 0; j < k; ++j) {
    const NodeRange lv = net.ranges[static_cast<std::size_t>(j)];
    const NodeRange below = net.ranges[static_cast<std::size_t>(j + 1)];
    const auto& cond_here = net.cond[static_cast<std::size_t>(j)];
    const auto& cond_below = net.cond[static_cast<std::size_t>(j + 1)];
    const double r = net.edge_resistance[static_cast<std::size_t>(j + 1)];
    std::vector<double> next(static_cast<std::size_t>(below.size()), 0.0);
    for (NodeId u = lv.begin; u < lv.end; ++u) {
      const double iu = current[static_cast<std::size_t>(u - lv.begin)];
      const double cu = cond_here[static_cast<std::size_t>(u - lv.begin)];
      if (iu == 0.0 || cu == 0.0) continue;
      const NodeRange ch = tree.children(u);
      for (NodeId v = ch.begin; v < ch.end; ++v) {
        const auto idx = static_cast<std::size_t>(v - below.begin);
        next[idx] = iu * through_edge(r, cond_below[idx]) / cu;
      }
    }
    current = std::move(next);
  }

  CurrentWeights out;
  const double scale = std::pow(theta, -k);
  out.weight.resize(current.size());
  for (std::size_t i = 0; i < current.size(); ++i) out.weight[i] = current[i] * scale;
  out.reff = std::isinf(ceff) ? 0.0 : 1.0 / ceff;
  return out;
}

int weighted_majority_sign(const TreeShape& tree, std::span<const double> observations,
                           double theta, std::optional<double> delta, int k, Rng& rng,
                           NodeId root) {
  const NodeRange leaves = tree.descendants(root, k);
  if (static_cast<NodeId>(observations.size()) != leaves.size())
    throw std::invalid_argument("observation count does not match the subtree level");
  double sum = 0.0;
  if (!leaves.empty()) {
    const CurrentWeights w = current_weights(tree, theta, delta, k, root);
    for (std::size_t i = 0; i < observations.size(); ++i) sum += w.weight[i] * observations[i];
  }
  if (sum > 0.0) return 1;
  if (sum < 0.0) return -1;
  return coin_sign(rng);
}

}  // namespace sbm
