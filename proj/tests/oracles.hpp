#pragma once
// Reference implementations used only by the tests. Each one is deliberately
// naive and shares no code with the library beyond TreeShape accessors.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "sbmrecon/tree_shape.hpp"

namespace oracle {

using sbm::NodeId;
using sbm::TreeShape;

/// Random tree with at most max_nodes nodes and depth limit k, grown level by
/// level with child counts in [0, max_children].
inline TreeShape random_tree(std::mt19937_64& rng, int k, int max_nodes, int max_children = 3) {
  TreeShape t(k);
  for (int j = 0; j <= k; ++j) {
    const auto lv = t.level(j);
    std::vector<std::int32_t> counts(static_cast<std::size_t>(lv.size()), 0);
    if (j < k) {
      int budget = max_nodes - static_cast<int>(t.size());
      for (auto& c : counts) {
        const int want = std::uniform_int_distribution<int>(0, max_children)(rng);
        c = std::min(want, std::max(budget, 0));
        budget -= c;
      }
    }
    t.add_level(counts);
  }
  return t;
}

/// Root posterior bias by summing the joint law over every spin configuration
/// of every node. Without delta, level-k spins must equal `observed`; with
/// delta, observed values are noisy copies of the level-k spins.
inline double brute_posterior(const TreeShape& t, double theta, const std::vector<int>& observed,
                              std::optional<double> delta) {
  const int n = static_cast<int>(t.size());
  if (n > 24) throw std::length_error("oracle limited to 24 nodes");
  const double eta = (1.0 - theta) / 2.0;
  const auto leaves = t.level(t.depth_limit());
  double plus = 0.0;
  double minus = 0.0;
  for (std::uint32_t mask = 0; mask < (1U << n); ++mask) {
    auto spin = [&](NodeId u) { return (mask >> u) & 1U ? 1 : -1; };
    double w = 0.5;
    for (NodeId u = 1; u < n; ++u) w *= spin(u) == spin(t.parent(u)) ? 1.0 - eta : eta;
    for (NodeId u = leaves.begin; u < leaves.end; ++u) {
      const int obs = observed[static_cast<std::size_t>(u - leaves.begin)];
      if (delta) {
        w *= obs == spin(u) ? 1.0 - *delta : *delta;
      } else if (obs != spin(u)) {
        w = 0.0;
      }
    }
    (spin(0) > 0 ? plus : minus) += w;
  }
  return (plus - minus) / (plus + minus);
}

/// Effective resistance between the root and the grounded terminals, and the
/// unit-flow current entering each level-k node, from a dense Laplacian solve.
struct FlowSolution {
  double reff = 0.0;
  std::vector<double> leaf_current;
};

inline FlowSolution laplacian_flow(const TreeShape& t, double theta, std::optional<double> delta, int k) {
  const double t2 = theta * theta;
  const auto leaves = t.level(k);
  auto edge_c = [&](NodeId u) { return 1.0 / ((1.0 - t2) * std::pow(t2, -t.depth(u))); };
  FlowSolution out;
  if (k == 0 && !delta) {
    out.leaf_current = {1.0};
    return out;
  }
  // Unknown potentials: every node up to level k, except that noiseless
  // terminals are the ground itself.
  const int dim = delta ? leaves.end : leaves.begin;
  auto is_ground = [&](NodeId u) { return u >= dim; };
  std::vector<std::vector<double>> a(dim, std::vector<double>(dim + 1, 0.0));
  auto connect = [&](NodeId x, NodeId y, double c) {
    if (!is_ground(x)) a[x][x] += c;
    if (!is_ground(y)) a[y][y] += c;
    if (!is_ground(x) && !is_ground(y)) {
      a[x][y] -= c;
      a[y][x] -= c;
    }
  };
  for (NodeId u = 1; u < leaves.end; ++u) connect(u, t.parent(u), edge_c(u));
  const double term = delta ? 4.0 * *delta * (1.0 - *delta) / std::pow(1.0 - 2.0 * *delta, 2) * std::pow(t2, -k)
                            : 0.0;
  if (delta)
    for (NodeId u = leaves.begin; u < leaves.end; ++u) a[u][u] += 1.0 / term;
  a[0][dim] = 1.0;  // unit current injected at the root

  for (int col = 0; col < dim; ++col) {
    int piv = col;
    for (int r = col + 1; r < dim; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    std::swap(a[col], a[piv]);
    for (int r = 0; r < dim; ++r) {
      if (r == col || a[r][col] == 0.0) continue;
      const double f = a[r][col] / a[col][col];
      for (int c = col; c <= dim; ++c) a[r][c] -= f * a[col][c];
    }
  }
  std::vector<double> v(static_cast<std::size_t>(leaves.end), 0.0);
  for (int i = 0; i < dim; ++i) v[i] = a[i][dim] / a[i][i];
  out.reff = v[0];
  for (NodeId u = leaves.begin; u < leaves.end; ++u) {
    if (delta) {
      out.leaf_current.push_back(v[u] / term);
    } else {
      out.leaf_current.push_back(v[t.parent(u)] * edge_c(u));
    }
  }
  return out;
}

/// Exact mean and variance of the level-k spin sum of a d-ary broadcast tree
/// (root = +), with and without independent leaf flips, by propagating the
/// full distribution of the number of + spins.
struct SumMoments {
  double mean_s = 0.0;
  double var_s = 0.0;
  double mean_noisy = 0.0;
  double var_noisy = 0.0;
};

inline std::vector<double> binomial_pmf(int n, double p) {
  std::vector<double> pmf(static_cast<std::size_t>(n) + 1, 0.0);
  pmf[0] = 1.0;
  for (int trial = 0; trial < n; ++trial)
    for (int j = trial + 1; j >= 0; --j)
      pmf[j] = (j > 0 ? pmf[j - 1] * p : 0.0) + pmf[j] * (1.0 - p);
  return pmf;
}

inline SumMoments level_sum_moments(int d, double eta, double delta, int k) {
  std::vector<double> dist{0.0, 1.0};  // P(#plus = i) on a level of size 1
  int size = 1;
  for (int j = 0; j < k; ++j) {
    const int next_size = size * d;
    std::vector<double> next(static_cast<std::size_t>(next_size) + 1, 0.0);
    for (int p = 0; p <= size; ++p) {
      if (dist[p] == 0.0) continue;
      const auto stay = binomial_pmf(p * d, 1.0 - eta);
      const auto cross = binomial_pmf((size - p) * d, eta);
      for (std::size_t x = 0; x < stay.size(); ++x)
        for (std::size_t y = 0; y < cross.size(); ++y) next[x + y] += dist[p] * stay[x] * cross[y];
    }
    dist = std::move(next);
    size = next_size;
  }
  SumMoments m;
  double e2 = 0.0;
  double e2_noisy = 0.0;
  const double q = 1.0 - 2.0 * delta;
  for (int p = 0; p <= size; ++p) {
    const double s = 2.0 * p - size;
    m.mean_s += dist[p] * s;
    e2 += dist[p] * s * s;
    // Given s, the noisy sum has mean q s and variance 4 delta (1 - delta) size.
    m.mean_noisy += dist[p] * q * s;
    e2_noisy += dist[p] * (q * q * s * s + 4.0 * delta * (1.0 - delta) * size);
  }
  m.var_s = e2 - m.mean_s * m.mean_s;
  m.var_noisy = e2_noisy - m.mean_noisy * m.mean_noisy;
  return m;
}

}  // namespace oracle
