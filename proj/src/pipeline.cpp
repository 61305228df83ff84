#include "sbmrecon/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

#include "sbmrecon/estimators.hpp"
#include "sbmrecon/parallel.hpp"

namespace sbm {

ResolvedRadius resolve_radius(const AlgoConfig& cfg, const ModelParams& m) {
  const double n = static_cast<double>(m.n);
  switch (cfg.radius_mode) {
    case RadiusMode::Fixed:
      if (cfg.radius < 1) throw std::invalid_argument("radius must be at least 1");
      return {cfg.radius, false};
    case RadiusMode::LogFormula: {
      const int r = static_cast<int>(std::floor(std::log(n) / (20.0 * (m.a + m.b))));
      return r >= 1 ? ResolvedRadius{r, false} : ResolvedRadius{1, true};
    }
    case RadiusMode::Auto: {
      const double d = (m.a + m.b) / 2.0;
      const double cap = std::pow(n, 1.0 / 8.0);
      int r = 1;
      while (r < 6 && std::pow(d, r + 1) <= cap) ++r;
      return {r, false};
    }
  }
  throw std::logic_error("unknown radius mode");
}

AnchorChoice choose_anchor(const SparseGraph& g, std::span<const VertexId> holdout,
                           std::int64_t min_degree, Rng& rng) {
  if (holdout.empty()) throw std::invalid_argument("hold-out set is empty");
  std::vector<char> in_holdout(g.num_vertices(), 0);
  for (VertexId u : holdout) in_holdout[u] = 1;
  std::vector<VertexId> qualifying;
  VertexId best = holdout.front();
  std::int64_t best_degree = -1;
  for (VertexId u : holdout) {
    std::int64_t outside = 0;
    for (VertexId w : g.neighbors(u)) outside += !in_holdout[w];
    if (outside >= min_degree) qualifying.push_back(u);
    if (outside > best_degree || (outside == best_degree && u < best)) {
      best_degree = outside;
      best = u;
    }
  }
  if (qualifying.empty()) return {best, true};
  std::sort(qualifying.begin(), qualifying.end());
  return {qualifying[uniform_index(rng, qualifying.size())], false};
}

Alignment align_labelling(std::vector<Spin>& labelling, const SparseGraph& g, VertexId anchor,
                          double a, double b) {
  Alignment al;
  for (VertexId w : g.neighbors(anchor)) {
    if (labelling[w] > 0) ++al.plus_neighbors;
    if (labelling[w] < 0) ++al.minus_neighbors;
  }
  if (al.plus_neighbors == al.minus_neighbors) {
    al.tie = true;
    return al;
  }
  const bool plus_heavy = al.plus_neighbors > al.minus_neighbors;
  // a > b: the anchor's neighbors mostly share its class, call that class +.
  al.swapped = (a > b) ? !plus_heavy : plus_heavy;
  if (al.swapped)
    for (auto& s : labelling) s = static_cast<Spin>(-s);
  return al;
}

Partition align_partition(const Partition& p, const SparseGraph& g, VertexId anchor, double a,
                          double b) {
  if (p.size() != g.num_vertices()) throw std::invalid_argument("partition does not cover the graph");
  Partition out = p;
  align_labelling(out.side, g, anchor, a, b);
  return out;
}

VertexLabel label_vertex(const Neighborhood& nb, std::span<const Spin> labelling, int inner_depth,
                         const TreeParams& tree, const AlgoConfig& cfg, std::uint64_t seed) {
  const int radius = nb.radius;
  if (inner_depth < 0 || inner_depth > radius) throw std::invalid_argument("need 0 <= K <= R");
  Rng rng = make_rng(seed, stream::kCoin);
  VertexLabel out;
  out.non_tree = !nb.is_tree;

  const NodeRange sphere = nb.tree.level(radius);
  if (sphere.empty()) {
    out.empty_sphere = true;
    out.coin = true;
    out.sign = coin_sign(rng);
    return out;
  }
  std::vector<double> xi(static_cast<std::size_t>(sphere.size()));
  for (NodeId u = sphere.begin; u < sphere.end; ++u) {
    const Spin s = labelling[nb.tree_vertex[static_cast<std::size_t>(u)]];
    xi[static_cast<std::size_t>(u - sphere.begin)] = s;
    out.missing_boundary += s == 0;
  }

  const int top = radius - inner_depth;
  std::vector<double> values;
  if (inner_depth == 0) {
    values = std::move(xi);
  } else {
    const NodeRange mid = nb.tree.level(top);
    values.assign(static_cast<std::size_t>(mid.size()), 0.0);
    for (NodeId u = mid.begin; u < mid.end; ++u) {
      const NodeRange leaves = nb.tree.descendants(u, inner_depth);
      bool labelled = false;
      for (NodeId w = leaves.begin; w < leaves.end && !labelled; ++w)
        labelled = xi[static_cast<std::size_t>(w - sphere.begin)] != 0.0;
      if (!labelled) continue;
      std::span<const double> obs(xi.data() + (leaves.begin - sphere.begin),
                                  static_cast<std::size_t>(leaves.size()));
      values[static_cast<std::size_t>(u - mid.begin)] =
          weighted_majority_sign(nb.tree, obs, tree.theta, cfg.weight_delta, inner_depth, rng, u);
    }
  }
  out.magnetization = bp_upward(nb.tree, top, values, tree.theta, cfg.clamp_eps);
  if (out.magnetization > 0.0) {
    out.sign = 1;
  } else if (out.magnetization < 0.0) {
    out.sign = -1;
  } else {
    out.coin = true;
    out.sign = coin_sign(rng);
  }
  return out;
}

VertexLabel label_vertex(const SparseGraph& g, VertexId v, std::span<const Spin> labelling,
                         int radius, int inner_depth, const TreeParams& tree,
                         const AlgoConfig& cfg, std::uint64_t seed) {
  if (labelling.size() != g.num_vertices()) throw std::invalid_argument("labelling has wrong length");
  return label_vertex(extract_neighborhood(g, v, radius), labelling, inner_depth, tree, cfg, seed);
}

namespace {

/// Black-box run on g minus `victims`, lifted back to a labelling of all of g.
std::vector<Spin> run_blackbox(const LabelledGraph& g, std::span<const VertexId> victims,
                               const BlackBox& impl, std::uint64_t seed) {
  const InducedSubgraph sub = remove_set(g, victims);
  std::vector<Spin> labelling(g.size(), 0);
  if (sub.old_id.empty()) return labelling;
  const Partition p = impl.partition(sub.graph.graph, sub.old_id, seed);
  for (std::size_t i = 0; i < sub.old_id.size(); ++i) labelling[sub.old_id[i]] = p.side[i];
  return labelling;
}

bool anchor_touches_inner_ball(const SparseGraph& g, VertexId anchor, const Neighborhood& nb) {
  for (VertexId w : g.neighbors(anchor)) {
    if (std::binary_search(nb.ball.begin(), nb.ball.end(), w) &&
        !std::binary_search(nb.sphere.begin(), nb.sphere.end(), w))
      return true;
  }
  return false;
}

double labelled_accuracy(std::span<const Spin> labelling, std::span<const Spin> truth) {
  std::int64_t agree = 0;
  std::int64_t total = 0;
  for (std::size_t v = 0; v < labelling.size(); ++v) {
    if (labelling[v] == 0) continue;
    ++total;
    agree += labelling[v] == truth[v];
  }
  if (total == 0) return 0.5;
  const double frac = static_cast<double>(agree) / static_cast<double>(total);
  return 0.5 + std::abs(frac - 0.5);
}

}  // namespace

RecoveryResult recover(const LabelledGraph& g, const AlgoConfig& cfg, const ModelParams& m,
                       const BlackBox& impl, std::uint64_t seed) {
  m.validate();
  const std::size_t n = g.size();
  if (static_cast<std::int64_t>(n) != m.n) throw std::invalid_argument("graph size differs from n");
  if (g.labels.size() != n) throw std::invalid_argument("graph has no ground-truth labels");
  const TreeParams tree = derive_tree_params(m);
  const ResolvedRadius rr = resolve_radius(cfg, m);
  const int radius = rr.radius;
  const int inner = cfg.inner_depth;
  if (inner < 0 || inner > radius) throw std::invalid_argument("need 0 <= K <= R");
  if (cfg.batch < 0) throw std::invalid_argument("batch must be nonnegative");

  const double ln_n = std::log(static_cast<double>(n));
  const std::int64_t u_size =
      cfg.holdout_size >= 0 ? cfg.holdout_size : static_cast<std::int64_t>(std::floor(std::sqrt(static_cast<double>(n))));
  if (u_size < 1 || u_size >= static_cast<std::int64_t>(n))
    throw std::invalid_argument("hold-out size must be in [1, n)");
  const std::int64_t min_degree =
      cfg.anchor_min_degree >= 0 ? cfg.anchor_min_degree
                                 : static_cast<std::int64_t>(std::ceil(std::sqrt(std::max(ln_n, 0.0))));

  RecoveryResult result;
  RecoveryDiagnostics& diag = result.diagnostics;
  diag.radius = radius;
  diag.inner_depth = inner;
  diag.radius_floored = rr.floored;
  diag.holdout_size = u_size;

  // Hold-out set U: prefix of a seeded Fisher-Yates shuffle.
  Rng holdout_rng = make_rng(seed, stream::kHoldout, 0);
  std::vector<VertexId> order(n);
  for (std::size_t v = 0; v < n; ++v) order[v] = static_cast<VertexId>(v);
  for (std::int64_t i = 0; i < u_size; ++i) {
    const std::size_t j = static_cast<std::size_t>(i) +
                          uniform_index(holdout_rng, n - static_cast<std::size_t>(i));
    std::swap(order[static_cast<std::size_t>(i)], order[j]);
  }
  std::vector<VertexId> holdout(order.begin(), order.begin() + u_size);
  std::sort(holdout.begin(), holdout.end());
  std::vector<char> in_holdout(n, 0);
  for (VertexId u : holdout) in_holdout[u] = 1;
  std::vector<VertexId> targets;
  targets.reserve(n - holdout.size());
  for (std::size_t v = 0; v < n; ++v)
    if (!in_holdout[v]) targets.push_back(static_cast<VertexId>(v));

  Rng anchor_rng = make_rng(seed, stream::kHoldout, 1);
  const AnchorChoice anchor = choose_anchor(g.graph, holdout, min_degree, anchor_rng);
  diag.anchor = anchor.vertex;
  diag.anchor_fallback = anchor.fallback;

  result.partition.side.assign(n, 0);
  result.magnetization.assign(n, 0.0);
  std::vector<VertexLabel> labels(n);

  auto label_group = [&](std::span<const VertexId> group, const std::vector<Spin>& labelling,
                         const std::vector<Neighborhood>* cached) {
    std::vector<char> violation(group.size(), 0);
    parallel_for(group.size(), cfg.threads, [&](std::size_t i) {
      const VertexId v = group[i];
      Neighborhood local;
      const Neighborhood& nb = cached ? (*cached)[i] : (local = extract_neighborhood(g.graph, v, radius));
      violation[i] = anchor_touches_inner_ball(g.graph, anchor.vertex, nb);
      labels[v] = label_vertex(nb, labelling, inner, tree, cfg, derive_seed(seed, stream::kVertex, v));
    }, 64);
    for (char c : violation) diag.anchor_ball_violations += c;
  };

  const std::uint64_t bb_seed_base = derive_seed(seed, stream::kBlackBox);
  if (cfg.batch == 0) {
    std::vector<Spin> labelling = run_blackbox(g, holdout, impl, bb_seed_base);
    diag.blackbox_runs = 1;
    const Alignment al = align_labelling(labelling, g.graph, anchor.vertex, m.a, m.b);
    diag.alignment_ties += al.tie;
    diag.alignment_swaps += al.swapped;
    diag.initial_accuracy = labelled_accuracy(labelling, g.labels);
    label_group(targets, labelling, nullptr);
  } else {
    const auto batch = static_cast<std::size_t>(cfg.batch);
    for (std::size_t start = 0; start < targets.size(); start += batch) {
      const std::span<const VertexId> group(targets.data() + start,
                                            std::min(batch, targets.size() - start));
      std::vector<Neighborhood> balls(group.size());
      std::vector<VertexId> victims(holdout.begin(), holdout.end());
      for (std::size_t i = 0; i < group.size(); ++i) {
        balls[i] = extract_neighborhood(g.graph, group[i], radius);
        const NodeRange inner_ball{0, balls[i].tree.level(radius).begin};
        for (NodeId u = inner_ball.begin; u < inner_ball.end; ++u)
          victims.push_back(balls[i].tree_vertex[static_cast<std::size_t>(u)]);
      }
      std::sort(victims.begin(), victims.end());
      victims.erase(std::unique(victims.begin(), victims.end()), victims.end());
      std::vector<Spin> labelling =
          run_blackbox(g, victims, impl, derive_seed(bb_seed_base, diag.blackbox_runs));
      ++diag.blackbox_runs;
      const Alignment al = align_labelling(labelling, g.graph, anchor.vertex, m.a, m.b);
      diag.alignment_ties += al.tie;
      diag.alignment_swaps += al.swapped;
      if (start == 0) diag.initial_accuracy = labelled_accuracy(labelling, g.labels);
      label_group(group, labelling, &balls);
    }
  }

  for (VertexId v : targets) {
    const VertexLabel& l = labels[v];
    result.partition.side[v] = static_cast<Spin>(l.sign);
    result.magnetization[v] = l.magnetization;
    diag.non_tree_neighborhoods += l.non_tree;
    diag.empty_spheres += l.empty_sphere;
    diag.coin_flip_labels += l.coin;
    diag.missing_boundary_labels += l.missing_boundary;
  }
  Rng coin_rng = make_rng(seed, stream::kHoldout, 2);
  for (VertexId u : holdout) result.partition.side[u] = static_cast<Spin>(coin_sign(coin_rng));

  result.report = overlap(result.partition, g.labels);
  return result;
}

void write_vertex_csv(const RecoveryResult& r, std::ostream& out) {
  out << "v,assigned_sign,magnetization\n";
  out << std::setprecision(17);
  for (std::size_t v = 0; v < r.partition.size(); ++v)
    out << v << ',' << (r.partition.side[v] > 0 ? "+1" : "-1") << ',' << r.magnetization[v] << '\n';
}

}  // namespace sbm
