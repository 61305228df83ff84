#include "sbmrecon/randgraph.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "sbmrecon/rng.hpp"

namespace sbm {

SparseGraph::SparseGraph(std::size_t n, std::vector<std::pair<VertexId, VertexId>> edges) {
  offsets_.assign(n + 1, 0);
  for (const auto& [u, v] : edges) {
    if (u >= n || v >= n) throw std::out_of_range("edge endpoint out of range");
    if (u == v) continue;
    ++offsets_[u + 1];
    ++offsets_[v + 1];
  }
  std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
  neighbors_.resize(offsets_[n]);
  std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
  for (const auto& [u, v] : edges) {
    if (u == v) continue;
    neighbors_[fill[u]++] = v;
    neighbors_[fill[v]++] = u;
  }
  // Sort and deduplicate each list, then compact.
  std::vector<std::size_t> compact(n + 1, 0);
  std::size_t out = 0;
  for (std::size_t v = 0; v < n; ++v) {
    auto first = neighbors_.begin() + static_cast<std::ptrdiff_t>(offsets_[v]);
    auto last = neighbors_.begin() + static_cast<std::ptrdiff_t>(offsets_[v + 1]);
    std::sort(first, last);
    last = std::unique(first, last);
    compact[v] = out;
    for (auto it = first; it != last; ++it) neighbors_[out++] = *it;
  }
  compact[n] = out;
  neighbors_.resize(out);
  offsets_ = std::move(compact);
}

bool SparseGraph::has_edge(VertexId u, VertexId v) const {
  const auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

namespace {

/// Number of pairs to skip before the next success of a Bernoulli(p) stream.
inline double geometric_skip(Rng& rng, double p) {
  if (p >= 1.0) return 0.0;
  return std::floor(std::log1p(-uniform01(rng)) / std::log1p(-p));
}

void sample_within(std::span<const VertexId> ids, double p, Rng& rng,
                   std::vector<std::pair<VertexId, VertexId>>& edges) {
  if (p <= 0.0 || ids.size() < 2) return;
  const auto m = static_cast<std::int64_t>(ids.size());
  // Pairs (v, w) with w < v enumerated row by row.
  std::int64_t v = 1;
  std::int64_t w = -1;
  while (v < m) {
    const double skip = geometric_skip(rng, p);
    if (skip > static_cast<double>(m) * static_cast<double>(m)) break;
    w += 1 + static_cast<std::int64_t>(skip);
    while (w >= v && v < m) {
      w -= v;
      ++v;
    }
    if (v < m) edges.emplace_back(ids[static_cast<std::size_t>(w)], ids[static_cast<std::size_t>(v)]);
  }
}

void sample_between(std::span<const VertexId> left, std::span<const VertexId> right, double p,
                    Rng& rng, std::vector<std::pair<VertexId, VertexId>>& edges) {
  if (p <= 0.0 || left.empty() || right.empty()) return;
  const auto cols = static_cast<std::uint64_t>(right.size());
  const std::uint64_t total = static_cast<std::uint64_t>(left.size()) * cols;
  std::uint64_t idx = 0;
  bool first = true;
  for (;;) {
    const double skip = geometric_skip(rng, p);
    if (skip >= static_cast<double>(total)) break;
    idx += (first ? 0 : 1) + static_cast<std::uint64_t>(skip);
    first = false;
    if (idx >= total) break;
    edges.emplace_back(left[idx / cols], right[idx % cols]);
  }
}

}  // namespace

std::vector<Spin> balanced_labels(std::size_t n, std::uint64_t seed) {
  std::vector<Spin> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = (i % 2 == 0) ? Spin{1} : Spin{-1};
  Rng rng = make_rng(seed, stream::kGraph, 1);
  for (std::size_t i = n; i > 1; --i) std::swap(labels[i - 1], labels[uniform_index(rng, i)]);
  return labels;
}

LabelledGraph sample_sbm(const ModelParams& m, PartitionMode mode, std::uint64_t seed,
                         std::span<const Spin> fixed_labels) {
  m.validate();
  const auto n = static_cast<std::size_t>(m.n);
  LabelledGraph g;
  if (mode == PartitionMode::FixedSets) {
    if (fixed_labels.size() != n) throw std::invalid_argument("fixed label vector has wrong length");
    g.labels.assign(fixed_labels.begin(), fixed_labels.end());
    for (Spin s : g.labels)
      if (s != 1 && s != -1) throw std::invalid_argument("labels must be +1 or -1");
  } else {
    Rng label_rng = make_rng(seed, stream::kGraph, 0);
    g.labels.resize(n);
    for (auto& s : g.labels) s = static_cast<Spin>(coin_sign(label_rng));
  }
  std::vector<VertexId> plus;
  std::vector<VertexId> minus;
  for (std::size_t v = 0; v < n; ++v) (g.labels[v] > 0 ? plus : minus).push_back(static_cast<VertexId>(v));

  const double p_in = m.a / static_cast<double>(n);
  const double p_out = m.b / static_cast<double>(n);
  std::vector<std::pair<VertexId, VertexId>> edges;
  edges.reserve(static_cast<std::size_t>((m.a + m.b) / 2.0 * static_cast<double>(n) * 0.6) + 16);
  Rng edge_rng = make_rng(seed, stream::kGraph, 2);
  sample_within(plus, p_in, edge_rng, edges);
  sample_within(minus, p_in, edge_rng, edges);
  sample_between(plus, minus, p_out, edge_rng, edges);
  g.graph = SparseGraph(n, std::move(edges));
  return g;
}

namespace {

/// Reusable per-thread visit marks so ball extraction costs O(|ball| + edges
/// scanned) rather than O(n).
struct VisitMarks {
  std::vector<std::uint32_t> stamp;
  std::vector<std::int32_t> slot;  // index into the discovery arrays
  std::uint32_t epoch = 0;

  void reset(std::size_t n) {
    if (stamp.size() != n) {
      stamp.assign(n, 0);
      slot.assign(n, 0);
      epoch = 0;
    }
    if (++epoch == 0) {
      std::fill(stamp.begin(), stamp.end(), 0);
      epoch = 1;
    }
  }
  bool seen(VertexId v) const { return stamp[v] == epoch; }
  void mark(VertexId v, std::int32_t s) {
    stamp[v] = epoch;
    slot[v] = s;
  }
};

thread_local VisitMarks t_marks;

}  // namespace

Neighborhood extract_neighborhood(const SparseGraph& g, VertexId v, int radius) {
  if (v >= g.num_vertices()) throw std::out_of_range("center vertex out of range");
  if (radius < 0) throw std::invalid_argument("negative radius");
  VisitMarks& marks = t_marks;
  marks.reset(g.num_vertices());

  Neighborhood nb;
  nb.center = v;
  nb.radius = radius;
  nb.tree = TreeShape(radius);
  nb.tree_vertex = {v};
  marks.mark(v, 0);  // slot = arena position

  // Level j of the arena occupies [level_begin, level_end) of tree_vertex.
  std::vector<std::pair<VertexId, VertexId>> found;  // (arena pos of parent, vertex)
  std::vector<std::int32_t> counts;
  for (int j = 0; j < radius; ++j) {
    const NodeRange lv = nb.tree.level(j);
    // Scan the level in ascending id so the first discoverer is the
    // smallest-id parent.
    std::vector<NodeId> scan(static_cast<std::size_t>(lv.size()));
    std::iota(scan.begin(), scan.end(), lv.begin);
    std::sort(scan.begin(), scan.end(), [&](NodeId x, NodeId y) {
      return nb.tree_vertex[static_cast<std::size_t>(x)] < nb.tree_vertex[static_cast<std::size_t>(y)];
    });
    found.clear();
    for (NodeId pos : scan) {
      for (VertexId w : g.neighbors(nb.tree_vertex[static_cast<std::size_t>(pos)])) {
        if (marks.seen(w)) continue;
        marks.mark(w, -1);
        found.emplace_back(static_cast<VertexId>(pos), w);
      }
    }
    std::sort(found.begin(), found.end());
    counts.assign(static_cast<std::size_t>(lv.size()), 0);
    for (const auto& [pos, w] : found) ++counts[pos - static_cast<VertexId>(lv.begin)];
    nb.tree.add_level(counts);
    for (const auto& [pos, w] : found) {
      marks.slot[w] = static_cast<std::int32_t>(nb.tree_vertex.size());
      nb.tree_vertex.push_back(w);
    }
  }

  nb.ball = nb.tree_vertex;
  std::sort(nb.ball.begin(), nb.ball.end());
  const NodeRange outer = nb.tree.level(radius);
  nb.sphere.assign(nb.tree_vertex.begin() + outer.begin, nb.tree_vertex.begin() + outer.end);
  std::sort(nb.sphere.begin(), nb.sphere.end());

  std::size_t internal = 0;
  for (VertexId u : nb.tree_vertex)
    for (VertexId w : g.neighbors(u))
      if (marks.seen(w)) ++internal;
  nb.is_tree = internal / 2 + 1 == nb.ball.size();
  return nb;
}

Neighborhood extract_neighborhood(const LabelledGraph& g, VertexId v, int radius) {
  return extract_neighborhood(g.graph, v, radius);
}

InducedSubgraph remove_set(const LabelledGraph& g, std::span<const VertexId> victims) {
  const std::size_t n = g.size();
  InducedSubgraph out;
  out.new_id.assign(n, 0);
  for (VertexId v : victims) {
    if (v >= n) throw std::out_of_range("victim vertex out of range");
    out.new_id[v] = -1;
  }
  for (std::size_t v = 0; v < n; ++v) {
    if (out.new_id[v] < 0) continue;
    out.new_id[v] = static_cast<std::int64_t>(out.old_id.size());
    out.old_id.push_back(static_cast<VertexId>(v));
  }
  std::vector<std::pair<VertexId, VertexId>> edges;
  for (VertexId u : out.old_id)
    for (VertexId w : g.graph.neighbors(u))
      if (u < w && out.new_id[w] >= 0)
        edges.emplace_back(static_cast<VertexId>(out.new_id[u]), static_cast<VertexId>(out.new_id[w]));
  out.graph.graph = SparseGraph(out.old_id.size(), std::move(edges));
  out.graph.labels.reserve(out.old_id.size());
  if (!g.labels.empty())
    for (VertexId u : out.old_id) out.graph.labels.push_back(g.labels[u]);
  return out;
}

void write_edge_list(const SparseGraph& g, std::ostream& out) {
  out << g.num_vertices() << ' ' << g.num_edges() << '\n';
  for (VertexId u = 0; u < g.num_vertices(); ++u)
    for (VertexId w : g.neighbors(u))
      if (u < w) out << u << ' ' << w << '\n';
}

void write_labels(std::span<const Spin> labels, std::ostream& out) {
  for (std::size_t v = 0; v < labels.size(); ++v)
    out << v << ' ' << (labels[v] > 0 ? "+1" : "-1") << '\n';
}

SparseGraph read_edge_list(std::istream& in) {
  std::size_t n = 0;
  std::size_t m = 0;
  if (!(in >> n >> m)) throw std::runtime_error("edge list: missing 'n m' header");
  std::vector<std::pair<VertexId, VertexId>> edges;
  edges.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    VertexId u = 0;
    VertexId v = 0;
    if (!(in >> u >> v)) throw std::runtime_error("edge list: truncated at edge " + std::to_string(i));
    edges.emplace_back(u, v);
  }
  return SparseGraph(n, std::move(edges));
}

}  // namespace sbm
