#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sbmrecon/broadcast.hpp"
#include "sbmrecon/params.hpp"
#include "sbmrecon/tree_shape.hpp"

namespace sbm {

using VertexId = std::uint32_t;

/// Undirected simple graph in compressed adjacency form. Neighbor lists are
/// sorted and symmetric.
class SparseGraph {
 public:
  SparseGraph() = default;
  /// Builds from an edge list; self-loops are dropped and duplicates merged.
  SparseGraph(std::size_t n, std::vector<std::pair<VertexId, VertexId>> edges);

  std::size_t num_vertices() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t num_edges() const { return neighbors_.size() / 2; }
  std::span<const VertexId> neighbors(VertexId v) const {
    return {neighbors_.data() + offsets_[v], neighbors_.data() + offsets_[v + 1]};
  }
  std::size_t degree(VertexId v) const { return offsets_[v + 1] - offsets_[v]; }
  bool has_edge(VertexId u, VertexId v) const;

 private:
  std::vector<std::size_t> offsets_;
  std::vector<VertexId> neighbors_;
};

struct LabelledGraph {
  SparseGraph graph;
  std::vector<Spin> labels;  // +1 / -1 per vertex

  std::size_t size() const { return graph.num_vertices(); }
};

enum class PartitionMode { UniformRandom, FixedSets };

/// Block-model sample. UniformRandom draws i.i.d. fair labels; FixedSets uses
/// `fixed_labels`. Edges are sampled by geometric skipping over the stream of
/// within-class and between-class vertex pairs, so the cost is proportional to
/// the number of edges. Throws std::invalid_argument if a/n or b/n exceeds 1.
LabelledGraph sample_sbm(const ModelParams& m, PartitionMode mode, std::uint64_t seed,
                         std::span<const Spin> fixed_labels = {});

/// Labels with |V+| - |V-| in {0, 1}, in random positions.
std::vector<Spin> balanced_labels(std::size_t n, std::uint64_t seed);

struct Neighborhood {
  VertexId center = 0;
  int radius = 0;
  std::vector<VertexId> ball;    // B(v, R), sorted
  std::vector<VertexId> sphere;  // S(v, R), sorted
  /// BFS tree of the ball as an arena; tree_vertex[node] is the graph vertex.
  TreeShape tree;
  std::vector<VertexId> tree_vertex;
  bool is_tree = true;  // induced subgraph on the ball has |ball| - 1 edges
};

/// Breadth-first ball. Levels are scanned in ascending vertex id, so each
/// vertex's BFS parent is its smallest-id neighbor one level up.
Neighborhood extract_neighborhood(const LabelledGraph& g, VertexId v, int radius);
Neighborhood extract_neighborhood(const SparseGraph& g, VertexId v, int radius);

struct InducedSubgraph {
  LabelledGraph graph;
  std::vector<VertexId> old_id;  // new -> old
  std::vector<std::int64_t> new_id;  // old -> new, -1 for removed vertices
};

/// Induced subgraph on V minus victims, keeping the relative vertex order.
InducedSubgraph remove_set(const LabelledGraph& g, std::span<const VertexId> victims);

/// Text dumps: header "n m" then one "u v" per edge (u < v); labels "v +1".
void write_edge_list(const SparseGraph& g, std::ostream& out);
void write_labels(std::span<const Spin> labels, std::ostream& out);
SparseGraph read_edge_list(std::istream& in);

}  // namespace sbm
