#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "sbmrecon/bpcore.hpp"
#include "sbmrecon/params.hpp"
#include "sbmrecon/partition.hpp"
#include "sbmrecon/randgraph.hpp"
#include "sbmrecon/rng.hpp"

namespace sbm {

/// How the neighbourhood radius R is chosen.
///   LogFormula: floor(ln n / (20 (a+b))), floored at 1 (config name "paper-formula").
///   Auto: largest R with d^R <= n^{1/8}, at least 1 and at most 6.
///   Fixed: AlgoConfig::radius.
enum class RadiusMode { LogFormula, Auto, Fixed };

struct AlgoConfig {
  RadiusMode radius_mode = RadiusMode::Auto;
  int radius = 1;
  int inner_depth = 1;                 // K, 0 <= K <= R
  std::int64_t holdout_size = -1;      // |U|; -1 means floor(sqrt n)
  std::int64_t anchor_min_degree = -1; // -1 means ceil(sqrt(ln n))
  /// Vertices sharing one black-box run. 0: a single run on G \ U shared by
  /// every vertex. b >= 1: each group of b vertices gets its own run on
  /// G \ U \ (union of their B(v, R-1)); b = 1 is the literal per-vertex loop.
  std::int64_t batch = 0;
  /// Leaf noise assumed by the conductance weights of the inner stage;
  /// nullopt puts no terminal resistors on the leaves.
  std::optional<double> weight_delta;
  double clamp_eps = kDefaultClamp;
  unsigned threads = 1;
};

struct ResolvedRadius {
  int radius = 1;
  bool floored = false;  // the log formula gave 0
};
ResolvedRadius resolve_radius(const AlgoConfig& cfg, const ModelParams& m);

struct AnchorChoice {
  VertexId vertex = 0;
  bool fallback = false;  // no vertex met the degree threshold
};

/// Uniformly random vertex of U with at least min_degree neighbors outside U;
/// otherwise the vertex of U with the most such neighbors (smallest id on
/// ties). Throws std::invalid_argument if U is empty.
AnchorChoice choose_anchor(const SparseGraph& g, std::span<const VertexId> holdout,
                           std::int64_t min_degree, Rng& rng);

struct Alignment {
  bool swapped = false;
  bool tie = false;
  std::int64_t plus_neighbors = 0;
  std::int64_t minus_neighbors = 0;
};

/// Relabels in place so the anchor has more neighbors in W+ (a > b) or more in
/// W- (a < b). labelling is indexed by graph vertex; 0 marks vertices outside
/// the partitioned set. A tie leaves the labelling unchanged.
Alignment align_labelling(std::vector<Spin>& labelling, const SparseGraph& g, VertexId anchor,
                          double a, double b);

/// Same rule for a partition of all of g's vertices.
Partition align_partition(const Partition& p, const SparseGraph& g, VertexId anchor, double a,
                          double b);

struct VertexLabel {
  int sign = 0;
  double magnetization = 0.0;
  bool coin = false;          // sign decided by a fair coin
  bool empty_sphere = false;
  bool non_tree = false;
  std::int64_t missing_boundary = 0;  // sphere vertices without a label
};

/// Reads xi on S(v, R) from `labelling` (0 = unlabelled), replaces every
/// u in S(v, R-K) by the conductance-weighted sign of xi over its depth-K
/// subtree, runs the magnetization recursion from level R-K to v on the BFS
/// tree, and returns the sign (coin on 0). Subtrees with no labelled leaf
/// contribute 0.
VertexLabel label_vertex(const SparseGraph& g, VertexId v, std::span<const Spin> labelling,
                         int radius, int inner_depth, const TreeParams& tree,
                         const AlgoConfig& cfg, std::uint64_t seed);
VertexLabel label_vertex(const Neighborhood& nb, std::span<const Spin> labelling, int inner_depth,
                         const TreeParams& tree, const AlgoConfig& cfg, std::uint64_t seed);

struct RecoveryDiagnostics {
  int radius = 0;
  int inner_depth = 0;
  bool radius_floored = false;
  VertexId anchor = 0;
  bool anchor_fallback = false;
  std::int64_t holdout_size = 0;
  std::int64_t blackbox_runs = 0;
  std::int64_t alignment_ties = 0;
  std::int64_t alignment_swaps = 0;
  std::int64_t anchor_ball_violations = 0;  // anchor adjacent to B(v, R-1)
  std::int64_t non_tree_neighborhoods = 0;
  std::int64_t empty_spheres = 0;
  std::int64_t coin_flip_labels = 0;        // among V \ U
  std::int64_t missing_boundary_labels = 0;
  double initial_accuracy = 0.0;            // aligned black box on V \ U (first run)
};

struct RecoveryResult {
  Partition partition;
  std::vector<double> magnetization;  // 0 for held-out vertices
  OverlapReport report;
  RecoveryDiagnostics diagnostics;
};

/// Full recovery: hold-out U, anchor, black-box runs, alignment, per-vertex
/// labelling, coin flips on U. g.labels are read only to score the result.
RecoveryResult recover(const LabelledGraph& g, const AlgoConfig& cfg, const ModelParams& m,
                       const BlackBox& impl, std::uint64_t seed);

/// Per-vertex CSV: header "v,assigned_sign,magnetization".
void write_vertex_csv(const RecoveryResult& r, std::ostream& out);

}  // namespace sbm
