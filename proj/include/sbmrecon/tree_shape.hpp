#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace sbm {

using NodeId = std::int32_t;

/// Half-open range of arena positions.
struct NodeRange {
  NodeId begin = 0;
  NodeId end = 0;
  NodeId size() const { return end - begin; }
  bool empty() const { return begin >= end; }
};

/// Rooted tree stored as a breadth-first arena: node 0 is the root, every
/// level occupies a contiguous block, and the children of each node are
/// contiguous. Consequently the descendants of any node at a fixed relative
/// depth also form a contiguous block.
///
/// depth_limit is the truncation depth k; levels() always has k + 1 entries,
/// trailing ones empty when the tree died out early.
class TreeShape {
 public:
  TreeShape() = default;

  /// Builds from child counts listed in breadth-first order. Nodes at
  /// depth_limit must have zero children; throws std::invalid_argument on a
  /// malformed list.
  static TreeShape from_child_counts(std::span<const std::int32_t> counts, int depth_limit);

  /// Incremental construction: call add_level with the child counts of every
  /// node on the current deepest level, in arena order.
  explicit TreeShape(int depth_limit);
  void add_level(std::span<const std::int32_t> counts_for_deepest_level);

  std::size_t size() const { return parent_.size(); }
  int depth_limit() const { return depth_limit_; }

  NodeId parent(NodeId u) const { return parent_[u]; }
  int depth(NodeId u) const { return depth_[u]; }
  NodeRange children(NodeId u) const {
    return {first_child_[u], first_child_[u] + child_count_[u]};
  }
  std::int32_t child_count(NodeId u) const { return child_count_[u]; }

  /// Nodes at absolute depth j (empty when j > depth of the deepest node).
  NodeRange level(int j) const;

  /// Descendants of u exactly `rel` levels below u.
  NodeRange descendants(NodeId u, int rel) const;

 private:
  void finalize_levels();

  int depth_limit_ = 0;
  std::vector<NodeId> parent_;
  std::vector<NodeId> first_child_;
  std::vector<std::int32_t> child_count_;
  std::vector<std::int32_t> depth_;
  std::vector<NodeId> level_start_;  // size depth_limit + 2
  int built_levels_ = 0;             // levels whose child counts are known
};

}  // namespace sbm
