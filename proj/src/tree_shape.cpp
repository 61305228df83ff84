#include "sbmrecon/tree_shape.hpp"

#include <stdexcept>

namespace sbm {

TreeShape::TreeShape(int depth_limit) : depth_limit_(depth_limit) {
  if (depth_limit < 0) throw std::invalid_argument("negative depth limit");
  parent_.push_back(-1);
  first_child_.push_back(1);
  child_count_.push_back(0);
  depth_.push_back(0);
  level_start_ = {0, 1};
}

void TreeShape::add_level(std::span<const std::int32_t> counts) {
  const NodeRange cur = level(built_levels_);
  if (static_cast<NodeId>(counts.size()) != cur.size())
    throw std::invalid_argument("child count list does not match level size");
  if (built_levels_ >= depth_limit_) {
    for (auto c : counts)
      if (c != 0) throw std::invalid_argument("node at the depth limit has children");
    return;
  }
  NodeId next = static_cast<NodeId>(parent_.size());
  for (NodeId i = 0; i < cur.size(); ++i) {
    const NodeId u = cur.begin + i;
    const std::int32_t c = counts[i];
    if (c < 0) throw std::invalid_argument("negative child count");
    first_child_[u] = next;
    child_count_[u] = c;
    for (std::int32_t j = 0; j < c; ++j) {
      parent_.push_back(u);
      first_child_.push_back(0);
      child_count_.push_back(0);
      depth_.push_back(built_levels_ + 1);
    }
    next += c;
  }
  ++built_levels_;
  level_start_.push_back(static_cast<NodeId>(parent_.size()));
  // Placeholder for the new deepest level: its children start at the end.
  const NodeRange fresh = level(built_levels_);
  for (NodeId u = fresh.begin; u < fresh.end; ++u) first_child_[u] = fresh.end;
}

TreeShape TreeShape::from_child_counts(std::span<const std::int32_t> counts, int depth_limit) {
  TreeShape t(depth_limit);
  std::size_t pos = 0;
  for (int j = 0; j <= depth_limit; ++j) {
    const NodeRange lv = t.level(j);
    if (pos + static_cast<std::size_t>(lv.size()) > counts.size())
      throw std::invalid_argument("child count list too short");
    t.add_level(counts.subspan(pos, static_cast<std::size_t>(lv.size())));
    pos += static_cast<std::size_t>(lv.size());
  }
  if (pos != counts.size()) throw std::invalid_argument("child count list too long");
  return t;
}

NodeRange TreeShape::level(int j) const {
  const auto n = static_cast<NodeId>(parent_.size());
  if (j < 0 || j + 1 >= static_cast<int>(level_start_.size())) return {n, n};
  return {level_start_[j], level_start_[j + 1]};
}

NodeRange TreeShape::descendants(NodeId u, int rel) const {
  const auto n = static_cast<NodeId>(parent_.size());
  if (rel == 0) return {u, u + 1};
  if (rel < 0 || depth_[u] + rel > built_levels_) return {n, n};
  NodeRange r{u, u + 1};
  for (int step = 0; step < rel; ++step) {
    if (r.empty()) return {n, n};
    r = {first_child_[r.begin], first_child_[r.end - 1] + child_count_[r.end - 1]};
  }
  return r;
}

}  // namespace sbm
