#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sbmrecon/randgraph.hpp"

namespace sbm {

/// Two-way split of a vertex set, stored as one side (+1 / -1) per vertex so
/// W+ and W- are disjoint and cover the set by construction.
struct Partition {
  std::vector<Spin> side;

  std::size_t size() const { return side.size(); }
  std::vector<VertexId> wplus() const;
  std::vector<VertexId> wminus() const;
  void flip();
};

struct OverlapReport {
  double delta_frac = 0.0;  // min over relabellings of |W+ symmetric-difference V^i| / n
  int aligned_sign = 1;     // +1 if W+ matches V+, -1 if it matches V-
  double accuracy = 0.5;    // 1/2 + |fraction agreeing - 1/2|
};

/// Throws std::invalid_argument on a size mismatch.
OverlapReport overlap(const Partition& p, std::span<const Spin> truth);

/// Black-box partitioner interface. `original_ids[i]` is the id, in the full
/// graph, of vertex i of `g`.
class BlackBox {
 public:
  virtual ~BlackBox() = default;
  virtual Partition partition(const SparseGraph& g, std::span<const VertexId> original_ids,
                              std::uint64_t seed) const = 0;
  virtual std::string name() const = 0;
};

/// Sign split of the leading non-trivial eigenvector of the centered adjacency
/// A - (dbar/n) J, found by power iteration from a seeded random start with the
/// constant direction projected out each step. Ties go to +.
class SpectralPartitioner final : public BlackBox {
 public:
  struct Options {
    int max_iterations = 200;
    double tolerance = 1e-8;
  };
  SpectralPartitioner() = default;
  explicit SpectralPartitioner(Options opts) : opts_(opts) {}
  Partition partition(const SparseGraph& g, std::span<const VertexId> original_ids,
                      std::uint64_t seed) const override;
  std::string name() const override { return "spectral"; }

 private:
  Options opts_;
};

/// Test-harness black box: copies the true labels and flips each
/// independently with probability delta0. With scramble_orientation the whole
/// output is also relabelled by a fair coin, since a real partitioner cannot
/// know which class is "+".
class OracleNoisePartitioner final : public BlackBox {
 public:
  OracleNoisePartitioner(std::vector<Spin> truth, double delta0, bool scramble_orientation = true);
  Partition partition(const SparseGraph& g, std::span<const VertexId> original_ids,
                      std::uint64_t seed) const override;
  std::string name() const override { return "oracle-noise"; }

 private:
  std::vector<Spin> truth_;
  double delta0_;
  bool scramble_;
};

/// Runs a black box on a whole labelled graph (ids are the identity).
/// Throws std::invalid_argument on an empty graph.
Partition blackbox_partition(const SparseGraph& g, const BlackBox& impl, std::uint64_t seed);

/// One line per vertex: "v +1" or "v -1".
void write_partition(const Partition& p, std::ostream& out);

}  // namespace sbm
