#include <stdexcept>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "sbmrecon/partition.hpp"

using namespace sbm;

TEST_CASE("overlap is invariant under relabelling") {
  const std::vector<Spin> truth{1, 1, -1, -1};
  Partition p{{1, -1, -1, -1}};
  const OverlapReport r = overlap(p, truth);
  CHECK(r.accuracy == doctest::Approx(0.75));
  CHECK(r.delta_frac == doctest::Approx(0.25));
  CHECK(r.aligned_sign == 1);
  p.flip();
  const OverlapReport f = overlap(p, truth);
  CHECK(f.accuracy == doctest::Approx(0.75));
  CHECK(f.aligned_sign == -1);
  CHECK(p.wplus() == std::vector<VertexId>{1, 2, 3});
  CHECK(p.wminus() == std::vector<VertexId>{0});
  CHECK_THROWS_AS(overlap(Partition{{1}}, truth), std::invalid_argument);
}

TEST_CASE("oracle partitioner flips the requested fraction") {
  const LabelledGraph g = sample_sbm({20000, 3.0, 1.0}, PartitionMode::UniformRandom, 4);
  const OracleNoisePartitioner bb(g.labels, 0.25);
  const Partition p = blackbox_partition(g.graph, bb, 8);
  const double acc = overlap(p, g.labels).accuracy;
  CHECK(std::abs(acc - 0.75) <= 3.0 * std::sqrt(0.25 * 0.75 / 20000));
  CHECK(bb.name() == "oracle-noise");

  int flipped_orientation = 0;
  for (std::uint64_t s = 0; s < 200; ++s)
    flipped_orientation += overlap(blackbox_partition(g.graph, bb, s), g.labels).aligned_sign < 0;
  CHECK(flipped_orientation > 60);
  CHECK(flipped_orientation < 140);

  const OracleNoisePartitioner exact(g.labels, 0.0, false);
  const Partition q = blackbox_partition(g.graph, exact, 1);
  CHECK(q.side == g.labels);
}

TEST_CASE("oracle partitioner maps sub-graph vertices through their original ids") {
  const std::vector<Spin> truth{1, -1, 1, -1};
  const OracleNoisePartitioner bb(truth, 0.0, false);
  const SparseGraph sub(2, {{0, 1}});
  const VertexId ids[] = {1, 2};
  CHECK(bb.partition(sub, ids, 3).side == std::vector<Spin>{-1, 1});
  const VertexId short_ids[] = {1};
  CHECK_THROWS_AS(bb.partition(sub, short_ids, 3), std::invalid_argument);
}

TEST_CASE("spectral partitioner finds strong communities") {
  const LabelledGraph g = sample_sbm({4000, 20.0, 2.0}, PartitionMode::UniformRandom, 6);
  const SpectralPartitioner bb;
  const Partition p = blackbox_partition(g.graph, bb, 1);
  CHECK(overlap(p, g.labels).accuracy > 0.9);
  const Partition again = blackbox_partition(g.graph, bb, 1);
  CHECK(p.side == again.side);
  CHECK_THROWS_AS(blackbox_partition(SparseGraph(), bb, 1), std::invalid_argument);
}

TEST_CASE("partition file format") {
  std::ostringstream out;
  write_partition(Partition{{1, -1}}, out);
  CHECK(out.str() == "0 +1\n1 -1\n");
}
