#include "sbmrecon/partition.hpp"

#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "sbmrecon/rng.hpp"

namespace sbm {

std::vector<VertexId> Partition::wplus() const {
  std::vector<VertexId> out;
  for (std::size_t v = 0; v < side.size(); ++v)
    if (side[v] > 0) out.push_back(static_cast<VertexId>(v));
  return out;
}

std::vector<VertexId> Partition::wminus() const {
  std::vector<VertexId> out;
  for (std::size_t v = 0; v < side.size(); ++v)
    if (side[v] < 0) out.push_back(static_cast<VertexId>(v));
  return out;
}

void Partition::flip() {
  for (auto& s : side) s = static_cast<Spin>(-s);
}

OverlapReport overlap(const Partition& p, std::span<const Spin> truth) {
  if (p.size() != truth.size()) throw std::invalid_argument("partition and truth differ in size");
  OverlapReport r;
  if (truth.empty()) return r;
  std::size_t agree = 0;
  for (std::size_t v = 0; v < truth.size(); ++v) agree += p.side[v] == truth[v];
  const double n = static_cast<double>(truth.size());
  const double frac = static_cast<double>(agree) / n;
  r.aligned_sign = 2 * agree >= truth.size() ? 1 : -1;
  r.delta_frac = std::min(frac, 1.0 - frac);
  r.accuracy = 0.5 + std::abs(frac - 0.5);
  return r;
}

Partition SpectralPartitioner::partition(const SparseGraph& g, std::span<const VertexId>,
                                         std::uint64_t seed) const {
  const std::size_t n = g.num_vertices();
  if (n == 0) throw std::invalid_argument("cannot partition an empty graph");
  const double nd = static_cast<double>(n);
  const double mean_degree = 2.0 * static_cast<double>(g.num_edges()) / nd;

  Rng rng = make_rng(seed, stream::kBlackBox);
  std::vector<double> x(n);
  for (auto& xi : x) xi = uniform01(rng) - 0.5;

  auto project_normalize = [&](std::vector<double>& y) {
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / nd;
    double norm = 0.0;
    for (auto& yi : y) {
      yi -= mean;
      norm += yi * yi;
    }
    norm = std::sqrt(norm);
    if (norm > 0.0)
      for (auto& yi : y) yi /= norm;
    return norm;
  };
  project_normalize(x);

  std::vector<double> y(n);
  for (int it = 0; it < opts_.max_iterations; ++it) {
    // y = (A - (dbar/n) J) x
    const double total = std::accumulate(x.begin(), x.end(), 0.0);
    for (std::size_t v = 0; v < n; ++v) {
      double s = 0.0;
      for (VertexId w : g.neighbors(static_cast<VertexId>(v))) s += x[w];
      y[v] = s - mean_degree / nd * total;
    }
    if (project_normalize(y) == 0.0) break;
    // Converged up to sign (a negative leading eigenvalue alternates sign).
    double same = 0.0;
    double opposite = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
      same = std::max(same, std::abs(y[v] - x[v]));
      opposite = std::max(opposite, std::abs(y[v] + x[v]));
    }
    x.swap(y);
    if (std::min(same, opposite) < opts_.tolerance) break;
  }
  Partition p;
  p.side.resize(n);
  for (std::size_t v = 0; v < n; ++v) p.side[v] = x[v] >= 0.0 ? Spin{1} : Spin{-1};
  return p;
}

OracleNoisePartitioner::OracleNoisePartitioner(std::vector<Spin> truth, double delta0,
                                               bool scramble_orientation)
    : truth_(std::move(truth)), delta0_(delta0), scramble_(scramble_orientation) {
  if (!(delta0 >= 0.0 && delta0 <= 1.0)) throw std::invalid_argument("oracle noise outside [0, 1]");
}

Partition OracleNoisePartitioner::partition(const SparseGraph& g, std::span<const VertexId> original_ids,
                                            std::uint64_t seed) const {
  const std::size_t n = g.num_vertices();
  if (n == 0) throw std::invalid_argument("cannot partition an empty graph");
  if (original_ids.size() != n) throw std::invalid_argument("original id map has wrong length");
  Rng rng = make_rng(seed, stream::kBlackBox);
  const Spin orientation = scramble_ ? static_cast<Spin>(coin_sign(rng)) : Spin{1};
  Partition p;
  p.side.resize(n);
  for (std::size_t v = 0; v < n; ++v) {
    const Spin s = truth_.at(original_ids[v]);
    const Spin noisy = (delta0_ > 0.0 && bernoulli(rng, delta0_)) ? static_cast<Spin>(-s) : s;
    p.side[v] = static_cast<Spin>(orientation * noisy);
  }
  return p;
}

Partition blackbox_partition(const SparseGraph& g, const BlackBox& impl, std::uint64_t seed) {
  if (g.num_vertices() == 0) throw std::invalid_argument("cannot partition an empty graph");
  std::vector<VertexId> ids(g.num_vertices());
  std::iota(ids.begin(), ids.end(), VertexId{0});
  return impl.partition(g, ids, seed);
}

void write_partition(const Partition& p, std::ostream& out) { write_labels(p.side, out); }

}  // namespace sbm
