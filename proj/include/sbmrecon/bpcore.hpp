#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sbmrecon/broadcast.hpp"
#include "sbmrecon/stats.hpp"
#include "sbmrecon/tree_shape.hpp"

namespace sbm {

inline constexpr double kDefaultClamp = 1e-12;

/// How observed level-k values enter the recursion.
///   Exact: sigma on the level, leaves are +-1.
///   Noisy: tau on the level, leaves are +-(1 - 2 delta).
///   Signs: +-1 (or 0 for "no information") produced by an external estimator.
enum class LeafMode { Exact, Noisy, Signs };

struct BpConfig {
  double theta = 0.0;
  double clamp_eps = kDefaultClamp;  // |magnetization| <= 1 - clamp_eps; 0 disables
  LeafMode mode = LeafMode::Exact;
  double delta = 0.0;  // used by LeafMode::Noisy
};

/// (prod(1 + theta x_i) - prod(1 - theta x_i)) / (prod(1 + theta x_i) + prod(1 - theta x_i)),
/// evaluated as tanh(sum atanh(theta x_i)) with every x_i and the result
/// clamped to [-(1 - eps), 1 - eps]. An empty list gives 0.
double bp_combine(std::span<const double> children, double theta, double clamp_eps = kDefaultClamp);

/// Per-child message atanh(theta * x) in log-ratio units, x clamped.
double bp_message(double x, double theta, double clamp_eps = kDefaultClamp);

/// Runs the recursion from `level` up to the root. leaf_values holds one
/// magnetization per node of that level in arena order; childless nodes above
/// it contribute 0. Returns the root magnetization.
double bp_upward(const TreeShape& tree, int level, std::span<const double> leaf_values,
                 double theta, double clamp_eps = kDefaultClamp);

/// Root magnetization given observations on L_k(root), k = depth_limit.
/// Throws std::invalid_argument if observed.size() != |L_k|.
double bp_root(const TreeShape& tree, const BpConfig& cfg, std::span<const Spin> observed);

/// Largest number of free spins exact_posterior will enumerate.
inline constexpr int kMaxEnumeratedSpins = 22;

/// 2 P(sigma_root = + | observations) - 1 by summing over every spin
/// assignment. Without delta the level-k spins are pinned to the
/// observations; with delta they are free and weighted by the leaf channel.
double exact_posterior(const TreeShape& tree, double theta, std::span<const Spin> observed,
                       std::optional<double> delta = std::nullopt);

// ---------------------------------------------------------------------------
// Monte Carlo summaries

enum class SamplingMethod { Auto, Explicit, Population };

/// Expected node count above which Auto switches to population sampling.
inline constexpr double kExplicitNodeBudget = 20000.0;

struct MagnetizationQuery {
  TreeKind kind;
  double theta = 0.0;
  double delta = 0.0;  // > 0 selects the noisy (Y) recursion
  int k = 0;
  std::int64_t trials = 1;
  std::uint64_t seed = 0;
  double clamp_eps = kDefaultClamp;
  SamplingMethod method = SamplingMethod::Auto;
  unsigned threads = 1;
};

struct MagnetizationEstimate {
  Estimate signed_mean;  // E(X | sigma_root = +)
  Estimate abs_mean;     // E|X|
  Estimate p_hat;        // (1 + E|X|) / 2
  SamplingMethod method = SamplingMethod::Explicit;
};

/// Resolves Auto for a query.
SamplingMethod resolve_method(const TreeKind& kind, int k, SamplingMethod requested);

/// One explicit trial: X (leaves exact) and Y (leaves noisy, equal to X when
/// delta == 0) on the same tree and spins, both relative to sigma_root = +.
struct CoupledTrial {
  double x = 0.0;
  double y = 0.0;
  bool survived = false;  // level k nonempty
};
CoupledTrial coupled_trial(const TreeKind& kind, double theta, double delta, int k,
                           std::uint64_t trial_seed, double clamp_eps);

/// Population-dynamics sampler. Entry i of level j is a sample of the pair
/// of log-likelihood ratios (atanh X_{u,j}, atanh Y_{u,j}) for a node u with
/// sigma_u = +, built by drawing its offspring count and, for each child, a
/// random entry of level j-1 negated when the edge flips. Level 0 holds the
/// leaf initialisation (X = 1, Y = (1 - 2 delta) tau).
///
/// With track_gap, log|hx - hy| and its sign are carried alongside, so gaps
/// far below the resolution of hx itself (saturated messages) stay exact.
struct PopulationLevels {
  std::vector<std::vector<double>> hx;
  std::vector<std::vector<double>> hy;
  std::vector<std::vector<double>> log_gap;         // -inf when hx == hy
  std::vector<std::vector<std::int8_t>> gap_sign;  // sign of hx - hy
};
PopulationLevels population_levels(const TreeKind& kind, double theta, double delta, int k_max,
                                   std::int64_t pool_size, std::uint64_t seed, double clamp_eps,
                                   unsigned threads = 1, bool track_gap = false);

/// tanh(a) - tanh(b) without cancellation when both are near +-1.
double tanh_difference(double a, double b);

/// log|tanh(a) - tanh(b)| given log|a - b|, valid far below double resolution.
double log_tanh_difference(double a, double b, double log_gap);

MagnetizationEstimate summarize_llr(std::span<const double> h);

/// Monte Carlo estimates of x_k (or y_k), E|X| and p_hat.
MagnetizationEstimate magnetization_stats(const MagnetizationQuery& q);

}  // namespace sbm
