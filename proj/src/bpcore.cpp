#include "sbmrecon/bpcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "sbmrecon/parallel.hpp"
#include "sbmrecon/rng.hpp"

namespace sbm {

namespace {

inline double clamp_mag(double x, double eps) {
  const double bound = 1.0 - eps;
  return std::clamp(x, -bound, bound);
}

inline double llr_bound(double eps) {
  return eps > 0.0 ? std::atanh(1.0 - eps) : std::numeric_limits<double>::infinity();
}

/// Message from a child given its log-ratio.
inline double message_from_llr(double h, double theta) {
  return std::atanh(theta * std::tanh(h));
}

void check_theta(double theta) {
  if (!(theta >= -1.0 && theta <= 1.0)) throw std::invalid_argument("theta outside [-1, 1]");
}

}  // namespace

double bp_message(double x, double theta, double clamp_eps) {
  return std::atanh(theta * clamp_mag(x, clamp_eps));
}

double bp_combine(std::span<const double> children, double theta, double clamp_eps) {
  check_theta(theta);
  double h = 0.0;
  for (double x : children) h += bp_message(x, theta, clamp_eps);
  return clamp_mag(std::tanh(h), clamp_eps);
}

double bp_upward(const TreeShape& tree, int level, std::span<const double> leaf_values,
                 double theta, double clamp_eps) {
  check_theta(theta);
  const NodeRange leaves = tree.level(level);
  if (static_cast<NodeId>(leaf_values.size()) != leaves.size())
    throw std::invalid_argument("leaf value count does not match the tree level");
  if (level == 0) return clamp_mag(leaf_values.empty() ? 0.0 : leaf_values[0], clamp_eps);

  // mag[u] for nodes at depth <= level; only the prefix [0, leaves.end) is used.
  std::vector<double> mag(static_cast<std::size_t>(leaves.end), 0.0);
  for (NodeId u = leaves.begin; u < leaves.end; ++u)
    mag[static_cast<std::size_t>(u)] = leaf_values[static_cast<std::size_t>(u - leaves.begin)];

  for (int j = level - 1; j >= 0; --j) {
    const NodeRange lv = tree.level(j);
    for (NodeId u = lv.begin; u < lv.end; ++u) {
      const NodeRange ch = tree.children(u);
      double h = 0.0;
      for (NodeId c = ch.begin; c < ch.end; ++c)
        h += bp_message(mag[static_cast<std::size_t>(c)], theta, clamp_eps);
      mag[static_cast<std::size_t>(u)] = clamp_mag(std::tanh(h), clamp_eps);
    }
  }
  return mag[0];
}

double bp_root(const TreeShape& tree, const BpConfig& cfg, std::span<const Spin> observed) {
  const int k = tree.depth_limit();
  const NodeRange leaves = tree.level(k);
  if (static_cast<NodeId>(observed.size()) != leaves.size())
    throw std::invalid_argument("observation vector does not cover L_k(root)");
  double scale = 1.0;
  if (cfg.mode == LeafMode::Noisy) {
    if (!(cfg.delta >= 0.0 && cfg.delta < 0.5)) throw std::invalid_argument("delta outside [0, 1/2)");
    scale = 1.0 - 2.0 * cfg.delta;
  }
  std::vector<double> values(observed.size());
  for (std::size_t i = 0; i < observed.size(); ++i) values[i] = scale * observed[i];
  return bp_upward(tree, k, values, cfg.theta, cfg.clamp_eps);
}

double exact_posterior(const TreeShape& tree, double theta, std::span<const Spin> observed,
                       std::optional<double> delta) {
  check_theta(theta);
  const int k = tree.depth_limit();
  const NodeRange leaves = tree.level(k);
  if (static_cast<NodeId>(observed.size()) != leaves.size())
    throw std::invalid_argument("observation vector does not cover L_k(root)");
  if (delta && !(*delta >= 0.0 && *delta < 0.5)) throw std::invalid_argument("delta outside [0, 1/2)");

  const auto n = static_cast<NodeId>(tree.size());
  const bool noisy = delta.has_value();
  // Nodes whose spins are summed over; pinned leaves keep their observation.
  std::vector<NodeId> free_nodes;
  for (NodeId u = 0; u < n; ++u)
    if (noisy || u < leaves.begin || u >= leaves.end) free_nodes.push_back(u);
  if (static_cast<int>(free_nodes.size()) > kMaxEnumeratedSpins)
    throw std::length_error("tree too large for exhaustive enumeration");

  const double eta = (1.0 - theta) / 2.0;
  const int edges = n - 1;
  const int nleaves = leaves.size();
  std::vector<double> agree_pow(static_cast<std::size_t>(edges) + 1);
  std::vector<double> flip_pow(static_cast<std::size_t>(edges) + 1);
  agree_pow[0] = flip_pow[0] = 1.0;
  for (int i = 1; i <= edges; ++i) {
    agree_pow[static_cast<std::size_t>(i)] = agree_pow[static_cast<std::size_t>(i - 1)] * (1.0 - eta);
    flip_pow[static_cast<std::size_t>(i)] = flip_pow[static_cast<std::size_t>(i - 1)] * eta;
  }
  const double dl = noisy ? *delta : 0.0;
  std::vector<double> keep_pow(static_cast<std::size_t>(nleaves) + 1);
  std::vector<double> noise_pow(static_cast<std::size_t>(nleaves) + 1);
  keep_pow[0] = noise_pow[0] = 1.0;
  for (int i = 1; i <= nleaves; ++i) {
    keep_pow[static_cast<std::size_t>(i)] = keep_pow[static_cast<std::size_t>(i - 1)] * (1.0 - dl);
    noise_pow[static_cast<std::size_t>(i)] = noise_pow[static_cast<std::size_t>(i - 1)] * dl;
  }

  std::vector<Spin> spin(static_cast<std::size_t>(n), 1);
  if (!noisy)
    for (NodeId u = leaves.begin; u < leaves.end; ++u)
      spin[static_cast<std::size_t>(u)] = observed[static_cast<std::size_t>(u - leaves.begin)];

  double mass_plus = 0.0;
  double mass_minus = 0.0;
  const std::uint64_t configs = std::uint64_t{1} << free_nodes.size();
  for (std::uint64_t mask = 0; mask < configs; ++mask) {
    for (std::size_t i = 0; i < free_nodes.size(); ++i)
      spin[static_cast<std::size_t>(free_nodes[i])] = ((mask >> i) & 1U) ? Spin{-1} : Spin{1};
    int flips = 0;
    for (NodeId u = 1; u < n; ++u)
      flips += spin[static_cast<std::size_t>(u)] != spin[static_cast<std::size_t>(tree.parent(u))];
    double w = agree_pow[static_cast<std::size_t>(edges - flips)] * flip_pow[static_cast<std::size_t>(flips)];
    if (noisy) {
      int mismatched = 0;
      for (NodeId u = leaves.begin; u < leaves.end; ++u)
        mismatched += spin[static_cast<std::size_t>(u)] != observed[static_cast<std::size_t>(u - leaves.begin)];
      w *= keep_pow[static_cast<std::size_t>(nleaves - mismatched)] *
           noise_pow[static_cast<std::size_t>(mismatched)];
    }
    (spin[0] > 0 ? mass_plus : mass_minus) += w;
  }
  const double total = mass_plus + mass_minus;
  if (!(total > 0.0)) throw std::domain_error("observations have zero likelihood");
  return (mass_plus - mass_minus) / total;
}

// ---------------------------------------------------------------------------

SamplingMethod resolve_method(const TreeKind& kind, int k, SamplingMethod requested) {
  if (requested != SamplingMethod::Auto) return requested;
  double expected = 0.0;
  double level = 1.0;
  for (int j = 0; j <= k; ++j) {
    expected += level;
    level *= kind.mean;
  }
  return expected <= kExplicitNodeBudget ? SamplingMethod::Explicit : SamplingMethod::Population;
}

CoupledTrial coupled_trial(const TreeKind& kind, double theta, double delta, int k,
                           std::uint64_t trial_seed, double clamp_eps) {
  BroadcastTree t = sample_broadcast(kind, k, (1.0 - theta) / 2.0, trial_seed);
  const Spin root = t.sigma[0];
  CoupledTrial out;
  out.survived = !t.level(k).empty();
  const auto exact = level_spins(t, k);
  out.x = root * bp_root(t.shape, {theta, clamp_eps, LeafMode::Exact, 0.0}, exact);
  if (delta > 0.0) {
    Rng noise = make_rng(trial_seed, stream::kNoise);
    add_leaf_noise(t, delta, k, noise);
    out.y = root * bp_root(t.shape, {theta, clamp_eps, LeafMode::Noisy, delta}, t.tau);
  } else {
    out.y = out.x;
  }
  return out;
}

double tanh_difference(double a, double b) {
  if (a == b) return 0.0;
  if (a >= 0.0 && b >= 0.0) {
    // tanh a - tanh b = 2 (e^{-2b} - e^{-2a}) / ((1 + e^{-2a})(1 + e^{-2b}))
    const double ea = std::exp(-2.0 * a);
    const double eb = std::exp(-2.0 * b);
    return 2.0 * (eb - ea) / ((1.0 + ea) * (1.0 + eb));
  }
  if (a <= 0.0 && b <= 0.0) return -tanh_difference(-a, -b);
  return std::tanh(a) - std::tanh(b);
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_cosh(double x) {
  const double a = std::abs(x);
  return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

double log_sinh(double log_x) {
  const double x = std::exp(log_x);
  if (x < 1e-3) return log_x + std::log1p(x * x / 6.0);
  return x + std::log1p(-std::exp(-2.0 * x)) - std::numbers::ln2;
}

/// Signed log-magnitude accumulator.
struct LogSum {
  double log_mag = kNegInf;
  int sign = 0;

  void add(double l, int s) {
    if (l == kNegInf || s == 0) return;
    if (log_mag == kNegInf) {
      log_mag = l;
      sign = s;
      return;
    }
    const double m = std::max(log_mag, l);
    const double v = sign * std::exp(log_mag - m) + s * std::exp(l - m);
    if (v == 0.0) {
      log_mag = kNegInf;
      sign = 0;
    } else {
      log_mag = m + std::log(std::abs(v));
      sign = v > 0.0 ? 1 : -1;
    }
  }
};

void set_direct(double diff, double& log_gap, std::int8_t& sign) {
  log_gap = diff == 0.0 ? kNegInf : std::log(std::abs(diff));
  sign = static_cast<std::int8_t>((diff > 0.0) - (diff < 0.0));
}

/// log|m(a) - m(b)| for m(h) = atanh(theta tanh h), using
/// atanh u - atanh v = atanh((u - v) / (1 - u v)).
double log_message_gap(double a, double b, double log_gap, double theta) {
  const double arg = std::log(std::abs(theta)) + log_tanh_difference(a, b, log_gap) -
                     std::log1p(-theta * theta * std::tanh(a) * std::tanh(b));
  return arg < -30.0 ? arg : std::log(std::atanh(std::exp(arg)));
}

}  // namespace

double log_tanh_difference(double a, double b, double log_gap) {
  if (log_gap == kNegInf) return kNegInf;
  if (std::isinf(a) || std::isinf(b)) {
    const double d = tanh_difference(a, b);
    return d == 0.0 ? kNegInf : std::log(std::abs(d));
  }
  // tanh a - tanh b = sinh(a - b) / (cosh a cosh b)
  return log_sinh(log_gap) - log_cosh(a) - log_cosh(b);
}

PopulationLevels population_levels(const TreeKind& kind, double theta, double delta, int k_max,
                                   std::int64_t pool_size, std::uint64_t seed, double clamp_eps,
                                   unsigned threads, bool track_gap) {
  check_theta(theta);
  if (pool_size < 1) throw std::invalid_argument("population size must be positive");
  if (k_max < 0) throw std::invalid_argument("negative depth");
  if (!(delta >= 0.0 && delta < 0.5)) throw std::invalid_argument("delta outside [0, 1/2)");
  const auto pool = static_cast<std::size_t>(pool_size);
  const double eta = (1.0 - theta) / 2.0;
  const double bound = llr_bound(clamp_eps);
  const auto dary = static_cast<std::int64_t>(kind.mean);

  PopulationLevels out;
  out.hx.assign(static_cast<std::size_t>(k_max) + 1, {});
  out.hy.assign(static_cast<std::size_t>(k_max) + 1, {});
  out.hx[0].assign(pool, bound);
  out.hy[0].resize(pool);
  {
    Rng rng = make_rng(seed, stream::kPopulation, 0);
    const double h_keep = std::clamp(std::atanh(1.0 - 2.0 * delta), -bound, bound);
    for (std::size_t i = 0; i < pool; ++i)
      out.hy[0][i] = (delta > 0.0 && bernoulli(rng, delta)) ? -h_keep : h_keep;
  }
  if (track_gap) {
    out.log_gap.assign(static_cast<std::size_t>(k_max) + 1, {});
    out.gap_sign.assign(static_cast<std::size_t>(k_max) + 1, {});
    out.log_gap[0].resize(pool);
    out.gap_sign[0].resize(pool);
    for (std::size_t i = 0; i < pool; ++i) {
      const double hx = out.hx[0][i];
      const double hy = out.hy[0][i];
      set_direct(hx == hy ? 0.0 : hx - hy, out.log_gap[0][i], out.gap_sign[0][i]);
    }
  }

  constexpr std::size_t kChunk = 1024;
  const std::size_t chunks = (pool + kChunk - 1) / kChunk;
  for (int j = 1; j <= k_max; ++j) {
    const auto& prev_x = out.hx[static_cast<std::size_t>(j - 1)];
    const auto& prev_y = out.hy[static_cast<std::size_t>(j - 1)];
    auto& cur_x = out.hx[static_cast<std::size_t>(j)];
    auto& cur_y = out.hy[static_cast<std::size_t>(j)];
    cur_x.assign(pool, 0.0);
    cur_y.assign(pool, 0.0);
    if (track_gap) {
      out.log_gap[static_cast<std::size_t>(j)].assign(pool, kNegInf);
      out.gap_sign[static_cast<std::size_t>(j)].assign(pool, 0);
    }
    parallel_for(
        chunks, threads,
        [&](std::size_t c) {
          Rng rng = make_rng(seed, stream::kPopulation,
                             (static_cast<std::uint64_t>(j) << 32) | static_cast<std::uint64_t>(c));
          const std::size_t end = std::min(pool, (c + 1) * kChunk);
          for (std::size_t i = c * kChunk; i < end; ++i) {
            const std::int64_t kids = kind.is_d_ary() ? dary : poisson(rng, kind.mean);
            double sx = 0.0;
            double sy = 0.0;
            LogSum gap;
            for (std::int64_t r = 0; r < kids; ++r) {
              const std::size_t pick = uniform_index(rng, pool);
              const double sign = bernoulli(rng, eta) ? -1.0 : 1.0;
              const double mx = message_from_llr(sign * prev_x[pick], theta);
              const double my = message_from_llr(sign * prev_y[pick], theta);
              sx += mx;
              sy += my;
              if (!track_gap) continue;
              const double lg = out.log_gap[static_cast<std::size_t>(j - 1)][pick];
              const int sg = out.gap_sign[static_cast<std::size_t>(j - 1)][pick] * static_cast<int>(sign) *
                             (theta < 0.0 ? -1 : 1);
              if (lg == kNegInf) continue;
              if (std::abs(theta) == 1.0) {
                const double dm = mx - my;
                if (dm != 0.0) gap.add(std::log(std::abs(dm)), dm > 0.0 ? 1 : -1);
              } else {
                gap.add(log_message_gap(sign * prev_x[pick], sign * prev_y[pick], lg, theta), sg);
              }
            }
            cur_x[i] = std::clamp(sx, -bound, bound);
            cur_y[i] = std::clamp(sy, -bound, bound);
            if (track_gap) {
              double& lg = out.log_gap[static_cast<std::size_t>(j)][i];
              std::int8_t& sg = out.gap_sign[static_cast<std::size_t>(j)][i];
              if (cur_x[i] != sx || cur_y[i] != sy) {
                set_direct(cur_x[i] == cur_y[i] ? 0.0 : cur_x[i] - cur_y[i], lg, sg);
              } else {
                lg = gap.log_mag;
                sg = static_cast<std::int8_t>(gap.sign);
              }
            }
          }
        },
        1);
  }
  return out;
}

MagnetizationEstimate summarize_llr(std::span<const double> h) {
  std::vector<double> signed_vals(h.size());
  std::vector<double> abs_vals(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    signed_vals[i] = std::tanh(h[i]);
    abs_vals[i] = std::abs(signed_vals[i]);
  }
  MagnetizationEstimate est;
  est.signed_mean = mean_estimate(signed_vals);
  est.abs_mean = mean_estimate(abs_vals);
  est.p_hat = {(1.0 + est.abs_mean.value) / 2.0, est.abs_mean.ci / 2.0, est.abs_mean.trials};
  est.method = SamplingMethod::Population;
  return est;
}

MagnetizationEstimate magnetization_stats(const MagnetizationQuery& q) {
  if (q.trials < 1) throw std::invalid_argument("trials must be positive");
  const SamplingMethod method = resolve_method(q.kind, q.k, q.method);
  if (method == SamplingMethod::Population) {
    const PopulationLevels pop =
        population_levels(q.kind, q.theta, q.delta, q.k, q.trials, q.seed, q.clamp_eps, q.threads);
    return summarize_llr(q.delta > 0.0 ? pop.hy[static_cast<std::size_t>(q.k)]
                                       : pop.hx[static_cast<std::size_t>(q.k)]);
  }
  const auto n = static_cast<std::size_t>(q.trials);
  std::vector<double> signed_vals(n);
  std::vector<double> abs_vals(n);
  parallel_for(n, q.threads, [&](std::size_t i) {
    const CoupledTrial t = coupled_trial(q.kind, q.theta, q.delta, q.k,
                                         derive_seed(q.seed, stream::kTrial, i), q.clamp_eps);
    const double v = q.delta > 0.0 ? t.y : t.x;
    signed_vals[i] = v;
    abs_vals[i] = std::abs(v);
  });
  MagnetizationEstimate est;
  est.signed_mean = mean_estimate(signed_vals);
  est.abs_mean = mean_estimate(abs_vals);
  est.p_hat = {(1.0 + est.abs_mean.value) / 2.0, est.abs_mean.ci / 2.0, est.abs_mean.trials};
  est.method = SamplingMethod::Explicit;
  return est;
}

}  // namespace sbm
