#pragma once

#include <cstdint>

namespace sbm {

/// Two-class block model G(n, a/n, b/n).
struct ModelParams {
  std::int64_t n = 0;
  double a = 0.0;  // within-class intensity
  double b = 0.0;  // between-class intensity

  /// Throws std::invalid_argument unless n >= 1, a, b >= 0 and a/n, b/n <= 1.
  /// a == b is allowed here (the graph is still well defined); the tree
  /// conversion rejects it.
  void validate() const;
};

/// Broadcast-process parameters on the local tree.
struct TreeParams {
  double d = 0.0;      // mean offspring
  double eta = 0.0;    // edge flip probability
  double theta = 0.0;  // 1 - 2 eta
  double delta = 0.0;  // leaf noise, in [0, 1/2)

  /// Builds from (d, theta, delta); eta is derived so theta == 1 - 2 eta holds.
  static TreeParams from_theta(double d, double theta, double delta = 0.0);
  void validate() const;
};

/// d = (a+b)/2, eta = b/(a+b), theta = (a-b)/(a+b). Throws on a == b.
TreeParams derive_tree_params(const ModelParams& m, double delta = 0.0);

/// (a-b)^2 / (2(a+b)) == theta^2 d. Above 1 means above the Kesten-Stigum
/// threshold.
double ks_signal(const ModelParams& m);

/// Inverse of derive_tree_params: a = d(1+theta), b = d(1-theta).
struct EdgeIntensities {
  double a;
  double b;
};
EdgeIntensities intensities_from_tree(double d, double theta);

}  // namespace sbm
