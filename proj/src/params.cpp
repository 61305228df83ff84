#include "sbmrecon/params.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sbm {

void ModelParams::validate() const {
  if (n < 1) throw std::invalid_argument("n must be positive");
  if (!(a >= 0.0) || !(b >= 0.0))
    throw std::invalid_argument("edge intensities must be nonnegative");
  const double nd = static_cast<double>(n);
  if (a / nd > 1.0 || b / nd > 1.0)
    throw std::invalid_argument("edge probability exceeds 1 (a/n = " + std::to_string(a / nd) +
                                ", b/n = " + std::to_string(b / nd) + ")");
}

TreeParams TreeParams::from_theta(double d, double theta, double delta) {
  TreeParams t{d, (1.0 - theta) / 2.0, theta, delta};
  t.validate();
  return t;
}

void TreeParams::validate() const {
  if (!(d > 0.0)) throw std::invalid_argument("mean offspring d must be positive");
  if (!(theta >= -1.0 && theta <= 1.0)) throw std::invalid_argument("theta outside [-1, 1]");
  if (theta == 0.0) throw std::invalid_argument("degenerate signal (theta = 0)");
  if (!(delta >= 0.0 && delta < 0.5)) throw std::invalid_argument("leaf noise delta outside [0, 1/2)");
}

TreeParams derive_tree_params(const ModelParams& m, double delta) {
  m.validate();
  if (m.a == m.b) throw std::invalid_argument("degenerate signal (a == b)");
  const double sum = m.a + m.b;
  TreeParams t;
  t.d = sum / 2.0;
  t.eta = m.b / sum;
  t.theta = 1.0 - 2.0 * t.eta;
  t.delta = delta;
  t.validate();
  return t;
}

double ks_signal(const ModelParams& m) {
  const double diff = m.a - m.b;
  return diff * diff / (2.0 * (m.a + m.b));
}

EdgeIntensities intensities_from_tree(double d, double theta) {
  return {d * (1.0 + theta), d * (1.0 - theta)};
}

}  // namespace sbm
