#include "sbmrecon/stats.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace sbm {

Estimate mean_estimate(std::span<const double> xs, double z) {
  MomentAccumulator acc;
  for (double x : xs) acc.add(x);
  return {acc.mean(), acc.ci_half_width(z), acc.count};
}

VarianceEstimate variance_estimate(std::span<const double> xs) {
  VarianceEstimate out;
  out.count = static_cast<std::int64_t>(xs.size());
  if (xs.empty()) return out;
  const double n = static_cast<double>(xs.size());
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / n;
  double m2 = 0.0;
  double m4 = 0.0;
  for (double x : xs) {
    const double c = x - mean;
    const double c2 = c * c;
    m2 += c2;
    m4 += c2 * c2;
  }
  out.mean = mean;
  out.variance = xs.size() > 1 ? m2 / (n - 1.0) : 0.0;
  const double pop_var = m2 / n;
  const double fourth = m4 / n;
  const double spread = fourth - pop_var * pop_var;
  out.variance_se = spread > 0.0 ? std::sqrt(spread / n) : 0.0;
  out.mean_se = std::sqrt(out.variance / n);
  return out;
}

Estimate ratio_estimate(std::span<const double> numer, std::span<const double> denom,
                        bool paired, double z) {
  if (paired && numer.size() != denom.size()) throw std::invalid_argument("ratio_estimate: unpaired samples");
  MomentAccumulator a;
  MomentAccumulator b;
  for (double x : numer) a.add(x);
  for (double x : denom) b.add(x);
  Estimate out;
  out.trials = a.count;
  const double mb = b.mean();
  if (mb == 0.0) {
    out.value = std::numeric_limits<double>::quiet_NaN();
    out.ci = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  const double r = a.mean() / mb;
  out.value = r;
  if (paired) {
    MomentAccumulator resid;
    for (std::size_t i = 0; i < numer.size(); ++i) resid.add(numer[i] - r * denom[i]);
    out.ci = z * resid.std_error() / std::abs(mb);
  } else {
    const double sa = a.std_error();
    const double sb = b.std_error();
    out.ci = z * std::hypot(sa, r * sb) / std::abs(mb);
  }
  return out;
}

}  // namespace sbm
