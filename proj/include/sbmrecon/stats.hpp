#pragma once

#include <cmath>
#include <cstdint>
#include <span>

namespace sbm {

/// Two-sided 99% normal quantile used for every reported confidence interval.
inline constexpr double kZ99 = 2.576;

/// (sum, sum of squares, count) triple. Merging is associative, so partial
/// accumulators from independent workers can be combined in any grouping.
struct MomentAccumulator {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::int64_t count = 0;

  void add(double x) {
    sum += x;
    sum_sq += x * x;
    ++count;
  }
  void merge(const MomentAccumulator& other) {
    sum += other.sum;
    sum_sq += other.sum_sq;
    count += other.count;
  }

  double mean() const { return count > 0 ? sum / static_cast<double>(count) : 0.0; }

  /// Unbiased sample variance.
  double variance() const {
    if (count < 2) return 0.0;
    const double n = static_cast<double>(count);
    const double m = sum / n;
    const double v = (sum_sq - n * m * m) / (n - 1.0);
    return v > 0.0 ? v : 0.0;
  }

  /// Standard error of the mean.
  double std_error() const {
    return count > 0 ? std::sqrt(variance() / static_cast<double>(count)) : 0.0;
  }

  double ci_half_width(double z = kZ99) const { return z * std_error(); }
};

struct Estimate {
  double value = 0.0;
  double ci = 0.0;  // half-width
  std::int64_t trials = 0;
};

/// Mean with its CI, summed in index order (bit-stable for a fixed input).
Estimate mean_estimate(std::span<const double> xs, double z = kZ99);

/// Sample variance together with the standard error of that variance,
/// sqrt((m4 - s^4) / N), using the sample fourth central moment.
struct VarianceEstimate {
  double mean = 0.0;
  double variance = 0.0;
  double variance_se = 0.0;
  double mean_se = 0.0;
  std::int64_t count = 0;
};
VarianceEstimate variance_estimate(std::span<const double> xs);

/// Ratio A/B of two means with a delta-method CI. Paired samples use the
/// residuals A_i - r B_i; independent ones add the relative variances.
Estimate ratio_estimate(std::span<const double> numer, std::span<const double> denom,
                        bool paired = true, double z = kZ99);

}  // namespace sbm
