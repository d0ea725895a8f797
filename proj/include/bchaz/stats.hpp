#pragma once

// Small descriptive-statistics helpers shared by the diagnostics and
// summaries: moments and batch-means estimates of Monte Carlo error.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace bchaz::stats {

inline double mean(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

/// Unbiased sample variance (0 for fewer than two values).
inline double variance(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

inline double sd(std::span<const double> x) { return std::sqrt(variance(x)); }

/// Variance of the sample mean of an autocorrelated series, from
/// non-overlapping batch means with floor(sqrt(n)) batches. Equivalent to the
/// spectral density at frequency zero divided by n.
inline double batch_means_variance_of_mean(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 4) return variance(x) / static_cast<double>(n == 0 ? 1 : n);
  const auto batches = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
  const std::size_t size = n / batches;
  const std::size_t used = size * batches;
  const std::size_t skip = n - used;  // drop the oldest draws
  double grand = 0.0;
  std::vector<double> means(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t t = 0; t < size; ++t) s += x[skip + b * size + t];
    means[b] = s / static_cast<double>(size);
    grand += means[b];
  }
  grand /= static_cast<double>(batches);
  double ss = 0.0;
  for (double m : means) ss += (m - grand) * (m - grand);
  const double var_batch = ss / static_cast<double>(batches - 1);
  return var_batch / static_cast<double>(batches);
}

/// Monte Carlo standard error of the mean by batch means.
inline double mcse(std::span<const double> x) { return std::sqrt(batch_means_variance_of_mean(x)); }

/// Uniform draw on the open interval (0, 1) from 53 random bits.
template <class Rng>
double uniform_open01(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace bchaz::stats
