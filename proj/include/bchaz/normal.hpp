#pragma once

// Standard normal density, distribution and quantile functions.
//
// cdf() is 0.5 * erfc(-x / sqrt(2)) using the C library erfc, which is
// accurate to a few ulp in relative terms on glibc, including deep in the
// lower tail. log_cdf() switches to the asymptotic Mills-ratio series below
// x = -30 where erfc would underflow. quantile() is Acklam's rational
// approximation followed by one Halley step against erfc, giving a relative
// error below 1e-14 over (0, 1).

#include <cmath>
#include <limits>
#include <numbers>

namespace bchaz::normal {

inline constexpr double kSqrt2 = std::numbers::sqrt2;
inline constexpr double kSqrt2Pi = 2.506628274631000502415765284811;
inline constexpr double kLogSqrt2Pi = 0.918938533204672741780329736406;

inline double pdf(double x) { return std::exp(-0.5 * x * x) / kSqrt2Pi; }

inline double log_pdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }

inline double cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

/// Upper tail 1 - cdf(x), without cancellation.
inline double ccdf(double x) { return 0.5 * std::erfc(x / kSqrt2); }

inline double log_cdf(double x) {
  if (std::isnan(x)) return x;
  if (x == std::numeric_limits<double>::infinity()) return 0.0;
  if (x > 5.0) return std::log1p(-ccdf(x));
  if (x > -30.0) return std::log(cdf(x));
  if (x == -std::numeric_limits<double>::infinity()) return x;
  // Phi(x) = phi(x)/|x| * (1 - 1/x^2 + 3/x^4 - 15/x^6 + ...)
  const double r = 1.0 / (x * x);
  double term = 1.0;
  double series = 1.0;
  for (int k = 1; k <= 6; ++k) {
    term *= -static_cast<double>(2 * k - 1) * r;
    series += term;
  }
  return log_pdf(x) - std::log(-x) + std::log(series);
}

inline double quantile(double p) {
  if (std::isnan(p) || p < 0.0 || p > 1.0) return std::numeric_limits<double>::quiet_NaN();
  if (p == 0.0) return -std::numeric_limits<double>::infinity();
  if (p == 1.0) return std::numeric_limits<double>::infinity();

  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  // Halley refinement; the residual is taken on whichever tail is smaller.
  const double e = (p < 0.5) ? cdf(x) - p : (1.0 - p) - ccdf(x);
  const double u = e * kSqrt2Pi * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

}  // namespace bchaz::normal
