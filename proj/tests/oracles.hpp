#pragma once

// Independent reference computations for the tests. Nothing here calls into
// the library's likelihood, prior or normal-distribution code.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace oracle {

struct Subject {
  double y;
  int nu;
  std::vector<double> z;
};

inline double eta(const Subject& s, const std::vector<double>& beta) {
  double e = 0.0;
  for (std::size_t l = 0; l < beta.size(); ++l) e += beta[l] * s.z[l];
  return e;
}

// Interval index j with s_{j-1} < y <= s_j, found by linear scan; y = 0
// belongs to the first interval.
inline std::size_t interval_of(const std::vector<double>& cuts, double y) {
  for (std::size_t j = 1; j < cuts.size(); ++j)
    if (y <= cuts[j]) return j - 1;
  return cuts.size() - 2;
}

template <class Hazard>
double piecewise_loglik(const std::vector<Subject>& data, const std::vector<double>& cuts,
                        const std::vector<double>& lambda, const std::vector<double>& beta, Hazard hazard) {
  double ll = 0.0;
  for (const auto& s : data) {
    const double e = eta(s, beta);
    for (std::size_t g = 0; g + 1 < cuts.size(); ++g) {
      const double lo = cuts[g], hi = std::min(cuts[g + 1], s.y);
      if (hi > lo) ll -= hazard(lambda[g], e) * (hi - lo);
    }
    if (s.nu) ll += std::log(hazard(lambda[interval_of(cuts, s.y)], e));
  }
  return ll;
}

/// Cox form: lambda_j exp(beta'Z).
inline double cox_loglik(const std::vector<Subject>& data, const std::vector<double>& cuts,
                         const std::vector<double>& lambda, const std::vector<double>& beta) {
  return piecewise_loglik(data, cuts, lambda, beta, [](double l, double e) { return l * std::exp(e); });
}

/// Additive form: lambda_j + beta'Z.
inline double additive_loglik(const std::vector<Subject>& data, const std::vector<double>& cuts,
                              const std::vector<double>& lambda, const std::vector<double>& beta) {
  return piecewise_loglik(data, cuts, lambda, beta, [](double l, double e) { return l + e; });
}

/// General gamma in (0, 1], straight from the closed form.
inline double boxcox_loglik(const std::vector<Subject>& data, const std::vector<double>& cuts,
                            const std::vector<double>& lambda, const std::vector<double>& beta, double gamma) {
  return piecewise_loglik(data, cuts, lambda, beta,
                          [gamma](double l, double e) { return std::pow(std::pow(l, gamma) + gamma * e, 1.0 / gamma); });
}

template <class F>
double integrate(F f, double a, double b, double tol = 1e-13) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 25, tol);
}

/// log of the integral of exp(-t^2 / (2 sigma^2)) over [-h, inf).
inline double log_truncated_kernel_mass(double h, double sigma) {
  // Shift to start at zero so the quadrature sees the mass near the origin.
  const double v = integrate([&](double u) { return std::exp(-(u - h) * (u - h) / (2.0 * sigma * sigma)); }, 0.0,
                             std::numeric_limits<double>::infinity());
  return std::log(v);
}

inline double std_normal_cdf(double x) { return boost::math::cdf(boost::math::normal(), x); }
inline double std_normal_pdf(double x) { return boost::math::pdf(boost::math::normal(), x); }

/// Mean and variance of N(0, sigma^2) restricted to [-h, inf).
struct Moments {
  double mean;
  double variance;
};

inline Moments truncated_normal_moments(double h, double sigma) {
  const double a = -h / sigma;
  const double ratio = std_normal_pdf(a) / std_normal_cdf(h / sigma);
  return {sigma * ratio, sigma * sigma * (1.0 + a * ratio - ratio * ratio)};
}

/// Shortest interval [x_i, x_j] over the draws containing at least
/// ceil(level * M) of them, by checking every pair. Ties go to the lowest
/// left endpoint.
struct Window {
  double low;
  double high;
};

inline Window brute_force_hpd(std::vector<double> x, double level) {
  std::sort(x.begin(), x.end());
  const std::size_t M = x.size();
  const auto need = static_cast<std::size_t>(std::ceil(level * static_cast<double>(M) - 1e-9));
  Window best{0.0, std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t j = i; j < M; ++j) {
      const auto count = static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), x[j]) -
                                                  std::lower_bound(x.begin(), x.end(), x[i]));
      if (count >= need && x[j] - x[i] < best.high - best.low) best = {x[i], x[j]};
    }
  return best;
}

/// Leave-one-out predictive ordinates for a single-covariate, single-interval
/// model by nested quadrature: CPO_i = Z(D) / Z(D without i) where
/// Z(D') = int int L(beta, lambda | D') pi(beta | lambda) pi(lambda). The
/// prior truncation always uses every subject's covariate.
struct ToyModel {
  std::vector<Subject> data;  // one covariate each, all positive
  double gamma;
  double sigma;
  double alpha;
  double xi;
};

inline double toy_hazard(const ToyModel& m, double lambda, double eta) {
  if (m.gamma == 0.0) return lambda * std::exp(eta);
  return std::pow(std::pow(lambda, m.gamma) + m.gamma * eta, 1.0 / m.gamma);
}

inline double toy_evidence(const ToyModel& m, std::size_t skip) {
  double zmax = 0.0;
  for (const auto& s : m.data) zmax = std::max(zmax, s.z[0]);
  const double inf = std::numeric_limits<double>::infinity();
  auto lik = [&](double beta, double lambda) {
    double ll = 0.0;
    for (std::size_t i = 0; i < m.data.size(); ++i) {
      if (i == skip) continue;
      const auto& s = m.data[i];
      const double h = toy_hazard(m, lambda, beta * s.z[0]);
      ll += -h * s.y + (s.nu ? std::log(h) : 0.0);
    }
    return ll;
  };
  auto outer = [&](double lambda) {
    if (!(lambda > 0.0)) return 0.0;
    const double h = m.gamma == 0.0 ? inf : std::pow(lambda, m.gamma) / (m.gamma * zmax);
    const double c = std::sqrt(2.0 * M_PI) * m.sigma * (m.gamma == 0.0 ? 1.0 : std_normal_cdf(h / m.sigma));
    const double lo = m.gamma == 0.0 ? -inf : -h;
    const double inner = integrate(
        [&](double beta) {
          const double v = lik(beta, lambda) - beta * beta / (2.0 * m.sigma * m.sigma);
          return std::isfinite(v) ? std::exp(v) : 0.0;
        },
        lo, inf, 1e-11);
    const double log_gamma_kernel = (m.alpha - 1.0) * std::log(lambda) - m.xi * lambda;
    return std::exp(log_gamma_kernel) * inner / c;
  };
  return integrate(outer, 0.0, inf, 1e-10);
}

inline std::vector<double> toy_cpo(const ToyModel& m) {
  const double full = toy_evidence(m, m.data.size());
  std::vector<double> out;
  for (std::size_t i = 0; i < m.data.size(); ++i) out.push_back(full / toy_evidence(m, i));
  return out;
}

}  // namespace oracle
