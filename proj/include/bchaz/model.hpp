#pragma once

// Box-Cox transformation hazard model with a piecewise-constant baseline.
//
// For a subject with linear predictor eta = beta'Z the hazard in interval j is
//
//   h_j(eta) = (lambda_j^gamma + gamma * eta)^(1/gamma)   0 < gamma <= 1
//   h_j(eta) = lambda_j * exp(eta)                         gamma == 0
//
// and the model is only defined where lambda_j^gamma + gamma * eta >= 0 for
// every subject and interval. One coefficient, beta_k, carries a normal prior
// truncated to that admissible region; its normalizing constant depends on
// the remaining parameters and is available in closed form.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "normal.hpp"

namespace bchaz {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kPosInf = std::numeric_limits<double>::infinity();

/// Hazards below this value contribute a log hazard of -inf.
inline constexpr double kHazardFloor = 1e-300;
inline const double kLogHazardFloor = std::log(kHazardFloor);

/// Dense row-major matrix. Rows are subjects, columns covariates.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) throw DomainError("Matrix: value count does not match shape");
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }

  std::span<const double> row(std::size_t i) const { return {values_.data() + i * cols_, cols_}; }
  std::span<double> row(std::size_t i) { return {values_.data() + i * cols_, cols_}; }

  const std::vector<double>& values() const noexcept { return values_; }

  void append_row(std::span<const double> r) {
    if (rows_ == 0 && cols_ == 0) cols_ = r.size();
    if (r.size() != cols_) throw DomainError("Matrix: row length does not match column count");
    values_.insert(values_.end(), r.begin(), r.end());
    ++rows_;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Right-censored survival data: observed times, event indicators (1 = event,
/// 0 = censored) and an n x p covariate matrix.
struct SurvivalDataset {
  std::vector<double> time;
  std::vector<int> status;
  Matrix covariates;
  std::vector<std::string> covariate_names;

  std::size_t size() const noexcept { return time.size(); }
  std::size_t num_covariates() const noexcept { return covariates.cols(); }

  std::size_t num_events() const {
    return static_cast<std::size_t>(std::count(status.begin(), status.end(), 1));
  }

  double max_time() const {
    return time.empty() ? 0.0 : *std::max_element(time.begin(), time.end());
  }

  double linear_predictor(std::size_t i, std::span<const double> beta) const {
    return dot(covariates.row(i), beta);
  }

  /// Index of the covariate called `name`; throws ConfigError if absent.
  std::size_t covariate_index(const std::string& name) const {
    auto it = std::find(covariate_names.begin(), covariate_names.end(), name);
    if (it == covariate_names.end()) throw ConfigError("unknown covariate '" + name + "'");
    return static_cast<std::size_t>(it - covariate_names.begin());
  }

  void validate(bool require_event = true) const {
    const std::size_t n = time.size();
    if (status.size() != n) throw DomainError("dataset: status length differs from time length");
    if (covariates.rows() != n) throw DomainError("dataset: covariate rows differ from subject count");
    if (!covariate_names.empty() && covariate_names.size() != covariates.cols())
      throw DomainError("dataset: covariate name count differs from column count");
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(time[i]) || time[i] < 0.0)
        throw DomainError("dataset: subject " + std::to_string(i + 1) + " has an invalid time");
      if (status[i] != 0 && status[i] != 1)
        throw DomainError("dataset: subject " + std::to_string(i + 1) + " has status outside {0,1}");
      for (double z : covariates.row(i))
        if (!std::isfinite(z))
          throw DomainError("dataset: subject " + std::to_string(i + 1) + " has a non-finite covariate");
    }
    if (require_event && num_events() == 0) throw DomainError("dataset: at least one event required");
  }
};

/// Cut points 0 = s_0 < s_1 < ... < s_J. Interval j (0-based) is the
/// half-open range (s_j, s_{j+1}]; time 0 is assigned to the first interval.
struct TimePartition {
  std::vector<double> cuts;

  std::size_t intervals() const noexcept { return cuts.empty() ? 0 : cuts.size() - 1; }
  double end() const { return cuts.back(); }
  double width(std::size_t j) const { return cuts[j + 1] - cuts[j]; }

  std::size_t interval_of(double t) const {
    if (t < 0.0 || t > end()) throw ExtrapolationError("time " + std::to_string(t) + " lies outside the partition");
    auto it = std::lower_bound(cuts.begin() + 1, cuts.end(), t);
    return static_cast<std::size_t>(it - (cuts.begin() + 1));
  }

  void validate() const {
    if (cuts.size() < 2) throw DomainError("partition: need at least one interval");
    if (cuts.front() != 0.0) throw DomainError("partition: first cut point must be 0");
    for (std::size_t j = 1; j < cuts.size(); ++j)
      if (!(cuts[j] > cuts[j - 1]) || !std::isfinite(cuts[j]))
        throw DomainError("partition: cut points must be finite and strictly increasing");
  }

  /// Full invariant check against a dataset: s_J > max y and every interval
  /// holds at least one event time.
  void validate_for(const SurvivalDataset& data) const {
    validate();
    if (!(end() > data.max_time())) throw DomainError("partition: last cut point must exceed every observed time");
    std::vector<std::size_t> events(intervals(), 0);
    for (std::size_t i = 0; i < data.size(); ++i)
      if (data.status[i] == 1) ++events[interval_of(data.time[i])];
    for (std::size_t j = 0; j < events.size(); ++j)
      if (events[j] == 0) throw DomainError("partition: interval " + std::to_string(j + 1) + " contains no event");
  }
};

/// Model and prior configuration. `constrained` is the 0-based index k of
/// the coefficient that carries the truncated normal prior; `sigma` holds one
/// prior standard deviation per coefficient; each lambda_j ~ Gamma(alpha, xi)
/// with xi a rate.
struct ModelConfig {
  double gamma = 0.5;
  std::size_t constrained = 0;
  std::vector<double> sigma;
  double alpha = 2.0;
  double xi = 0.01;

  /// Noninformative defaults: N(0, 10^4) for every coefficient, Gamma(2, .01).
  static ModelConfig defaults(std::size_t p, double gamma, std::size_t constrained = 0) {
    ModelConfig c;
    c.gamma = gamma;
    c.constrained = constrained;
    c.sigma.assign(p, 100.0);
    return c;
  }

  void validate(std::size_t p) const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
    if (sigma.size() != p) throw ConfigError("sigma must hold one value per covariate");
    for (double s : sigma)
      if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("prior standard deviations must be positive");
    if (p > 0 && constrained >= p) throw ConfigError("constrained coefficient index out of range");
    if (!(alpha > 0.0) || !(xi > 0.0)) throw ConfigError("Gamma prior shape and rate must be positive");
  }
};

struct ParameterState {
  std::vector<double> beta;
  std::vector<double> lambda;

  friend bool operator==(const ParameterState&, const ParameterState&) = default;
};

// ---------------------------------------------------------------------------
// Scalar closed forms

inline double box_cox(double y, double gamma) {
  if (!(y > 0.0)) throw DomainError("box_cox: argument must be positive");
  if (gamma == 0.0) return std::log(y);
  return std::expm1(gamma * std::log(y)) / gamma;
}

namespace detail {

// log of the hazard given lambda^gamma - 1 (precomputed as expm1(gamma*log
// lambda)). Returns NaN when the base is negative. The expm1/log1p form keeps
// full precision as gamma -> 0.
inline double log_hazard_from_transformed(double lambda_pow_m1, double eta, double gamma) {
  const double base_m1 = lambda_pow_m1 + gamma * eta;
  if (base_m1 < -1.0) return std::numeric_limits<double>::quiet_NaN();
  if (base_m1 == -1.0) return kNegInf;
  return std::log1p(base_m1) / gamma;
}

}  // namespace detail

/// Natural log of the hazard; -inf at a zero hazard, NaN if inadmissible.
inline double log_hazard(double lambda, double eta, double gamma) {
  if (gamma == 0.0) return std::log(lambda) + eta;
  return detail::log_hazard_from_transformed(std::expm1(gamma * std::log(lambda)), eta, gamma);
}

/// Hazard for baseline level `lambda` and linear predictor `eta`.
inline double hazard(double lambda, double eta, double gamma) {
  if (!(lambda > 0.0)) throw DomainError("hazard: baseline level must be positive");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw DomainError("hazard: gamma must lie in [0, 1]");
  const double lh = log_hazard(lambda, eta, gamma);
  if (std::isnan(lh)) throw ConstraintError("hazard: lambda^gamma + gamma*eta is negative");
  return std::exp(lh);
}

inline double log_prior_beta_l(double beta_l, double sigma_l) {
  return -beta_l * beta_l / (2.0 * sigma_l * sigma_l);
}

inline double log_prior_lambda_j(double lambda_j, double alpha, double xi) {
  if (!(lambda_j > 0.0)) return kNegInf;
  return (alpha - 1.0) * std::log(lambda_j) - xi * lambda_j;
}

// ---------------------------------------------------------------------------

/// Piecewise-exponential likelihood for one dataset, partition and gamma.
/// Holds references to the dataset and partition, which must outlive it.
class PiecewiseLikelihood {
 public:
  PiecewiseLikelihood(const SurvivalDataset& data, const TimePartition& partition, double gamma)
      : data_(&data), partition_(&partition), gamma_(gamma) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw DomainError("gamma must lie in [0, 1]");
    data.validate(false);
    partition.validate();
    if (data.size() > 0 && !(partition.end() > data.max_time()))
      throw DomainError("partition: last cut point must exceed every observed time");
    interval_.resize(data.size());
    offset_.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      interval_[i] = partition.interval_of(data.time[i]);
      offset_[i] = data.time[i] - partition.cuts[interval_[i]];
    }
  }

  const SurvivalDataset& data() const noexcept { return *data_; }
  const TimePartition& partition() const noexcept { return *partition_; }
  double gamma() const noexcept { return gamma_; }
  std::size_t subjects() const noexcept { return data_->size(); }
  std::size_t num_covariates() const noexcept { return data_->num_covariates(); }
  std::size_t intervals() const noexcept { return partition_->intervals(); }
  std::size_t interval_of_subject(std::size_t i) const { return interval_[i]; }

  void check_dimensions(const ParameterState& s) const {
    if (s.beta.size() != num_covariates()) throw DomainError("state: beta length differs from covariate count");
    if (s.lambda.size() != intervals()) throw DomainError("state: lambda length differs from interval count");
  }

  /// lambda_j^gamma + gamma beta'Z_i >= 0 for every subject and interval; vacuous at gamma = 0.
  bool admissible(const ParameterState& s) const {
    check_dimensions(s);
    for (double l : s.lambda)
      if (!(l > 0.0)) return false;
    if (gamma_ == 0.0) return true;
    const double min_pow_m1 = std::expm1(gamma_ * std::log(*std::min_element(s.lambda.begin(), s.lambda.end())));
    for (std::size_t i = 0; i < subjects(); ++i)
      if (min_pow_m1 + gamma_ * data_->linear_predictor(i, s.beta) < -1.0) return false;
    return true;
  }

  /// Log-likelihood, or -inf when the state is inadmissible.
  double log_likelihood(const ParameterState& s) const {
    if (!admissible(s)) return kNegInf;
    const auto tr = transformed(s);
    double total = 0.0;
    for (std::size_t i = 0; i < subjects(); ++i) {
      total += subject_term(i, tr, data_->linear_predictor(i, s.beta));
      if (total == kNegInf) return kNegInf;
    }
    return total;
  }

  /// Log of subject i's factor of the likelihood.
  double subject_log_likelihood(const ParameterState& s, std::size_t i) const {
    if (!admissible(s)) return kNegInf;
    return subject_term(i, transformed(s), data_->linear_predictor(i, s.beta));
  }

  /// All subject factors at once; out must have length n.
  void subject_log_likelihoods(const ParameterState& s, std::span<double> out) const {
    if (out.size() != subjects()) throw DomainError("output length differs from subject count");
    if (!admissible(s)) {
      std::fill(out.begin(), out.end(), kNegInf);
      return;
    }
    const auto tr = transformed(s);
    for (std::size_t i = 0; i < subjects(); ++i) out[i] = subject_term(i, tr, data_->linear_predictor(i, s.beta));
  }

  /// Admissible interval for coordinate m of beta with everything else held
  /// at `s`. At gamma = 0 the whole real line.
  std::pair<double, double> beta_range(const ParameterState& s, std::size_t m) const {
    double lo = kNegInf, hi = kPosInf;
    if (gamma_ == 0.0) return {lo, hi};
    const double min_pow = std::pow(*std::min_element(s.lambda.begin(), s.lambda.end()), gamma_);
    for (std::size_t i = 0; i < subjects(); ++i) {
      const double z = data_->covariates(i, m);
      if (z == 0.0) continue;
      const double rest = min_pow + gamma_ * (data_->linear_predictor(i, s.beta) - s.beta[m] * z);
      const double bound = -rest / (gamma_ * z);
      if (z > 0.0)
        lo = std::max(lo, bound);
      else
        hi = std::min(hi, bound);
    }
    return {lo, hi};
  }

 private:
  // Per-interval log lambda (gamma = 0) or lambda^gamma - 1 (gamma > 0).
  std::vector<double> transformed(const ParameterState& s) const {
    std::vector<double> tr(s.lambda.size());
    for (std::size_t j = 0; j < tr.size(); ++j)
      tr[j] = gamma_ == 0.0 ? std::log(s.lambda[j]) : std::expm1(gamma_ * std::log(s.lambda[j]));
    return tr;
  }

  double log_h(const std::vector<double>& tr, std::size_t j, double eta) const {
    return gamma_ == 0.0 ? tr[j] + eta : detail::log_hazard_from_transformed(tr[j], eta, gamma_);
  }

  double subject_term(std::size_t i, const std::vector<double>& tr, double eta) const {
    const std::size_t j = interval_[i];
    double H = 0.0;
    for (std::size_t g = 0; g < j; ++g) H += std::exp(log_h(tr, g, eta)) * partition_->width(g);
    const double lh = log_h(tr, j, eta);
    H += std::exp(lh) * offset_[i];
    double term = -H;
    if (data_->status[i] == 1) term += (lh < kLogHazardFloor) ? kNegInf : lh;
    return term;
  }

  const SurvivalDataset* data_;
  const TimePartition* partition_;
  double gamma_;
  std::vector<std::size_t> interval_;
  std::vector<double> offset_;
};

/// Joint posterior (up to a constant) of (beta, lambda) under the
/// conditional-marginal prior: truncated normal on beta_k given the rest,
/// independent normals on the other coefficients and Gamma(alpha, xi) on each
/// lambda_j.
class Posterior {
 public:
  Posterior(const SurvivalDataset& data, const TimePartition& partition, ModelConfig config)
      : likelihood_(data, partition, config.gamma), config_(std::move(config)) {
    config_.validate(data.num_covariates());
    if (config_.gamma > 0.0 && data.num_covariates() > 0) check_constrained_column(data, config_.constrained);
  }

  static void check_constrained_column(const SurvivalDataset& data, std::size_t k) {
    for (std::size_t i = 0; i < data.size(); ++i)
      if (!(data.covariates(i, k) > 0.0))
        throw ConfigError("constrained covariate must be strictly positive; subject " + std::to_string(i + 1) +
                          " has value " + std::to_string(data.covariates(i, k)));
  }

  const PiecewiseLikelihood& likelihood() const noexcept { return likelihood_; }
  const ModelConfig& config() const noexcept { return config_; }

  /// min over (i, j) of (lambda_j^gamma + gamma beta_(-k)'Z_i(-k)) / (gamma Z_ik);
  /// +inf with no subjects. Requires gamma > 0.
  double h_gamma(const ParameterState& s) const {
    const auto& data = likelihood_.data();
    const double g = config_.gamma;
    const std::size_t k = config_.constrained;
    const double min_pow = std::pow(*std::min_element(s.lambda.begin(), s.lambda.end()), g);
    double h = kPosInf;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double zk = data.covariates(i, k);
      const double rest = data.linear_predictor(i, s.beta) - s.beta[k] * zk;
      h = std::min(h, (min_pow + g * rest) / (g * zk));
    }
    return h;
  }

  /// log c(beta_(-k), lambda); the untruncated constant at gamma = 0.
  double log_norm_constant(const ParameterState& s) const {
    const double sk = config_.sigma[config_.constrained];
    const double untruncated = normal::kLogSqrt2Pi + std::log(sk);
    if (config_.gamma == 0.0) return untruncated;
    return untruncated + normal::log_cdf(h_gamma(s) / sk);
  }

  double log_prior(const ParameterState& s) const {
    double lp = 0.0;
    for (double l : s.lambda) lp += log_prior_lambda_j(l, config_.alpha, config_.xi);
    const std::size_t p = s.beta.size();
    for (std::size_t l = 0; l < p; ++l)
      if (l != config_.constrained) lp += log_prior_beta_l(s.beta[l], config_.sigma[l]);
    if (p > 0) {
      const std::size_t k = config_.constrained;
      if (config_.gamma > 0.0 && s.beta[k] < -h_gamma(s)) return kNegInf;
      lp += log_prior_beta_l(s.beta[k], config_.sigma[k]) - log_norm_constant(s);
    }
    return lp;
  }

  /// Unnormalized log posterior; -inf outside the admissible region. With
  /// `include_likelihood` false this is the log prior restricted to the
  /// admissible region.
  double log_density(const ParameterState& s, bool include_likelihood = true) const {
    if (!likelihood_.admissible(s)) return kNegInf;
    const double lp = log_prior(s);
    if (lp == kNegInf || !include_likelihood) return lp;
    return lp + likelihood_.log_likelihood(s);
  }

 private:
  PiecewiseLikelihood likelihood_;
  ModelConfig config_;
};

/// Cumulative hazard on [0, t] for baseline levels `lambda` on `partition`
/// and linear predictor eta. Throws ExtrapolationError beyond the last cut.
inline double cumulative_hazard(const TimePartition& partition, std::span<const double> lambda, double eta,
                                double gamma, double t) {
  const std::size_t j = partition.interval_of(t);
  double H = 0.0;
  for (std::size_t g = 0; g <= j; ++g) {
    const double lh = log_hazard(lambda[g], eta, gamma);
    if (std::isnan(lh)) throw ConstraintError("cumulative_hazard: inadmissible hazard");
    const double exposure = (g < j ? partition.cuts[g + 1] : t) - partition.cuts[g];
    H += std::exp(lh) * exposure;
  }
  return H;
}

// ---------------------------------------------------------------------------
// Free-function forms of the closed-form quantities.

inline bool constraint_satisfied(const ParameterState& s, const SurvivalDataset& data, double gamma) {
  if (s.beta.size() != data.num_covariates()) throw DomainError("state: beta length differs from covariate count");
  for (double l : s.lambda)
    if (!(l > 0.0)) return false;
  if (gamma == 0.0 || s.lambda.empty()) return true;
  const double min_pow_m1 = std::expm1(gamma * std::log(*std::min_element(s.lambda.begin(), s.lambda.end())));
  for (std::size_t i = 0; i < data.size(); ++i)
    if (min_pow_m1 + gamma * data.linear_predictor(i, s.beta) < -1.0) return false;
  return true;
}

/// h_gamma with beta given in full; beta[k] is ignored.
inline double h_gamma(std::span<const double> lambda, std::span<const double> beta, const SurvivalDataset& data,
                      std::size_t k, double gamma) {
  if (!(gamma > 0.0)) throw DomainError("h_gamma: gamma must be positive");
  if (lambda.empty()) throw DomainError("h_gamma: need at least one baseline level");
  Posterior::check_constrained_column(data, k);
  const double min_pow = std::pow(*std::min_element(lambda.begin(), lambda.end()), gamma);
  double h = kPosInf;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double zk = data.covariates(i, k);
    const double rest = data.linear_predictor(i, beta) - beta[k] * zk;
    h = std::min(h, (min_pow + gamma * rest) / (gamma * zk));
  }
  return h;
}

inline double log_likelihood(const ParameterState& s, const SurvivalDataset& data, const TimePartition& partition,
                             double gamma) {
  const PiecewiseLikelihood lik(data, partition, gamma);
  lik.check_dimensions(s);
  return lik.log_likelihood(s);
}

/// log[sqrt(2 pi) sigma_k (1 - Phi(-h/sigma_k))] for a given h_gamma value.
inline double log_norm_constant_from_h(double h, double sigma_k) {
  return normal::kLogSqrt2Pi + std::log(sigma_k) + normal::log_cdf(h / sigma_k);
}

inline double log_norm_constant(std::span<const double> lambda, std::span<const double> beta,
                                const SurvivalDataset& data, const ModelConfig& config) {
  const double sk = config.sigma.at(config.constrained);
  if (config.gamma == 0.0) return normal::kLogSqrt2Pi + std::log(sk);
  return log_norm_constant_from_h(h_gamma(lambda, beta, data, config.constrained, config.gamma), sk);
}

/// Truncated-normal log prior of beta_k given the rest; -inf below -h_gamma.
inline double log_prior_beta_k(double beta_k, std::span<const double> lambda, std::span<const double> beta,
                               const SurvivalDataset& data, const ModelConfig& config) {
  const double sk = config.sigma.at(config.constrained);
  if (config.gamma == 0.0) return log_prior_beta_l(beta_k, sk) - normal::kLogSqrt2Pi - std::log(sk);
  const double h = h_gamma(lambda, beta, data, config.constrained, config.gamma);
  if (beta_k < -h) return kNegInf;
  return log_prior_beta_l(beta_k, sk) - log_norm_constant_from_h(h, sk);
}

}  // namespace bchaz
