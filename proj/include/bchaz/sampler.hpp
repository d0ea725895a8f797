#pragma once

// Metropolis-within-Gibbs sampler for the Box-Cox transformation hazard
// model. Each sweep updates beta_1..beta_p by adaptive rejection sampling
// from their (log-concave) full conditionals and then lambda_1..lambda_J by
// a random-walk Metropolis step on the log scale.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ars.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "stats.hpp"

namespace bchaz {

using Rng = std::mt19937_64;

struct SamplerSettings {
  std::size_t burn_in = 2000;
  std::size_t thin = 5;
  std::size_t samples = 10000;
  std::uint64_t seed = 1;
  /// Initial SD of the log-scale random walk on each lambda_j.
  double metropolis_step = 0.5;
  /// Burn-in iterations between proposal-scale adaptations.
  std::size_t adapt_window = 25;
  int ars_init_points = 3;
  /// Ignore the likelihood and sample the (constrained) prior.
  bool prior_only = false;

  void validate() const {
    if (thin < 1) throw ConfigError("thin must be at least 1");
    if (samples < 1) throw ConfigError("sample count must be at least 1");
    if (!(metropolis_step > 0.0)) throw ConfigError("metropolis step must be positive");
    if (adapt_window < 1) throw ConfigError("adaptation window must be at least 1");
    if (ars_init_points < 3) throw ConfigError("ARS needs at least 3 initial abscissae");
  }
};

/// Target acceptance rate for the lambda random walk.
inline constexpr double kTargetAcceptance = 0.44;

struct ChainStatistics {
  std::vector<double> lambda_acceptance;  // post burn-in
  std::vector<double> lambda_step;        // frozen proposal SDs
  std::vector<std::size_t> beta_fallbacks;
  ArsStats ars;
};

/// Retained draws, row-major M x (p + J): beta_1..beta_p, lambda_1..lambda_J.
struct ChainOutput {
  ModelConfig config;
  SamplerSettings settings;
  TimePartition partition;
  std::size_t p = 0;
  std::size_t J = 0;
  std::vector<double> draws;
  std::vector<double> loglik;
  std::vector<std::size_t> iteration;
  ChainStatistics stats;

  std::size_t size() const noexcept { return loglik.size(); }
  std::size_t width() const noexcept { return p + J; }

  std::span<const double> row(std::size_t m) const { return {draws.data() + m * width(), width()}; }

  ParameterState state(std::size_t m) const {
    auto r = row(m);
    return {{r.begin(), r.begin() + static_cast<std::ptrdiff_t>(p)}, {r.begin() + static_cast<std::ptrdiff_t>(p), r.end()}};
  }

  std::vector<double> column(std::size_t c) const {
    std::vector<double> out(size());
    for (std::size_t m = 0; m < size(); ++m) out[m] = draws[m * width() + c];
    return out;
  }

  std::vector<std::string> names() const { return parameter_names(p, J); }

  static std::vector<std::string> parameter_names(std::size_t p, std::size_t J) {
    std::vector<std::string> n;
    for (std::size_t l = 0; l < p; ++l) n.push_back("beta_" + std::to_string(l + 1));
    for (std::size_t j = 0; j < J; ++j) n.push_back("lambda_" + std::to_string(j + 1));
    return n;
  }

  void append(const ParameterState& s, double ll, std::size_t iter) {
    draws.insert(draws.end(), s.beta.begin(), s.beta.end());
    draws.insert(draws.end(), s.lambda.begin(), s.lambda.end());
    loglik.push_back(ll);
    iteration.push_back(iter);
  }
};

/// One record per Gibbs sweep, passed to an optional trace sink.
struct TraceRecord {
  std::size_t iteration;
  const ParameterState& state;
  double loglik;
  const std::vector<bool>& lambda_accepted;
  bool burn_in;
};

using TraceSink = std::function<void(const TraceRecord&)>;

/// Crude admissible starting point: beta = 0 and lambda_j = events in
/// interval j over exposure in interval j. In prior-only mode, or with no
/// subjects at all, lambda_j starts at the prior mean.
inline ParameterState initialize_state(const SurvivalDataset& data, const TimePartition& partition,
                                       const ModelConfig& config, bool prior_only = false) {
  const std::size_t J = partition.intervals();
  ParameterState s{std::vector<double>(data.num_covariates(), 0.0), std::vector<double>(J, 0.0)};
  if (prior_only || data.size() == 0) {
    std::fill(s.lambda.begin(), s.lambda.end(), config.alpha / config.xi);
    return s;
  }
  std::vector<double> events(J, 0.0), exposure(J, 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::size_t j = partition.interval_of(data.time[i]);
    for (std::size_t g = 0; g < j; ++g) exposure[g] += partition.width(g);
    exposure[j] += data.time[i] - partition.cuts[j];
    events[j] += data.status[i];
  }
  for (std::size_t j = 0; j < J; ++j) {
    if (!(exposure[j] > 0.0))
      throw InitializationError("interval " + std::to_string(j + 1) + " has zero exposure");
    if (events[j] == 0.0) throw InitializationError("interval " + std::to_string(j + 1) + " contains no event");
    s.lambda[j] = std::max(events[j] / exposure[j], 1e-8);
  }
  return s;
}

class GibbsSampler {
 public:
  GibbsSampler(const SurvivalDataset& data, const TimePartition& partition, ModelConfig config,
               SamplerSettings settings)
      : posterior_(data, partition, std::move(config)), settings_(settings), rng_(settings.seed) {
    settings_.validate();
    const std::size_t p = data.num_covariates();
    ars_scale_.resize(p);
    for (std::size_t m = 0; m < p; ++m) ars_scale_[m] = std::min(0.1 * posterior_.config().sigma[m], 0.1);
    lambda_step_.assign(partition.intervals(), settings_.metropolis_step);
    beta_fallbacks_.assign(p, 0);
    ars_options_.init_points = settings_.ars_init_points;
  }

  const Posterior& posterior() const noexcept { return posterior_; }
  Rng& rng() noexcept { return rng_; }
  const ArsStats& ars_stats() const noexcept { return ars_stats_; }
  const std::vector<double>& lambda_steps() const noexcept { return lambda_step_; }
  std::vector<double>& lambda_steps() noexcept { return lambda_step_; }
  const std::vector<std::size_t>& beta_fallbacks() const noexcept { return beta_fallbacks_; }

  double log_density(const ParameterState& s) const { return posterior_.log_density(s, !settings_.prior_only); }

  ParameterState initial_state() const {
    const auto& lik = posterior_.likelihood();
    ParameterState s = initialize_state(lik.data(), lik.partition(), posterior_.config(), settings_.prior_only);
    if (!std::isfinite(log_density(s)))
      throw InitializationError("initial state has zero posterior density");
    return s;
  }

  /// Exact draw of beta_m from its full conditional on the admissible range.
  double sample_beta_component(ParameterState& s, std::size_t m) {
    const auto [lo, hi] = posterior_.likelihood().beta_range(s, m);
    ParameterState work = s;
    auto logf = [&](double b) {
      work.beta[m] = b;
      return log_density(work);
    };
    if (auto draw = adaptive_rejection_sample(logf, s.beta[m], ars_scale_[m], lo, hi, ars_options_, rng_, ars_stats_)) {
      s.beta[m] = *draw;
    } else {
      ++beta_fallbacks_[m];
      s.beta[m] = metropolis_fallback(s, m);
    }
    return s.beta[m];
  }

  /// One log-normal random-walk Metropolis update of lambda_j. Returns
  /// whether the proposal was accepted.
  bool sample_lambda_component(ParameterState& s, std::size_t j) {
    const double current = s.lambda[j];
    const double f_current = log_density(s);
    std::normal_distribution<double> z(0.0, 1.0);
    const double proposal = current * std::exp(lambda_step_[j] * z(rng_));
    s.lambda[j] = proposal;
    const double f_proposal = log_density(s);
    const double log_ratio = f_proposal - f_current + std::log(proposal) - std::log(current);
    if (std::isfinite(f_proposal) && std::log(stats::uniform_open01(rng_)) <= log_ratio) return true;
    s.lambda[j] = current;
    return false;
  }

  /// Systematic scan beta_1..beta_p, lambda_1..lambda_J.
  void sweep(ParameterState& s, std::vector<bool>& accepted) {
    for (std::size_t m = 0; m < s.beta.size(); ++m) {
      sample_beta_component(s, m);
      assert_admissible(s);
    }
    accepted.resize(s.lambda.size());
    for (std::size_t j = 0; j < s.lambda.size(); ++j) {
      accepted[j] = sample_lambda_component(s, j);
      assert_admissible(s);
    }
  }

  ChainOutput run(const TraceSink& sink = {}) {
    const auto& lik = posterior_.likelihood();
    const std::size_t J = lik.intervals();
    ParameterState s = initial_state();

    ChainOutput out;
    out.config = posterior_.config();
    out.settings = settings_;
    out.partition = lik.partition();
    out.p = lik.num_covariates();
    out.J = J;
    out.draws.reserve(settings_.samples * out.width());
    out.loglik.reserve(settings_.samples);

    std::vector<bool> accepted;
    std::vector<std::size_t> window_accepts(J, 0), kept_accepts(J, 0);
    std::size_t adaptations = 0, kept_sweeps = 0;
    const std::size_t total = settings_.burn_in + settings_.thin * settings_.samples;

    for (std::size_t it = 1; it <= total; ++it) {
      sweep(s, accepted);
      const bool burning = it <= settings_.burn_in;
      for (std::size_t j = 0; j < J; ++j) {
        if (burning)
          window_accepts[j] += accepted[j];
        else
          kept_accepts[j] += accepted[j];
      }
      if (!burning) ++kept_sweeps;
      if (burning && it % settings_.adapt_window == 0) {
        ++adaptations;
        const double gain = 1.0 / std::sqrt(static_cast<double>(adaptations));
        for (std::size_t j = 0; j < J; ++j) {
          const double rate = static_cast<double>(window_accepts[j]) / static_cast<double>(settings_.adapt_window);
          lambda_step_[j] *= std::exp(gain * (rate - kTargetAcceptance));
          window_accepts[j] = 0;
        }
      }
      const bool keep = !burning && (it - settings_.burn_in) % settings_.thin == 0;
      double ll = 0.0;
      if (keep || sink) ll = lik.log_likelihood(s);
      if (keep) out.append(s, ll, it);
      if (sink) sink(TraceRecord{it, s, ll, accepted, burning});
    }

    out.stats.lambda_step = lambda_step_;
    out.stats.lambda_acceptance.resize(J);
    for (std::size_t j = 0; j < J; ++j)
      out.stats.lambda_acceptance[j] =
          kept_sweeps == 0 ? 0.0 : static_cast<double>(kept_accepts[j]) / static_cast<double>(kept_sweeps);
    out.stats.beta_fallbacks = beta_fallbacks_;
    out.stats.ars = ars_stats_;
    return out;
  }

 private:
  // Normal random-walk step with SD sigma_m / 10, used when the rejection
  // sampler cannot build a hull.
  double metropolis_fallback(ParameterState& s, std::size_t m) {
    const double current = s.beta[m];
    const double f_current = log_density(s);
    std::normal_distribution<double> z(0.0, posterior_.config().sigma[m] / 10.0);
    s.beta[m] = current + z(rng_);
    const double f_proposal = log_density(s);
    if (std::isfinite(f_proposal) && std::log(stats::uniform_open01(rng_)) <= f_proposal - f_current) return s.beta[m];
    s.beta[m] = current;
    return current;
  }

  void assert_admissible([[maybe_unused]] const ParameterState& s) const {
#ifndef NDEBUG
    if (!posterior_.likelihood().admissible(s)) throw ConstraintError("sampler left the admissible region");
#endif
  }

  Posterior posterior_;
  SamplerSettings settings_;
  Rng rng_;
  ArsOptions ars_options_;
  ArsStats ars_stats_;
  std::vector<double> ars_scale_;
  std::vector<double> lambda_step_;
  std::vector<std::size_t> beta_fallbacks_;
};

inline ChainOutput run_chain(const SurvivalDataset& data, const TimePartition& partition, const ModelConfig& config,
                             const SamplerSettings& settings, const TraceSink& sink = {}) {
  GibbsSampler sampler(data, partition, config, settings);
  return sampler.run(sink);
}

// ---------------------------------------------------------------------------
// Geweke convergence diagnostic

struct GewekeReport {
  std::vector<std::string> names;
  /// One z-score per parameter; nullopt where the chain segment variance is
  /// zero (constant chain).
  std::vector<std::optional<double>> z;
  double early_fraction = 0.1;
  double late_fraction = 0.5;
};

/// z = (mean_early - mean_late) / sqrt(S_early/n_early + S_late/n_late) with
/// spectral densities at zero from batch means.
inline std::optional<double> geweke_z(std::span<const double> x, double early_fraction = 0.1,
                                      double late_fraction = 0.5) {
  if (!(early_fraction > 0.0) || !(late_fraction > 0.0) || early_fraction + late_fraction > 1.0)
    throw DomainError("geweke: fractions must be positive and sum to at most 1");
  const std::size_t n = x.size();
  const auto n_early = static_cast<std::size_t>(std::floor(early_fraction * static_cast<double>(n)));
  const auto n_late = static_cast<std::size_t>(std::floor(late_fraction * static_cast<double>(n)));
  if (n_early < 2 || n_late < 2) throw DomainError("geweke: chain too short");
  const auto early = x.first(n_early);
  const auto late = x.last(n_late);
  const double v = stats::batch_means_variance_of_mean(early) + stats::batch_means_variance_of_mean(late);
  if (!(v > 0.0)) return std::nullopt;
  return (stats::mean(early) - stats::mean(late)) / std::sqrt(v);
}

inline GewekeReport geweke_diagnostic(const ChainOutput& chain, double early_fraction = 0.1,
                                      double late_fraction = 0.5) {
  if (chain.size() < 100) throw DomainError("geweke: need at least 100 retained draws");
  GewekeReport r;
  r.names = chain.names();
  r.early_fraction = early_fraction;
  r.late_fraction = late_fraction;
  for (std::size_t c = 0; c < chain.width(); ++c) r.z.push_back(geweke_z(chain.column(c), early_fraction, late_fraction));
  return r;
}

}  // namespace bchaz
