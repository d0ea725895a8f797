#pragma once

// Model comparison: conditional predictive ordinates, the pseudo Bayes factor
// statistic B, DIC, and the (gamma, J) grid search.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "data.hpp"
#include "errors.hpp"
#include "inference.hpp"
#include "model.hpp"
#include "sampler.hpp"

namespace bchaz {

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Each index is visited
/// exactly once; callers write results into per-index slots.
template <class Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  for (std::size_t t = 0; t < jobs; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

/// Subject i's factor of the likelihood at one parameter draw.
inline double subject_likelihood(const ParameterState& draw, std::size_t i, const SurvivalDataset& data,
                                 const TimePartition& partition, double gamma) {
  const PiecewiseLikelihood lik(data, partition, gamma);
  lik.check_dimensions(draw);
  if (i >= data.size()) throw DomainError("subject index out of range");
  return std::exp(lik.subject_log_likelihood(draw, i));
}

struct CpoResult {
  std::vector<double> cpo;
  std::vector<double> log_cpo;
  /// Monte Carlo coefficient of variation of the average of 1/L_i.
  std::vector<double> cv;
  std::vector<std::size_t> degenerate;  // subjects with L_i = 0 at some draw
};

/// Harmonic-mean CPO_i = [ (1/M) sum_m 1/L_i(theta_m) ]^{-1}, accumulated in
/// log space with a running maximum.
inline CpoResult compute_cpo(const ChainOutput& chain, const SurvivalDataset& data, std::size_t jobs = 1) {
  if (chain.size() == 0) throw DomainError("compute_cpo: empty chain");
  const PiecewiseLikelihood lik(data, chain.partition, chain.config.gamma);
  const std::size_t n = data.size();
  const double M = static_cast<double>(chain.size());

  std::vector<double> mx(n, -std::numeric_limits<double>::infinity()), s1(n, 0.0), s2(n, 0.0);
  std::vector<char> zero(n, 0);
  const std::size_t blocks = std::max<std::size_t>(1, std::min(jobs, n));
  parallel_for(blocks, jobs, [&](std::size_t b) {
    const std::size_t first = b * n / blocks, last = (b + 1) * n / blocks;
    std::vector<double> ll(n);
    for (std::size_t m = 0; m < chain.size(); ++m) {
      lik.subject_log_likelihoods(chain.state(m), ll);
      for (std::size_t i = first; i < last; ++i) {
        const double v = -ll[i];
        if (v == std::numeric_limits<double>::infinity()) {
          zero[i] = 1;
          continue;
        }
        if (v > mx[i]) {
          const double r = std::exp(mx[i] - v);
          s1[i] *= r;
          s2[i] *= r * r;
          mx[i] = v;
        }
        const double w = std::exp(v - mx[i]);
        s1[i] += w;
        s2[i] += w * w;
      }
    }
  });

  CpoResult out;
  out.cpo.resize(n);
  out.log_cpo.resize(n);
  out.cv.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (zero[i]) {
      out.degenerate.push_back(i);
      out.log_cpo[i] = -std::numeric_limits<double>::infinity();
      out.cpo[i] = 0.0;
      out.cv[i] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    out.log_cpo[i] = -(mx[i] + std::log(s1[i] / M));
    out.cpo[i] = std::exp(out.log_cpo[i]);
    out.cv[i] = std::sqrt(std::max(0.0, M * s2[i] / (s1[i] * s1[i]) - 1.0) / M);
  }
  return out;
}

struct FitStatistics {
  std::vector<double> cpo;
  std::vector<double> cpo_cv;
  double B = 0.0;
  /// NaN when the posterior-mean state is inadmissible; see dic_error.
  double dic = std::numeric_limits<double>::quiet_NaN();
  double dev_mean = std::numeric_limits<double>::quiet_NaN();
  double dev_at_mean = std::numeric_limits<double>::quiet_NaN();
  std::string dic_error;
};

struct DevianceSummary {
  double dev_mean;
  double dev_at_mean;
  double dic;
};

/// DIC = 2 mean(Dev) - Dev(mean) with Dev = -2 log L.
inline DevianceSummary deviance_information(std::span<const double> loglik, double loglik_at_mean) {
  const double dev_mean = -2.0 * stats::mean(loglik);
  const double dev_at_mean = -2.0 * loglik_at_mean;
  return {dev_mean, dev_at_mean, 2.0 * dev_mean - dev_at_mean};
}

inline ParameterState posterior_mean_state(const ChainOutput& chain) {
  std::vector<double> means(chain.width(), 0.0);
  for (std::size_t m = 0; m < chain.size(); ++m) {
    const auto r = chain.row(m);
    for (std::size_t c = 0; c < chain.width(); ++c) means[c] += r[c];
  }
  for (double& v : means) v /= static_cast<double>(chain.size());
  return {{means.begin(), means.begin() + static_cast<std::ptrdiff_t>(chain.p)},
          {means.begin() + static_cast<std::ptrdiff_t>(chain.p), means.end()}};
}

/// Uses the stored per-draw log-likelihoods; throws ConstraintError when the
/// posterior-mean state violates the hazard constraint.
inline DevianceSummary compute_dic(const ChainOutput& chain, const SurvivalDataset& data) {
  if (chain.size() == 0) throw DomainError("compute_dic: empty chain");
  const PiecewiseLikelihood lik(data, chain.partition, chain.config.gamma);
  const ParameterState mean = posterior_mean_state(chain);
  const double ll = lik.log_likelihood(mean);
  if (!std::isfinite(ll))
    throw ConstraintError(
        "posterior mean of (beta, lambda) is inadmissible or has zero likelihood; DIC is undefined, compare models "
        "by B instead");
  return deviance_information(chain.loglik, ll);
}

inline FitStatistics fit_statistics(const ChainOutput& chain, const SurvivalDataset& data, std::size_t jobs = 1) {
  FitStatistics f;
  auto cpo = compute_cpo(chain, data, jobs);
  f.cpo = std::move(cpo.cpo);
  f.cpo_cv = std::move(cpo.cv);
  f.B = 0.0;
  for (double l : cpo.log_cpo) f.B += l;
  try {
    const auto d = compute_dic(chain, data);
    f.dic = d.dic;
    f.dev_mean = d.dev_mean;
    f.dev_at_mean = d.dev_at_mean;
  } catch (const ConstraintError& e) {
    f.dic_error = e.what();
  }
  return f;
}

// ---------------------------------------------------------------------------
// (gamma, J) grid search.

struct GridCell {
  double gamma = 0.0;
  std::size_t J = 0;
  bool ok = false;
  std::string error;
  FitStatistics fit;
  PosteriorSummary summary;
  ChainStatistics chain_stats;
};

struct GridResult {
  std::vector<GridCell> cells;
  std::optional<std::size_t> best_by_B;
  std::optional<std::size_t> best_by_dic;
};

inline void mark_best(GridResult& g) {
  g.best_by_B.reset();
  g.best_by_dic.reset();
  for (std::size_t c = 0; c < g.cells.size(); ++c) {
    const auto& cell = g.cells[c];
    if (!cell.ok) continue;
    if (!g.best_by_B || cell.fit.B > g.cells[*g.best_by_B].fit.B) g.best_by_B = c;
    if (!std::isnan(cell.fit.dic) && (!g.best_by_dic || cell.fit.dic < g.cells[*g.best_by_dic].fit.dic))
      g.best_by_dic = c;
  }
}

/// Fits every (gamma, J) cell, gamma-major, with the priors in `base` shared
/// across cells. A cell that cannot be partitioned or initialized is marked
/// failed and the grid continues.
inline GridResult run_grid(const SurvivalDataset& data, const std::vector<double>& gammas,
                           const std::vector<std::size_t>& Js, const ModelConfig& base,
                           const SamplerSettings& settings, std::size_t jobs = 1, double level = 0.95,
                           const std::function<TraceSink(std::size_t cell)>& trace = {}) {
  if (gammas.empty() || Js.empty()) throw ConfigError("grid: gamma and J lists must be non-empty");
  GridResult g;
  for (double gamma : gammas)
    for (std::size_t J : Js) {
      GridCell cell;
      cell.gamma = gamma;
      cell.J = J;
      g.cells.push_back(cell);
    }
  parallel_for(g.cells.size(), jobs, [&](std::size_t c) {
    auto& cell = g.cells[c];
    try {
      ModelConfig config = base;
      config.gamma = cell.gamma;
      const TimePartition partition = build_partition(data, cell.J);
      const ChainOutput chain = run_chain(data, partition, config, settings, trace ? trace(c) : TraceSink{});
      cell.fit = fit_statistics(chain, data);
      cell.summary = chain.size() >= 2 ? summarize(chain, level) : PosteriorSummary{};
      cell.chain_stats = chain.stats;
      cell.ok = true;
    } catch (const Error& e) {
      cell.ok = false;
      cell.error = e.what();
    }
  });
  mark_best(g);
  return g;
}

}  // namespace bchaz
