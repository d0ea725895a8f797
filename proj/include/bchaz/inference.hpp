#pragma once

// Posterior summaries, predictive survival, hazard curves and the
// Nelson-Aalen estimator.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "model.hpp"
#include "sampler.hpp"
#include "stats.hpp"

namespace bchaz {

struct Interval {
  double low;
  double high;
  double width() const { return high - low; }
};

/// Number of sorted draws an interval at `level` must cover: ceil(level * M).
inline std::size_t credible_count(std::size_t m, double level) {
  if (!(level > 0.0 && level < 1.0)) throw DomainError("credible level must lie in (0, 1)");
  const auto w = static_cast<std::size_t>(std::ceil(level * static_cast<double>(m) - 1e-9));
  return std::clamp<std::size_t>(w, 1, m);
}

/// Shortest window over the sorted draws that contains ceil(level * M) of
/// them; ties go to the lowest start.
inline Interval hpd_interval(std::span<const double> draws, double level = 0.95) {
  if (draws.empty()) throw DomainError("hpd_interval: no draws");
  std::vector<double> x(draws.begin(), draws.end());
  std::sort(x.begin(), x.end());
  const std::size_t w = credible_count(x.size(), level);
  std::size_t best = 0;
  double best_width = x[w - 1] - x[0];
  for (std::size_t i = 1; i + w <= x.size(); ++i) {
    const double width = x[i + w - 1] - x[i];
    if (width < best_width) {
      best_width = width;
      best = i;
    }
  }
  return {x[best], x[best + w - 1]};
}

/// Central window with the same draw count as hpd_interval.
inline Interval equal_tail_interval(std::span<const double> draws, double level = 0.95) {
  if (draws.empty()) throw DomainError("equal_tail_interval: no draws");
  std::vector<double> x(draws.begin(), draws.end());
  std::sort(x.begin(), x.end());
  const std::size_t w = credible_count(x.size(), level);
  const std::size_t start = (x.size() - w) / 2;
  return {x[start], x[start + w - 1]};
}

struct ParameterSummary {
  std::string name;
  double mean;
  double sd;
  double hpd_low;
  double hpd_high;
  double mcse;
};

struct PosteriorSummary {
  double level = 0.95;
  std::vector<ParameterSummary> parameters;

  const ParameterSummary& at(const std::string& name) const {
    for (const auto& p : parameters)
      if (p.name == name) return p;
    throw DomainError("no summary for parameter '" + name + "'");
  }
};

inline PosteriorSummary summarize(const ChainOutput& chain, double level = 0.95) {
  if (chain.size() < 2) throw DomainError("summarize: need at least two draws");
  PosteriorSummary out;
  out.level = level;
  const auto names = chain.names();
  for (std::size_t c = 0; c < chain.width(); ++c) {
    const auto col = chain.column(c);
    const auto hpd = hpd_interval(col, level);
    out.parameters.push_back({names[c], stats::mean(col), stats::sd(col), hpd.low, hpd.high, stats::mcse(col)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Predictions for a covariate profile z.

struct SurvivalPrediction {
  std::vector<double> z;
  std::vector<double> times;
  std::vector<double> survival;
};

namespace detail {

inline void check_profile(const ChainOutput& chain, std::span<const double> z) {
  if (z.size() != chain.p) throw DomainError("covariate profile length differs from coefficient count");
}

inline void check_time(const ChainOutput& chain, double t) {
  if (t < 0.0) throw DomainError("prediction time must be nonnegative");
  if (t > chain.partition.end())
    throw ExtrapolationError("time " + std::to_string(t) + " lies beyond the last cut point " +
                             std::to_string(chain.partition.end()));
}

}  // namespace detail

/// Posterior predictive survival probability (1/M) sum_m exp(-H_m(t | z)).
inline double predict_survival(const ChainOutput& chain, std::span<const double> z, double t) {
  detail::check_profile(chain, z);
  detail::check_time(chain, t);
  if (chain.size() == 0) throw DomainError("predict_survival: empty chain");
  double acc = 0.0;
  for (std::size_t m = 0; m < chain.size(); ++m) {
    const auto r = chain.row(m);
    const double eta = dot(z, r.first(chain.p));
    acc += std::exp(-cumulative_hazard(chain.partition, r.subspan(chain.p), eta, chain.config.gamma, t));
  }
  return acc / static_cast<double>(chain.size());
}

inline SurvivalPrediction predict_survival(const ChainOutput& chain, std::span<const double> z,
                                           std::span<const double> times) {
  SurvivalPrediction out{{z.begin(), z.end()}, {times.begin(), times.end()}, {}};
  for (double t : times) out.survival.push_back(predict_survival(chain, z, t));
  return out;
}

/// Posterior mean hazard at each time in (0, s_J].
inline std::vector<double> hazard_curve(const ChainOutput& chain, std::span<const double> z,
                                        std::span<const double> times) {
  detail::check_profile(chain, z);
  std::vector<double> out;
  out.reserve(times.size());
  for (double t : times) {
    detail::check_time(chain, t);
    if (!(t > 0.0)) throw DomainError("hazard_curve: times must be positive");
    const std::size_t j = chain.partition.interval_of(t);
    double acc = 0.0;
    for (std::size_t m = 0; m < chain.size(); ++m) {
      const auto r = chain.row(m);
      acc += hazard(r[chain.p + j], dot(z, r.first(chain.p)), chain.config.gamma);
    }
    out.push_back(acc / static_cast<double>(chain.size()));
  }
  return out;
}

/// Interval midpoints, the default tabulation grid for hazard curves.
inline std::vector<double> interval_midpoints(const TimePartition& partition) {
  std::vector<double> mids;
  for (std::size_t j = 0; j < partition.intervals(); ++j) mids.push_back(0.5 * (partition.cuts[j] + partition.cuts[j + 1]));
  return mids;
}

// ---------------------------------------------------------------------------
// Nelson-Aalen cumulative hazard.

struct CumulativeHazardCurve {
  std::vector<double> times;  // distinct event times, ascending
  std::vector<double> cumulative_hazard;

  double at(double t) const {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 0.0;
    return cumulative_hazard[static_cast<std::size_t>(it - times.begin()) - 1];
  }
};

namespace detail {

inline CumulativeHazardCurve nelson_aalen_subset(const SurvivalDataset& data, const std::vector<std::size_t>& idx) {
  std::vector<std::size_t> order(idx);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return data.time[a] < data.time[b]; });
  CumulativeHazardCurve curve;
  double cum = 0.0;
  std::size_t at_risk = order.size();
  for (std::size_t pos = 0; pos < order.size();) {
    const double t = data.time[order[pos]];
    std::size_t deaths = 0, leaving = 0;
    while (pos < order.size() && data.time[order[pos]] == t) {
      deaths += static_cast<std::size_t>(data.status[order[pos]]);
      ++leaving;
      ++pos;
    }
    if (deaths > 0) {
      cum += static_cast<double>(deaths) / static_cast<double>(at_risk);
      curve.times.push_back(t);
      curve.cumulative_hazard.push_back(cum);
    }
    at_risk -= leaving;
  }
  return curve;
}

}  // namespace detail

/// Nelson-Aalen estimate for the whole dataset.
inline CumulativeHazardCurve nelson_aalen(const SurvivalDataset& data) {
  std::vector<std::size_t> all(data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  if (all.empty()) throw DomainError("nelson_aalen: empty group");
  return detail::nelson_aalen_subset(data, all);
}

/// One curve per distinct label. `groups`, when given, lists the groups that
/// must be present; a listed group without members is an error.
template <class Label>
std::map<Label, CumulativeHazardCurve> nelson_aalen(const SurvivalDataset& data, std::span<const Label> labels,
                                                    std::span<const Label> groups = {}) {
  if (labels.size() != data.size()) throw DomainError("nelson_aalen: one label per subject required");
  std::map<Label, std::vector<std::size_t>> members;
  for (const auto& g : groups) members[g];
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(i);
  std::map<Label, CumulativeHazardCurve> out;
  for (const auto& [label, idx] : members) {
    if (idx.empty()) throw DomainError("nelson_aalen: empty group");
    out.emplace(label, detail::nelson_aalen_subset(data, idx));
  }
  return out;
}

}  // namespace bchaz
